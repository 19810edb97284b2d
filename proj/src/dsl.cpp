// SPDX-License-Identifier: Apache-2.0
#include "fenn/dsl.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>

#include <fmt/format.h>

namespace fenn::dsl {

SyntaxError::SyntaxError(int l, int c, const std::string& msg)
    : std::runtime_error(fmt::format("{}:{}: {}", l, c, msg)), line(l), col(c) {}

// ---- lexer --------------------------------------------------------------

namespace {

struct Token {
    enum class Kind : std::uint8_t { Ident, Number, Punct, End } kind = Kind::End;
    std::string text;
    double number = 0;
    int line = 1, col = 1;
};

std::vector<Token> lex(std::string_view src, RoundMode& rounding) {
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    while (i < src.size()) {
        const char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (src.substr(i, 2) == "//") {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        if (src.substr(i, 2) == "/*") {
            const auto end = src.find("*/", i + 2);
            if (end == std::string_view::npos) throw SyntaxError(line, col, "unterminated comment");
            advance(end + 2 - i);
            continue;
        }
        if (c == '#') {
            const int l = line, cl = col;
            std::size_t e = src.find('\n', i);
            if (e == std::string_view::npos) e = src.size();
            std::string text(src.substr(i, e - i));
            advance(e - i);
            std::vector<std::string> words;
            for (std::size_t p = 0; p < text.size();) {
                while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
                std::size_t q = p;
                while (q < text.size() && !std::isspace(static_cast<unsigned char>(text[q]))) ++q;
                if (q > p) words.push_back(text.substr(p, q - p));
                p = q;
            }
            if (words.size() == 3 && words[0] == "#pragma" && words[1] == "round") {
                if (words[2] == "zero") rounding = RoundMode::ToZero;
                else if (words[2] == "nearest") rounding = RoundMode::ToNearest;
                else if (words[2] == "stochastic") rounding = RoundMode::Stochastic;
                else throw SyntaxError(l, cl, "unknown rounding mode " + words[2]);
                continue;
            }
            throw SyntaxError(l, cl, "unknown directive");
        }
        Token t;
        t.line = line;
        t.col = col;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            t.kind = Token::Kind::Ident;
            t.text = std::string(src.substr(i, j - i));
            advance(j - i);
        } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            std::string s(src.substr(i));
            std::size_t used = 0;
            t.number = std::stod(s, &used);
            t.kind = Token::Kind::Number;
            t.text = s.substr(0, used);
            advance(used);
        } else {
            static const char* two[] = {"+=", "-=", "==", "!=", "<=", ">="};
            t.kind = Token::Kind::Punct;
            for (const char* op : two)
                if (src.substr(i, 2) == op) t.text = op;
            if (t.text.empty()) {
                if (std::string_view("+-*()={};<>").find(c) == std::string_view::npos)
                    throw SyntaxError(line, col, fmt::format("unexpected character '{}'", c));
                t.text = std::string(1, c);
            }
            advance(t.text.size());
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.line = line;
    end.col = col;
    out.push_back(end);
    return out;
}

// ---- parser -------------------------------------------------------------

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

    std::vector<Stmt> statements(bool until_brace) {
        std::vector<Stmt> out;
        while (!(until_brace ? is("}") : peek().kind == Token::Kind::End)) {
            if (peek().kind == Token::Kind::End) error(peek(), "expected '}'");
            out.push_back(statement());
        }
        return out;
    }

private:
    const Token& peek() const { return t_[p_]; }
    bool is(const char* punct) const { return peek().kind == Token::Kind::Punct && peek().text == punct; }
    [[noreturn]] void error(const Token& t, const std::string& what) const {
        const std::string shown = t.kind == Token::Kind::End ? "end of input" : "'" + t.text + "'";
        throw SyntaxError(t.line, t.col, fmt::format("{} at {}", what, shown));
    }
    const Token& take() { return t_[p_++]; }
    void expect(const char* punct) {
        if (!is(punct)) error(peek(), fmt::format("expected '{}'", punct));
        ++p_;
    }

    Stmt statement() {
        const Token& head = peek();
        if (head.kind != Token::Kind::Ident) error(head, "expected a statement");
        Stmt s;
        s.line = head.line;
        s.col = head.col;
        if (head.text == "if") {
            ++p_;
            s.kind = Stmt::Kind::If;
            expect("(");
            s.cond_lhs = expr();
            static const std::pair<const char*, Cmp> cmps[] = {{"==", Cmp::Eq}, {"!=", Cmp::Ne}, {"<", Cmp::Lt},
                                                                {"<=", Cmp::Le}, {">", Cmp::Gt},  {">=", Cmp::Ge}};
            bool found = false;
            for (const auto& [txt, c] : cmps)
                if (is(txt)) {
                    s.cmp = c;
                    found = true;
                }
            if (!found) error(peek(), "expected a comparison");
            ++p_;
            s.cond_rhs = expr();
            expect(")");
            expect("{");
            s.then_body = statements(true);
            expect("}");
            if (peek().kind == Token::Kind::Ident && peek().text == "else") {
                ++p_;
                if (peek().kind == Token::Kind::Ident && peek().text == "if") {
                    s.else_body.push_back(statement());
                } else {
                    expect("{");
                    s.else_body = statements(true);
                    expect("}");
                }
            }
            return s;
        }
        if (head.text == "else") error(head, "'else' without 'if'");
        s.target = take().text;
        if (is("(")) {
            ++p_;
            expect(")");
            expect(";");
            s.kind = Stmt::Kind::Emit;
            return s;
        }
        if (is("=")) s.op = '=';
        else if (is("+=")) s.op = '+';
        else if (is("-=")) s.op = '-';
        else error(peek(), "expected '=', '+=', '-=' or '('");
        ++p_;
        s.value = expr();
        expect(";");
        return s;
    }

    std::unique_ptr<Expr> node(Expr::Kind k, const Token& at) {
        auto e = std::make_unique<Expr>();
        e->kind = k;
        e->line = at.line;
        e->col = at.col;
        return e;
    }

    std::unique_ptr<Expr> expr() {
        auto lhs = term();
        while (is("+") || is("-")) {
            const Token& op = take();
            auto e = node(op.text == "+" ? Expr::Kind::Add : Expr::Kind::Sub, op);
            e->lhs = std::move(lhs);
            e->rhs = term();
            lhs = std::move(e);
        }
        return lhs;
    }

    std::unique_ptr<Expr> term() {
        auto lhs = unary();
        while (is("*")) {
            const Token& op = take();
            auto e = node(Expr::Kind::Mul, op);
            e->lhs = std::move(lhs);
            e->rhs = unary();
            lhs = std::move(e);
        }
        return lhs;
    }

    std::unique_ptr<Expr> unary() {
        if (is("-")) {
            const Token& op = take();
            auto e = node(Expr::Kind::Neg, op);
            e->lhs = unary();
            return e;
        }
        return primary();
    }

    std::unique_ptr<Expr> primary() {
        const Token& t = peek();
        if (t.kind == Token::Kind::Number) {
            ++p_;
            auto e = node(Expr::Kind::Number, t);
            e->number = t.number;
            return e;
        }
        if (t.kind == Token::Kind::Ident && t.text != "if" && t.text != "else") {
            ++p_;
            auto e = node(Expr::Kind::Name, t);
            e->name = t.text;
            return e;
        }
        if (is("(")) {
            ++p_;
            auto e = expr();
            expect(")");
            return e;
        }
        error(t, "expected an expression");
    }

    std::vector<Token> t_;
    std::size_t p_ = 0;
};

} // namespace

Program parse(std::string_view code) {
    Program p;
    Parser parser(lex(code, p.rounding));
    p.stmts = parser.statements(false);
    return p;
}

// ---- type checker -------------------------------------------------------

namespace {

class Checker {
public:
    Checker(const Env& env, TypedProgram& out) : env_(env), out_(out) {}

    std::vector<TStmt> block(const std::vector<Stmt>& stmts) {
        std::vector<TStmt> out;
        for (const auto& s : stmts) out.push_back(statement(s));
        return out;
    }

private:
    TStmt statement(const Stmt& s) {
        TStmt t;
        switch (s.kind) {
        case Stmt::Kind::Emit:
            if (!env_.events.contains(s.target)) throw TypeError("unresolved identifier " + s.target);
            t.kind = TStmt::Kind::Emit;
            t.target = s.target;
            out_.events.insert(s.target);
            break;
        case Stmt::Kind::Assign: {
            if (env_.params.contains(s.target)) throw TypeError("cannot assign to parameter " + s.target);
            const auto it = env_.vars.find(s.target);
            if (it == env_.vars.end()) throw TypeError("unresolved identifier " + s.target);
            const QFormat f = it->second;
            t.kind = TStmt::Kind::Assign;
            t.target = s.target;
            if (s.op == '=') {
                t.value = type(*s.value, f);
            } else {
                auto v = leaf(TExpr::Op::Var, s.target, f);
                out_.vars_read.insert(s.target);
                t.value = binary(s.op == '+' ? TExpr::Op::Add : TExpr::Op::Sub, f, std::move(v), type(*s.value, f));
            }
            out_.vars_written.insert(s.target);
            break;
        }
        case Stmt::Kind::If: {
            t.kind = TStmt::Kind::If;
            auto f = natural(*s.cond_lhs);
            if (!f) f = natural(*s.cond_rhs);
            if (!f) throw TypeError(fmt::format("line {}: cannot infer the format of a comparison", s.line));
            t.cmp = s.cmp;
            t.lhs = type(*s.cond_lhs, *f);
            t.rhs = type(*s.cond_rhs, *f);
            t.then_body = block(s.then_body);
            t.else_body = block(s.else_body);
            break;
        }
        }
        return t;
    }

    std::optional<QFormat> natural(const Expr& e) {
        switch (e.kind) {
        case Expr::Kind::Number: return std::nullopt;
        case Expr::Kind::Name: {
            if (auto p = env_.params.find(e.name); p != env_.params.end()) return p->second.format;
            if (auto v = env_.vars.find(e.name); v != env_.vars.end()) return v->second;
            throw TypeError("unresolved identifier " + e.name);
        }
        case Expr::Kind::Neg: return natural(*e.lhs);
        case Expr::Kind::Add:
        case Expr::Kind::Sub: {
            auto f = natural(*e.lhs);
            return f ? f : natural(*e.rhs);
        }
        case Expr::Kind::Mul: return std::nullopt;
        }
        return std::nullopt;
    }

    std::unique_ptr<TExpr> leaf(TExpr::Op op, const std::string& name, QFormat f) {
        auto t = std::make_unique<TExpr>();
        t->op = op;
        t->name = name;
        t->format = f;
        return t;
    }

    std::unique_ptr<TExpr> constant(double x, QFormat f, const Expr* at) {
        auto t = std::make_unique<TExpr>();
        t->op = TExpr::Op::Const;
        t->format = f;
        bool clamped = false;
        t->value = quantize(x, f, &clamped).raw;
        if (clamped)
            out_.warnings.push_back(fmt::format("{}literal {} clamped to {}", at ? fmt::format("line {}: ", at->line) : "", x, format_name(f)));
        return t;
    }

    std::unique_ptr<TExpr> binary(TExpr::Op op, QFormat f, std::unique_ptr<TExpr> a, std::unique_ptr<TExpr> b) {
        auto t = std::make_unique<TExpr>();
        t->op = op;
        t->format = f;
        t->saturate = f.saturating;
        t->a = std::move(a);
        t->b = std::move(b);
        return t;
    }

    std::unique_ptr<TExpr> convert(std::unique_ptr<TExpr> e, QFormat want) {
        const int from = e->format.frac_bits, to = want.frac_bits;
        if (from == to) {
            e->format = want;
            return e;
        }
        auto t = std::make_unique<TExpr>();
        t->op = from > to ? TExpr::Op::Shr : TExpr::Op::Shl;
        t->shift = std::abs(from - to);
        t->format = want;
        t->a = std::move(e);
        return t;
    }

    std::unique_ptr<TExpr> type(const Expr& e, std::optional<QFormat> want) {
        switch (e.kind) {
        case Expr::Kind::Number:
            if (!want) throw TypeError(fmt::format("line {}: cannot infer the format of literal {}", e.line, e.number));
            return constant(e.number, *want, &e);
        case Expr::Kind::Name: {
            std::unique_ptr<TExpr> t;
            if (auto p = env_.params.find(e.name); p != env_.params.end()) {
                t = constant(p->second.value, p->second.format, nullptr);
                t->op = TExpr::Op::Param;
                t->name = e.name;
            } else if (auto v = env_.vars.find(e.name); v != env_.vars.end()) {
                t = leaf(TExpr::Op::Var, e.name, v->second);
                out_.vars_read.insert(e.name);
            } else {
                throw TypeError("unresolved identifier " + e.name);
            }
            return want ? convert(std::move(t), *want) : std::move(t);
        }
        case Expr::Kind::Neg: {
            auto f = want ? want : natural(e);
            if (!f) throw TypeError(fmt::format("line {}: cannot infer the format of a negation", e.line));
            auto zero = constant(0, *f, &e);
            return binary(TExpr::Op::Sub, *f, std::move(zero), type(*e.lhs, *f));
        }
        case Expr::Kind::Add:
        case Expr::Kind::Sub: {
            auto f = want ? want : natural(e);
            if (!f) throw TypeError(fmt::format("line {}: cannot infer the format of a sum", e.line));
            auto a = type(*e.lhs, *f);
            auto b = type(*e.rhs, *f);
            return binary(e.kind == Expr::Kind::Add ? TExpr::Op::Add : TExpr::Op::Sub, *f, std::move(a), std::move(b));
        }
        case Expr::Kind::Mul: {
            auto fa = natural(*e.lhs);
            auto fb = natural(*e.rhs);
            if (!fa) fa = fb ? fb : want;
            if (!fb) fb = fa;
            if (!fa || !want) throw TypeError(fmt::format("line {}: cannot infer the format of a product", e.line));
            auto a = type(*e.lhs, *fa);
            auto b = type(*e.rhs, *fb);
            auto t = binary(TExpr::Op::Mul, *want, std::move(a), std::move(b));
            t->shift = fa->frac_bits + fb->frac_bits - want->frac_bits;
            if (t->shift < 0 || t->shift > 15)
                throw TypeError(fmt::format("line {}: required shift {} outside [0, 15]", e.line, t->shift));
            return t;
        }
        }
        throw TypeError("bad expression");
    }

    const Env& env_;
    TypedProgram& out_;
};

} // namespace

TypedProgram typecheck(const Program& program, const Env& env) {
    TypedProgram out;
    out.rounding = program.rounding;
    Checker c(env, out);
    out.stmts = c.block(program.stmts);
    return out;
}

// ---- code generation ----------------------------------------------------

namespace {

const char* round_suffix(RoundMode m) {
    switch (m) {
    case RoundMode::ToZero: return "";
    case RoundMode::ToNearest: return ".rn";
    case RoundMode::Stochastic: return ".rs";
    }
    return "";
}

const char* test_op(Cmp c, bool& swap) {
    swap = c == Cmp::Gt || c == Cmp::Le;
    switch (c) {
    case Cmp::Eq: return "vteq";
    case Cmp::Ne: return "vtne";
    case Cmp::Lt: case Cmp::Gt: return "vtlt";
    case Cmp::Ge: case Cmp::Le: return "vtge";
    }
    return "vteq";
}

// Instruction with virtual vector registers in {d} {a} {b}.
struct Ins {
    std::string text;
    int d = -1, a = -1, b = -1;
    bool d_read = false;
};

void collect_masked_writes(const std::vector<TStmt>& stmts, bool masked, std::set<std::string>& out) {
    for (const auto& s : stmts) {
        if (s.kind == TStmt::Kind::Assign && masked) out.insert(s.target);
        if (s.kind == TStmt::Kind::If) {
            collect_masked_writes(s.then_body, true, out);
            collect_masked_writes(s.else_body, true, out);
        }
    }
}

class Generator {
public:
    Generator(const TypedProgram& p, const std::string& name, const CodegenLayout& L) : p_(p), name_(name), L_(L) {
        for (const char* r : {"a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7", "t0", "t1", "t2", "t3", "t4", "t5", "t6",
                              "s0", "s1", "s2", "s3", "s4", "s6", "s7", "s8", "s9", "gp", "tp"})
            pool_.push_back(r);
        std::reverse(pool_.begin(), pool_.end());
    }

    std::string run() {
        if (p_.stmts.empty()) return fmt::format("{}:\n  ret\n", name_);
        if (L_.n <= 0) throw CompileError("empty population");
        const int vectors = (L_.n + 31) / 32;

        std::set<std::string> masked;
        collect_masked_writes(p_.stmts, false, masked);
        std::set<std::string> used = p_.vars_read;
        used.insert(p_.vars_written.begin(), p_.vars_written.end());
        std::string setup;
        for (const auto& v : used) {
            auto it = L_.vars.find(v);
            if (it == L_.vars.end()) throw CompileError("no placement for variable " + v);
            Var var{it->second, sreg(), -1, -1};
            const auto& pl = var.place;
            if (pl.kind == kernels::Placement::Kind::Vmem && pl.base % 64) throw CompileError("variable " + v + " is not 64-byte aligned");
            if (pl.kind == kernels::Placement::Kind::DelayLlm) {
                const std::string tmp = sreg();
                setup += fmt::format("  andi {0}, s11, {1}\n  li {2}, {3}\n  add {0}, {0}, {2}\n", var.ptr, (1 << pl.delay_bits) - 1, tmp, pl.base);
                release(tmp);
            } else {
                setup += fmt::format("  li {}, {}\n", var.ptr, pl.base);
            }
            vars_.emplace(v, var);
        }
        for (const auto& e : p_.events) {
            auto it = L_.events.find(e);
            if (it == L_.events.end()) throw CompileError("no bitfield for event " + e);
            Event ev{sreg(), sreg(), it->second};
            setup += fmt::format("  li {}, {}\n", ev.ptr, ev.base);
            events_.emplace(e, ev);
        }
        const std::string count = sreg();
        setup += fmt::format("  li {}, {}\n", count, vectors);

        // loop body
        for (auto& [name, var] : vars_) {
            if (!p_.vars_read.contains(name) && !masked.contains(name)) continue;
            load(var);
        }
        for (auto& [name, ev] : events_) body_.push_back({fmt::format("  li {}, 0", ev.acc)});
        for (const auto& s : p_.stmts) statement(s, "");
        for (auto& [name, var] : vars_) {
            if (!p_.vars_written.contains(name)) continue;
            store(var);
        }
        for (auto& [name, ev] : events_) body_.push_back({fmt::format("  sw {}, 0({})", ev.acc, ev.ptr)});
        for (auto& [name, var] : vars_) {
            const int step = var.place.kind == kernels::Placement::Kind::Vmem ? 64
                             : var.place.kind == kernels::Placement::Kind::Llm ? 1
                                                                                : 1 << var.place.delay_bits;
            body_.push_back({fmt::format("  addi {0}, {0}, {1}", var.ptr, step)});
        }
        for (auto& [name, ev] : events_) body_.push_back({fmt::format("  addi {0}, {0}, 4", ev.ptr)});
        body_.push_back({fmt::format("  addi {0}, {0}, -1", count)});
        body_.push_back({fmt::format("  bnez {}, {}_loop", count, name_)});

        std::string tail;
        if (L_.n % 32) {
            const auto mask = static_cast<std::int32_t>((1u << (L_.n % 32)) - 1u);
            for (auto& [name, ev] : events_)
                tail += fmt::format("  lw {0}, -4({1})\n  li {2}, {3}\n  and {0}, {0}, {2}\n  sw {0}, -4({1})\n", ev.acc, ev.ptr, count, mask);
        }
        tail += "  ret\n";

        allocate();
        std::string out = fmt::format("{}:\n", name_) + setup;
        for (const auto& i : pre_) out += render(i) + "\n";
        out += fmt::format("{}_loop:\n", name_);
        for (const auto& i : body_) out += render(i) + "\n";
        return out + tail;
    }

private:
    struct Var {
        kernels::Placement place;
        std::string ptr;
        int reg = -1;  // value
        int addr = -1; // lane-local address vector
    };
    struct Event {
        std::string ptr, acc;
        std::uint32_t base;
    };

    std::string sreg() {
        if (pool_.empty()) throw CompileError("out of scalar registers");
        auto r = pool_.back();
        pool_.pop_back();
        return r;
    }
    void release(const std::string& r) { pool_.push_back(r); }
    int vreg() { return next_++; }

    void load(Var& v) {
        v.reg = vreg();
        if (v.place.kind == kernels::Placement::Kind::Vmem) {
            body_.push_back({fmt::format("  vload.v {{d}}, 0({})", v.ptr), v.reg});
        } else {
            address(v);
            body_.push_back({"  vload.l {d}, 0({a})", v.reg, v.addr});
        }
    }

    void address(Var& v) {
        if (v.addr >= 0) return;
        v.addr = vreg();
        body_.push_back({fmt::format("  vfill {{d}}, {}", v.ptr), v.addr});
    }

    void store(Var& v) {
        if (v.place.kind == kernels::Placement::Kind::Vmem) {
            body_.push_back({fmt::format("  vstore.v {{b}}, 0({})", v.ptr), -1, -1, v.reg});
        } else {
            address(v);
            body_.push_back({"  vstore.l {b}, 0({a})", -1, v.addr, v.reg});
        }
    }

    int hoisted(const TExpr& e) {
        const std::string key = e.op == TExpr::Op::Param ? "p:" + e.name : fmt::format("c:{}", e.value);
        if (auto it = consts_.find(key); it != consts_.end()) return it->second;
        const int r = vreg();
        pre_.push_back({fmt::format("  vlui {{d}}, {}", static_cast<std::uint16_t>(e.value)), r});
        consts_.emplace(key, r);
        return r;
    }

    // Value of `e` in a register; `dest` names the register the root should write.
    int value(const TExpr& e, int dest = -1) {
        switch (e.op) {
        case TExpr::Op::Const:
        case TExpr::Op::Param:
            if (dest >= 0) {
                body_.push_back({fmt::format("  vlui {{d}}, {}", static_cast<std::uint16_t>(e.value)), dest});
                return dest;
            }
            return hoisted(e);
        case TExpr::Op::Var: {
            const int r = vars_.at(e.name).reg;
            if (r < 0) throw CompileError("variable " + e.name + " read before it has a value");
            if (dest >= 0 && dest != r) {
                body_.push_back({"  vsli {d}, {a}, 0", dest, r});
                return dest;
            }
            return r;
        }
        case TExpr::Op::Add:
        case TExpr::Op::Sub: {
            const int a = value(*e.a), b = value(*e.b);
            const int d = dest >= 0 ? dest : vreg();
            const char* op = e.op == TExpr::Op::Add ? "vadd" : "vsub";
            body_.push_back({fmt::format("  {}{} {{d}}, {{a}}, {{b}}", op, e.saturate ? ".s" : ""), d, a, b});
            return d;
        }
        case TExpr::Op::Mul: {
            const int a = value(*e.a), b = value(*e.b);
            const int d = dest >= 0 ? dest : vreg();
            body_.push_back({fmt::format("  vmul{} {{d}}, {{a}}, {{b}}, {}", round_suffix(p_.rounding), e.shift), d, a, b});
            return d;
        }
        case TExpr::Op::Shl:
        case TExpr::Op::Shr: {
            const int a = value(*e.a);
            const int d = dest >= 0 ? dest : vreg();
            if (e.op == TExpr::Op::Shl) body_.push_back({fmt::format("  vsli {{d}}, {{a}}, {}", e.shift), d, a});
            else body_.push_back({fmt::format("  vsri{} {{d}}, {{a}}, {}", round_suffix(p_.rounding), e.shift), d, a});
            return d;
        }
        }
        throw CompileError("bad expression");
    }

    void statement(const TStmt& s, const std::string& mask) {
        switch (s.kind) {
        case TStmt::Kind::Emit: {
            auto& ev = events_.at(s.target);
            if (mask.empty()) body_.push_back({fmt::format("  li {}, -1", ev.acc)});
            else body_.push_back({fmt::format("  or {0}, {0}, {1}", ev.acc, mask)});
            break;
        }
        case TStmt::Kind::Assign: {
            auto& var = vars_.at(s.target);
            if (mask.empty()) {
                if (var.reg < 0) var.reg = vreg();
                value(*s.value, var.reg);
            } else {
                const int t = value(*s.value);
                body_.push_back({fmt::format("  vsel {{d}}, {}, {{a}}", mask), var.reg, t, -1, true});
            }
            break;
        }
        case TStmt::Kind::If: {
            const int a = value(*s.lhs), b = value(*s.rhs);
            bool swap = false;
            const char* op = test_op(s.cmp, swap);
            const std::string m = sreg();
            body_.push_back({fmt::format("  {} {}, {{a}}, {{b}}", op, m), -1, swap ? b : a, swap ? a : b});
            if (!mask.empty()) body_.push_back({fmt::format("  and {0}, {0}, {1}", m, mask)});
            for (const auto& t : s.then_body) statement(t, m);
            if (!s.else_body.empty()) {
                // lanes active outside but not taking the branch
                if (mask.empty()) {
                    body_.push_back({fmt::format("  not {0}, {0}", m)});
                } else {
                    body_.push_back({fmt::format("  xor {0}, {0}, {1}", m, mask)});
                }
                for (const auto& t : s.else_body) statement(t, m);
            }
            release(m);
            break;
        }
        }
    }

    // Linear scan over live intervals of the virtual registers. Values defined
    // before the loop stay live until its end.
    void allocate() {
        const int total = static_cast<int>(pre_.size() + body_.size());
        const int loop_start = static_cast<int>(pre_.size());
        std::vector<int> start(static_cast<std::size_t>(next_), -1), end(static_cast<std::size_t>(next_), -1);
        auto touch = [&](int v, int pos) {
            if (v < 0) return;
            auto& s = start[static_cast<std::size_t>(v)];
            if (s < 0) s = pos;
            end[static_cast<std::size_t>(v)] = std::max(end[static_cast<std::size_t>(v)], pos);
        };
        for (int k = 0; k < total; ++k) {
            const Ins& i = k < loop_start ? pre_[static_cast<std::size_t>(k)] : body_[static_cast<std::size_t>(k - loop_start)];
            touch(i.a, k);
            touch(i.b, k);
            touch(i.d, k);
        }
        for (int v = 0; v < next_; ++v)
            if (start[static_cast<std::size_t>(v)] >= 0 && start[static_cast<std::size_t>(v)] < loop_start) end[static_cast<std::size_t>(v)] = total;

        std::vector<int> order;
        for (int v = 0; v < next_; ++v)
            if (start[static_cast<std::size_t>(v)] >= 0) order.push_back(v);
        std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return start[static_cast<std::size_t>(x)] < start[static_cast<std::size_t>(y)]; });
        phys_.assign(static_cast<std::size_t>(next_), -1);
        std::vector<int> free_regs;
        for (int r = 31; r >= 1; --r) free_regs.push_back(r);
        std::vector<int> active;
        for (int v : order) {
            const int s = start[static_cast<std::size_t>(v)];
            for (auto it = active.begin(); it != active.end();) {
                if (end[static_cast<std::size_t>(*it)] < s) {
                    free_regs.push_back(phys_[static_cast<std::size_t>(*it)]);
                    it = active.erase(it);
                } else {
                    ++it;
                }
            }
            if (free_regs.empty()) throw CompileError("register pressure: more than 31 live vector values");
            phys_[static_cast<std::size_t>(v)] = free_regs.back();
            free_regs.pop_back();
            active.push_back(v);
        }
    }

    std::string render(const Ins& i) const {
        std::string s = i.text;
        auto sub = [&](const char* ph, int v) {
            if (v < 0) return;
            const auto pos = s.find(ph);
            if (pos != std::string::npos) s.replace(pos, 3, fmt::format("v{}", phys_[static_cast<std::size_t>(v)]));
        };
        sub("{d}", i.d);
        sub("{a}", i.a);
        sub("{b}", i.b);
        return s;
    }

    const TypedProgram& p_;
    std::string name_;
    const CodegenLayout& L_;
    std::vector<std::string> pool_;
    std::map<std::string, Var> vars_;
    std::map<std::string, Event> events_;
    std::map<std::string, int> consts_;
    std::vector<Ins> pre_, body_;
    int next_ = 0;
    std::vector<int> phys_;
};

} // namespace

std::string codegen(const TypedProgram& program, const std::string& name, const CodegenLayout& layout) {
    return Generator(program, name, layout).run();
}

std::string compile(std::string_view code, const Env& env, const std::string& name, const CodegenLayout& layout) {
    return codegen(typecheck(parse(code), env), name, layout);
}

// ---- interpreter --------------------------------------------------------

namespace {

using Lanes = std::array<std::int16_t, kLanes>;

struct Interp {
    const TypedProgram& p;
    std::map<std::string, Lanes> vars;
    std::map<std::string, std::uint32_t> events;
    LaneStates* rng;

    std::uint16_t draw(int lane) {
        if (!rng) return 0;
        auto& st = (*rng)[static_cast<std::size_t>(lane)];
        const auto r = rng_next(st);
        st = r.next;
        return vrng_value(r.value);
    }

    Lanes eval(const TExpr& e) {
        Lanes r{};
        switch (e.op) {
        case TExpr::Op::Const:
        case TExpr::Op::Param: r.fill(e.value); break;
        case TExpr::Op::Var: r = vars.at(e.name); break;
        case TExpr::Op::Add:
        case TExpr::Op::Sub: {
            const Lanes a = eval(*e.a), b = eval(*e.b);
            for (int l = 0; l < kLanes; ++l)
                r[l] = (e.op == TExpr::Op::Add ? sat_add(Fx16(a[l]), Fx16(b[l]), e.saturate) : sat_sub(Fx16(a[l]), Fx16(b[l]), e.saturate)).raw;
            break;
        }
        case TExpr::Op::Mul: {
            const Lanes a = eval(*e.a), b = eval(*e.b);
            const bool st = p.rounding == RoundMode::Stochastic;
            for (int l = 0; l < kLanes; ++l) r[l] = mul_shift(Fx16(a[l]), Fx16(b[l]), e.shift, p.rounding, st ? draw(l) : 0).raw;
            break;
        }
        case TExpr::Op::Shl: {
            const Lanes a = eval(*e.a);
            for (int l = 0; l < kLanes; ++l) r[l] = wrap16(std::int64_t{a[l]} << e.shift);
            break;
        }
        case TExpr::Op::Shr: {
            const Lanes a = eval(*e.a);
            const bool st = p.rounding == RoundMode::Stochastic;
            for (int l = 0; l < kLanes; ++l) r[l] = shift_right_round(Fx16(a[l]), e.shift, p.rounding, st ? draw(l) : 0).raw;
            break;
        }
        }
        return r;
    }

    void run(const std::vector<TStmt>& stmts, std::uint32_t mask) {
        for (const auto& s : stmts) {
            switch (s.kind) {
            case TStmt::Kind::Emit: events[s.target] |= mask; break;
            case TStmt::Kind::Assign: {
                const Lanes v = eval(*s.value);
                auto& dst = vars[s.target];
                for (int l = 0; l < kLanes; ++l)
                    if (mask >> l & 1u) dst[l] = v[l];
                break;
            }
            case TStmt::Kind::If: {
                const Lanes a = eval(*s.lhs), b = eval(*s.rhs);
                std::uint32_t c = 0;
                for (int l = 0; l < kLanes; ++l) {
                    bool t = false;
                    switch (s.cmp) {
                    case Cmp::Eq: t = a[l] == b[l]; break;
                    case Cmp::Ne: t = a[l] != b[l]; break;
                    case Cmp::Lt: t = a[l] < b[l]; break;
                    case Cmp::Le: t = a[l] <= b[l]; break;
                    case Cmp::Gt: t = a[l] > b[l]; break;
                    case Cmp::Ge: t = a[l] >= b[l]; break;
                    }
                    if (t) c |= 1u << l;
                }
                run(s.then_body, mask & c);
                if (!s.else_body.empty()) run(s.else_body, mask & ~c);
                break;
            }
            }
        }
    }
};

} // namespace

void interpret(const TypedProgram& program, int n, std::map<std::string, std::vector<std::int16_t>>& vars,
               std::map<std::string, std::vector<std::uint32_t>>& events, LaneStates* rng) {
    const int vectors = (n + 31) / 32;
    for (const auto& e : program.events) events[e].assign(static_cast<std::size_t>(vectors), 0);
    if (program.stmts.empty()) return;
    for (int k = 0; k < vectors; ++k) {
        Interp in{program, {}, {}, rng};
        for (auto& [name, arr] : vars) {
            if (arr.size() < static_cast<std::size_t>(vectors) * 32) arr.resize(static_cast<std::size_t>(vectors) * 32);
            std::copy_n(arr.begin() + k * 32, kLanes, in.vars[name].begin());
        }
        for (const auto& e : program.events) in.events[e] = 0;
        in.run(program.stmts, 0xFFFFFFFFu);
        for (auto& [name, arr] : vars) std::copy_n(in.vars[name].begin(), kLanes, arr.begin() + k * 32);
        for (const auto& e : program.events) {
            std::uint32_t w = in.events[e];
            if (k == vectors - 1 && n % 32) w &= (1u << (n % 32)) - 1u;
            events[e][static_cast<std::size_t>(k)] = w;
        }
    }
}

} // namespace fenn::dsl
