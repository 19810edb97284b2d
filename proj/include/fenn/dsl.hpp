// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fenn/fxp.hpp"
#include "fenn/kernels.hpp"
#include "fenn/prng.hpp"

namespace fenn::dsl {

struct SyntaxError : std::runtime_error {
    SyntaxError(int line, int col, const std::string& msg);
    int line, col;
};

struct TypeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CompileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- syntax -------------------------------------------------------------

struct Expr {
    enum class Kind : std::uint8_t { Number, Name, Neg, Add, Sub, Mul };
    Kind kind = Kind::Number;
    double number = 0;
    std::string name;
    std::unique_ptr<Expr> lhs, rhs;
    int line = 0, col = 0;
};

enum class Cmp : std::uint8_t { Eq, Ne, Lt, Le, Gt, Ge };

struct Stmt {
    enum class Kind : std::uint8_t { Assign, Emit, If };
    Kind kind = Kind::Assign;
    std::string target; // variable or event
    char op = '=';      // '=', '+', '-'
    std::unique_ptr<Expr> value;
    Cmp cmp = Cmp::Eq;
    std::unique_ptr<Expr> cond_lhs, cond_rhs;
    std::vector<Stmt> then_body, else_body;
    int line = 0, col = 0;
};

struct Program {
    std::vector<Stmt> stmts;
    RoundMode rounding = RoundMode::ToZero; // `#pragma round zero|nearest|stochastic`
};

Program parse(std::string_view code);

// ---- types --------------------------------------------------------------

struct Param {
    double value = 0;
    QFormat format;
};

struct Env {
    std::map<std::string, Param> params;
    std::map<std::string, QFormat> vars;
    std::set<std::string> events;
};

struct TExpr {
    enum class Op : std::uint8_t { Const, Param, Var, Add, Sub, Mul, Shl, Shr };
    Op op = Op::Const;
    QFormat format;
    std::int16_t value = 0; // Const / Param raw value
    std::string name;
    int shift = 0; // Mul result shift, Shl/Shr amount
    bool saturate = false;
    std::unique_ptr<TExpr> a, b;
};

struct TStmt {
    enum class Kind : std::uint8_t { Assign, Emit, If };
    Kind kind = Kind::Assign;
    std::string target;
    std::unique_ptr<TExpr> value;
    Cmp cmp = Cmp::Eq;
    std::unique_ptr<TExpr> lhs, rhs;
    std::vector<TStmt> then_body, else_body;
};

struct TypedProgram {
    std::vector<TStmt> stmts;
    RoundMode rounding = RoundMode::ToZero;
    std::vector<std::string> warnings;
    std::set<std::string> vars_read, vars_written, events;
};

TypedProgram typecheck(const Program& program, const Env& env);

// ---- code generation ----------------------------------------------------

struct CodegenLayout {
    int n = 0;
    std::map<std::string, kernels::Placement> vars;
    std::map<std::string, std::uint32_t> events; // dmem byte address of each bitfield
};

/// Emits a callable routine `name` looping over 32-neuron vectors.
std::string codegen(const TypedProgram& program, const std::string& name, const CodegenLayout& layout);

std::string compile(std::string_view code, const Env& env, const std::string& name, const CodegenLayout& layout);

// ---- reference interpreter ----------------------------------------------

/// Runs the typed program over every 32-neuron vector with the same
/// fixed-point operations as the generated code. Arrays are indexed by
/// neuron and padded to a multiple of 32; event bitfields get one word per
/// vector with the tail of the last word cleared. Stochastic rounding draws
/// from `rng` lane by lane in program order.
void interpret(const TypedProgram& program, int n, std::map<std::string, std::vector<std::int16_t>>& vars,
               std::map<std::string, std::vector<std::uint32_t>>& events, LaneStates* rng = nullptr);

} // namespace fenn::dsl
