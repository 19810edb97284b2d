// SPDX-License-Identifier: Apache-2.0
#include "fenn/oracle.hpp"

#include <fmt/format.h>

namespace fenn::oracle {

using kernels::Encoding;
using net::Model;
using net::SpikeTrain;

namespace {

const SpikeTrain* source_train(const std::string& name, const std::map<std::string, SpikeTrain>& produced,
                               const std::map<std::string, SpikeTrain>& inputs) {
    if (auto it = produced.find(name); it != produced.end()) return &it->second;
    if (auto it = inputs.find(name); it != inputs.end()) return &it->second;
    return nullptr;
}

// Calls f(src) for every source spiking at t: words ascending, bits descending.
template <class F>
void for_each_spike(const SpikeTrain* s, int t, int shape, F&& f) {
    if (!s || t >= s->timesteps()) return;
    const auto& words = s->steps[static_cast<std::size_t>(t)];
    for (std::size_t w = 0; w < words.size(); ++w)
        for (int b = 31; b >= 0; --b) {
            const int src = static_cast<int>(w) * 32 + b;
            if ((words[w] >> b & 1u) && src < shape) f(src);
        }
}

Matrix16 weights_of(const net::Connection& c) {
    return c.weights.data.empty() ? decode_rows(c.rows) : c.weights;
}

std::pair<std::string, std::string> split_key(const std::string& key) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) throw net::ModelError("record key " + key + " is not pop.var");
    return {key.substr(0, dot), key.substr(dot + 1)};
}

} // namespace

Outputs golden(Model model, const std::map<std::string, SpikeTrain>& inputs, const net::RunOptions& opt, DelayModel mode) {
    net::encode(model);
    net::validate(model);
    const int T = opt.steps;
    using Key = std::pair<std::string, std::string>;

    std::map<std::string, dsl::TypedProgram> programs;
    std::map<std::string, std::map<std::string, std::vector<std::int16_t>>> vars;
    for (const auto& p : model.populations) {
        programs.emplace(p.name, dsl::typecheck(dsl::parse(p.kernel), net::kernel_env(p)));
        for (const auto& [name, v] : p.vars) {
            auto& arr = vars[p.name][name];
            arr.assign(static_cast<std::size_t>(pad32(p.shape)), 0);
            if (!v.init_raw.empty()) std::copy(v.init_raw.begin(), v.init_raw.end(), arr.begin());
            else std::fill_n(arr.begin(), p.shape, quantize(v.init, v.format).raw);
        }
    }
    std::map<Key, int> n_delay;
    std::vector<Matrix16> weights;
    for (const auto& c : model.connections) {
        if (c.encoding == Encoding::Delayed) n_delay[{c.dst, c.target}] = c.n_delay;
        weights.push_back(weights_of(c));
    }
    std::map<Key, std::vector<std::int16_t>> ring; // neuron-major, n_delay slots each
    std::map<Key, std::map<int, std::vector<std::pair<int, std::int16_t>>>> pending;
    for (const auto& [k, nd] : n_delay) ring[k].assign(static_cast<std::size_t>(vars[k.first][k.second].size()) * static_cast<std::size_t>(nd), 0);

    Outputs out;
    for (const auto& p : model.populations) out.spikes[p.name] = net::make_train(p.shape, T);
    LaneStates rng = net::lane_seeds(opt.seed);

    for (int t = 0; t < T; ++t) {
        // delayed inputs due now
        for (const auto& [k, nd] : n_delay) {
            auto& cur = vars[k.first][k.second];
            if (mode == DelayModel::Ring) {
                const auto& r = ring[k];
                for (std::size_t j = 0; j < cur.size(); ++j) cur[j] = r[j * static_cast<std::size_t>(nd) + static_cast<std::size_t>(t % nd)];
            } else {
                std::fill(cur.begin(), cur.end(), 0);
                const bool sat = model.population(k.first)->vars.at(k.second).format.saturating;
                auto& due = pending[k];
                if (auto it = due.find(t); it != due.end()) {
                    for (const auto& [j, w] : it->second)
                        cur[static_cast<std::size_t>(j)] = sat_add(Fx16(cur[static_cast<std::size_t>(j)]), Fx16(w), sat).raw;
                    due.erase(it);
                }
            }
        }
        for (const auto& key : opt.record) {
            const auto [pop, var] = split_key(key);
            const auto& arr = vars.at(pop).at(var);
            out.records[key].emplace_back(arr.begin(), arr.begin() + model.population(pop)->shape);
        }
        for (const auto& p : model.populations) {
            std::map<std::string, std::vector<std::uint32_t>> events;
            dsl::interpret(programs.at(p.name), p.shape, vars[p.name], events, &rng);
            out.spikes[p.name].steps[static_cast<std::size_t>(t)] = events.count(p.event) ? events[p.event]
                                                                                       : std::vector<std::uint32_t>(static_cast<std::size_t>((p.shape + 31) / 32));
        }
        for (const auto& [k, nd] : n_delay) {
            if (mode != DelayModel::Ring) continue;
            const auto& cur = vars[k.first][k.second];
            auto& r = ring[k];
            for (std::size_t j = 0; j < cur.size(); ++j) r[j * static_cast<std::size_t>(nd) + static_cast<std::size_t>(t % nd)] = cur[j];
        }
        for (std::size_t ci = 0; ci < model.connections.size(); ++ci) {
            const auto& c = model.connections[ci];
            const Matrix16& w = weights[ci];
            const Key k{c.dst, c.target};
            const int shape = model.source_shape(c.src);
            for_each_spike(source_train(c.src, out.spikes, inputs), t, shape, [&](int src) {
                for (int j = 0; j < w.cols; ++j) {
                    const std::int16_t x = w.at(src, j);
                    if (x == 0) continue;
                    if (c.encoding != Encoding::Delayed) {
                        auto& y = vars[c.dst][c.target][static_cast<std::size_t>(j)];
                        y = sat_add(Fx16(y), Fx16(x), c.format.saturating).raw;
                        continue;
                    }
                    const int d = c.delays.data.empty() ? 0 : c.delays.at(src, j);
                    if (mode == DelayModel::Ring) {
                        auto& y = ring[k][static_cast<std::size_t>(j * c.n_delay + (t + 1 + d) % c.n_delay)];
                        y = sat_add(Fx16(y), Fx16(x), c.format.saturating).raw;
                    } else {
                        pending[k][t + 1 + d].emplace_back(j, x);
                    }
                }
            });
        }
    }
    return out;
}

// ---- double precision ---------------------------------------------------

namespace {

struct RealKernel {
    const dsl::Program& prog;
    const net::Population& pop;
    std::map<std::string, std::vector<double>>& vars;
    std::vector<std::uint32_t>& spikes;
    int n = 0;

    double eval(const dsl::Expr& e) const {
        switch (e.kind) {
        case dsl::Expr::Kind::Number: return e.number;
        case dsl::Expr::Kind::Name:
            if (auto p = pop.params.find(e.name); p != pop.params.end()) return p->second.value;
            return vars.at(e.name)[static_cast<std::size_t>(n)];
        case dsl::Expr::Kind::Neg: return -eval(*e.lhs);
        case dsl::Expr::Kind::Add: return eval(*e.lhs) + eval(*e.rhs);
        case dsl::Expr::Kind::Sub: return eval(*e.lhs) - eval(*e.rhs);
        case dsl::Expr::Kind::Mul: return eval(*e.lhs) * eval(*e.rhs);
        }
        return 0;
    }

    void run(const std::vector<dsl::Stmt>& stmts) {
        for (const auto& s : stmts) {
            switch (s.kind) {
            case dsl::Stmt::Kind::Emit:
                if (s.target == pop.event) spikes[static_cast<std::size_t>(n / 32)] |= 1u << (n % 32);
                break;
            case dsl::Stmt::Kind::Assign: {
                const double v = eval(*s.value);
                auto& dst = vars.at(s.target)[static_cast<std::size_t>(n)];
                dst = s.op == '=' ? v : s.op == '+' ? dst + v : dst - v;
                break;
            }
            case dsl::Stmt::Kind::If: {
                const double a = eval(*s.cond_lhs), b = eval(*s.cond_rhs);
                bool c = false;
                switch (s.cmp) {
                case dsl::Cmp::Eq: c = a == b; break;
                case dsl::Cmp::Ne: c = a != b; break;
                case dsl::Cmp::Lt: c = a < b; break;
                case dsl::Cmp::Le: c = a <= b; break;
                case dsl::Cmp::Gt: c = a > b; break;
                case dsl::Cmp::Ge: c = a >= b; break;
                }
                run(c ? s.then_body : s.else_body);
                break;
            }
            }
        }
    }
};

} // namespace

RealOutputs reference(Model model, const std::map<std::string, SpikeTrain>& inputs, const net::RunOptions& opt) {
    net::encode(model);
    net::validate(model);
    const int T = opt.steps;
    using Key = std::pair<std::string, std::string>;

    std::map<std::string, dsl::Program> programs;
    std::map<std::string, std::map<std::string, std::vector<double>>> vars;
    for (const auto& p : model.populations) {
        programs.emplace(p.name, dsl::parse(p.kernel));
        for (const auto& [name, v] : p.vars) {
            auto& arr = vars[p.name][name];
            arr.assign(static_cast<std::size_t>(p.shape), v.init);
            for (std::size_t j = 0; j < v.init_raw.size(); ++j) arr[j] = to_double(Fx16(v.init_raw[j]), v.format);
        }
    }
    std::map<Key, int> n_delay;
    std::vector<Matrix16> weights;
    for (const auto& c : model.connections) {
        if (c.encoding == Encoding::Delayed) n_delay[{c.dst, c.target}] = c.n_delay;
        weights.push_back(weights_of(c));
    }
    std::map<Key, std::vector<double>> ring;
    for (const auto& [k, nd] : n_delay) ring[k].assign(vars[k.first][k.second].size() * static_cast<std::size_t>(nd), 0.0);

    RealOutputs out;
    for (const auto& p : model.populations) out.spikes[p.name] = net::make_train(p.shape, T);
    for (int t = 0; t < T; ++t) {
        for (const auto& [k, nd] : n_delay) {
            auto& cur = vars[k.first][k.second];
            for (std::size_t j = 0; j < cur.size(); ++j) cur[j] = ring[k][j * static_cast<std::size_t>(nd) + static_cast<std::size_t>(t % nd)];
        }
        for (const auto& key : opt.record) {
            const auto [pop, var] = split_key(key);
            out.records[key].push_back(vars.at(pop).at(var));
        }
        for (const auto& p : model.populations) {
            auto& words = out.spikes[p.name].steps[static_cast<std::size_t>(t)];
            RealKernel k{programs.at(p.name), p, vars[p.name], words};
            for (k.n = 0; k.n < p.shape; ++k.n) k.run(k.prog.stmts);
        }
        for (const auto& [k, nd] : n_delay) {
            const auto& cur = vars[k.first][k.second];
            for (std::size_t j = 0; j < cur.size(); ++j) ring[k][j * static_cast<std::size_t>(nd) + static_cast<std::size_t>(t % nd)] = cur[j];
        }
        for (std::size_t ci = 0; ci < model.connections.size(); ++ci) {
            const auto& c = model.connections[ci];
            const Matrix16& w = weights[ci];
            const double scale = 1.0 / static_cast<double>(1 << c.format.frac_bits);
            const int shape = model.source_shape(c.src);
            const int n_dst = model.population(c.dst)->shape;
            for_each_spike(source_train(c.src, out.spikes, inputs), t, shape, [&](int src) {
                for (int j = 0; j < n_dst; ++j) {
                    const double x = w.at(src, j) * scale;
                    if (x == 0) continue;
                    if (c.encoding != Encoding::Delayed) {
                        vars[c.dst][c.target][static_cast<std::size_t>(j)] += x;
                    } else {
                        const int d = c.delays.data.empty() ? 0 : c.delays.at(src, j);
                        ring[{c.dst, c.target}][static_cast<std::size_t>(j * c.n_delay + (t + 1 + d) % c.n_delay)] += x;
                    }
                }
            });
        }
    }
    return out;
}

std::string compare(const Outputs& a, const net::SimOutputs& b) {
    for (const auto& [name, train] : a.spikes) {
        auto it = b.spikes.find(name);
        if (it == b.spikes.end()) return "missing spikes of " + name;
        for (int t = 0; t < train.timesteps(); ++t)
            if (train.steps[static_cast<std::size_t>(t)] != it->second.steps[static_cast<std::size_t>(t)])
                return fmt::format("spikes of {} differ at step {}", name, t);
    }
    for (const auto& [key, rec] : a.records) {
        auto it = b.records.find(key);
        if (it == b.records.end()) return "missing record " + key;
        for (std::size_t t = 0; t < rec.size(); ++t)
            if (rec[t] != it->second[t]) return fmt::format("{} differs at step {}", key, t);
    }
    return {};
}

} // namespace fenn::oracle
