#include "lrbp/lbp.hpp"

#include <cmath>
#include <span>
#include <string>

#include "lrbp/lowrank.hpp"
#include "parallel.hpp"

namespace lrbp {

namespace {

constexpr double kSignSlack = -1e-12;

std::string edge_name(const char* dir, int from, int to) {
    return std::string(dir) + " message " + std::to_string(from) + "->" + std::to_string(to);
}

void normalize_message(Vector& v, const std::string& what) {
    if (!v.allFinite()) throw NonFiniteError(what + ": non-finite entry");
    const double s = v.sum();
    if (s == 0.0) throw ZeroMassError(what + ": all-zero message");
    v /= s;
}

std::int64_t resolve_cap(std::int64_t cap) { return cap < 0 ? capacity_limit() : cap; }

Vector var_to_factor_from(const std::vector<Vector>& factor_to_var, const FactorGraph& g, int i, int a) {
    Vector m = g.unary_or_ones(i);
    for (const auto& inc : g.adjacency(i)) {
        if (inc.factor == a) continue;
        m.array() *= factor_to_var[static_cast<std::size_t>(g.edge(inc.factor, inc.slot))].array();
    }
    normalize_message(m, edge_name("variable-to-factor", i, a));
    return m;
}

template <typename E>
[[noreturn]] void rethrow_at(const E& e, int iteration) {
    throw E("iteration " + std::to_string(iteration) + ": " + e.what());
}

}  // namespace

const Vector& MessageState::to_factor(const FactorGraph& g, int i, int a) const {
    return var_to_factor[static_cast<std::size_t>(g.edge(a, slot_of(g, a, i)))];
}

const Vector& MessageState::to_var(const FactorGraph& g, int a, int i) const {
    return factor_to_var[static_cast<std::size_t>(g.edge(a, slot_of(g, a, i)))];
}

int slot_of(const FactorGraph& g, int a, int i) {
    if (a < 0 || a >= g.num_factors()) throw ValidationError("factor id " + std::to_string(a) + " out of range");
    const auto& scope = g.factor(a).scope;
    for (std::size_t k = 0; k < scope.size(); ++k) {
        if (scope[k] == i) return static_cast<int>(k);
    }
    throw ValidationError("variable " + std::to_string(i) + " is not in the scope of factor " + std::to_string(a));
}

MessageState init_messages(const FactorGraph& g) {
    const auto e = static_cast<std::size_t>(g.num_edges());
    const Vector uniform = Vector::Constant(g.cardinality(), 1.0 / g.cardinality());
    return MessageState{std::vector<Vector>(e, uniform), std::vector<Vector>(e, uniform)};
}

Vector var_to_factor_update(const MessageState& state, const FactorGraph& g, int i, int a) {
    slot_of(g, a, i);
    return var_to_factor_from(state.factor_to_var, g, i, a);
}

Vector factor_to_var_dense(const FactorGraph& g, const MessageState& state, int a, int i, std::int64_t cap) {
    const int slot = slot_of(g, a, i);
    const auto table = g.dense_payload(a, resolve_cap(cap));
    const auto first = static_cast<std::size_t>(g.edge(a, 0));
    const std::span<const Vector> incoming(state.var_to_factor.data() + first, static_cast<std::size_t>(g.arity(a)));
    Vector out = marginalize_product(table, incoming, slot);
    normalize_message(out, edge_name("factor-to-variable", a, i));
    return out;
}

Vector factor_to_var_lowrank(const FactorGraph& g, const MessageState& state, int a, int i, Diagnostics* diag) {
    const int slot = slot_of(g, a, i);
    const auto& f = g.low_rank(a);
    const auto first = static_cast<std::size_t>(g.edge(a, 0));
    const std::span<const Vector> incoming(state.var_to_factor.data() + first, static_cast<std::size_t>(g.arity(a)));
    Vector out = lowrank_message(f, incoming, slot);
    if (diag != nullptr && out.size() > 0 && out.minCoeff() < kSignSlack) ++diag->sign_violations;
    normalize_message(out, edge_name("factor-to-variable", a, i));
    return out;
}

GammaCache compute_gammas(const FactorGraph& g, const MessageState& state) {
    GammaCache cache;
    cache.gamma.resize(static_cast<std::size_t>(g.num_edges()));
    for (int a = 0; a < g.num_factors(); ++a) {
        if (!g.factor(a).is_low_rank()) continue;
        const auto& f = g.low_rank(a);
        for (int k = 0; k < g.arity(a); ++k) {
            const auto e = static_cast<std::size_t>(g.edge(a, k));
            cache.gamma[e] = f.weight(k).transpose() * state.var_to_factor[e];
        }
    }
    return cache;
}

std::vector<Vector> compute_beliefs(const FactorGraph& g, const MessageState& state) {
    std::vector<Vector> beliefs;
    beliefs.reserve(static_cast<std::size_t>(g.num_vars()));
    for (int i = 0; i < g.num_vars(); ++i) {
        Vector b = g.unary_or_ones(i);
        for (const auto& inc : g.adjacency(i)) {
            b.array() *= state.factor_to_var[static_cast<std::size_t>(g.edge(inc.factor, inc.slot))].array();
        }
        if (!b.allFinite()) throw NonFiniteError("belief " + std::to_string(i) + ": non-finite entry");
        const double s = b.sum();
        if (!(s > 0.0)) throw ZeroMassError("belief " + std::to_string(i) + ": zero total mass");
        beliefs.push_back(b / s);
    }
    return beliefs;
}

BeliefSet run_lbp(const FactorGraph& g, const LbpOptions& opts) { return run_lbp(g, opts, init_messages(g)); }

BeliefSet run_lbp(const FactorGraph& g, const LbpOptions& opts, MessageState state) {
    if (!(opts.tol > 0.0)) throw ValidationError("tol must be positive");
    if (!(opts.damping >= 0.0 && opts.damping < 1.0)) throw ValidationError("damping must lie in [0, 1)");
    if (opts.max_iters < 0) throw ValidationError("max_iters must be >= 0");
    if (opts.workers < 1) throw ValidationError("workers must be >= 1");
    const auto edges = static_cast<std::size_t>(g.num_edges());
    if (state.var_to_factor.size() != edges || state.factor_to_var.size() != edges) {
        throw ShapeError("initial message state does not match the graph's edge count");
    }

    const std::int64_t cap = resolve_cap(opts.capacity);
    const int workers = opts.workers;
    const double lambda = opts.damping;

    // Dense tables are materialized once; low-rank payloads never are.
    std::vector<DenseTensord> dense(static_cast<std::size_t>(g.num_factors()));
    for (int a = 0; a < g.num_factors(); ++a) {
        if (!g.factor(a).is_low_rank()) dense[static_cast<std::size_t>(a)] = g.dense_payload(a, cap);
    }

    std::vector<LowRankWorkspace<double>> ws(static_cast<std::size_t>(workers));
    std::vector<std::vector<Vector>> scratch(static_cast<std::size_t>(workers));
    std::vector<std::size_t> sign_hits(static_cast<std::size_t>(workers), 0);

    MessageState next = state;
    BeliefSet result;
    for (int t = 1; t <= opts.max_iters; ++t) {
        try {
            detail::parallel_for(g.num_vars(), workers, [&](int i, int) {
                for (const auto& inc : g.adjacency(i)) {
                    next.var_to_factor[static_cast<std::size_t>(g.edge(inc.factor, inc.slot))] =
                        var_to_factor_from(state.factor_to_var, g, i, inc.factor);
                }
            });

            detail::parallel_for(g.num_factors(), workers, [&](int a, int w) {
                const auto n = static_cast<std::size_t>(g.arity(a));
                const auto first = static_cast<std::size_t>(g.edge(a, 0));
                const std::span<const Vector> incoming(next.var_to_factor.data() + first, n);
                auto& out = scratch[static_cast<std::size_t>(w)];
                out.resize(n);
                const bool low_rank = g.factor(a).is_low_rank();
                if (low_rank) {
                    lowrank_sweep(g.low_rank(a), incoming, std::span<Vector>(out.data(), n),
                                  ws[static_cast<std::size_t>(w)]);
                } else {
                    for (std::size_t k = 0; k < n; ++k) {
                        out[k] = marginalize_product(dense[static_cast<std::size_t>(a)], incoming, static_cast<Index>(k));
                    }
                }
                for (std::size_t k = 0; k < n; ++k) {
                    Vector& m = out[k];
                    if (low_rank && m.minCoeff() < kSignSlack) ++sign_hits[static_cast<std::size_t>(w)];
                    normalize_message(m, edge_name("factor-to-variable", a, g.factor(a).scope[k]));
                    if (lambda != 0.0) {
                        m = (1.0 - lambda) * m + lambda * state.factor_to_var[first + k];
                        normalize_message(m, edge_name("factor-to-variable", a, g.factor(a).scope[k]));
                    }
                    next.factor_to_var[first + k] = m;
                }
            });
        } catch (const ZeroMassError& e) {
            rethrow_at(e, t);
        } catch (const NonFiniteError& e) {
            rethrow_at(e, t);
        }

        double delta = 0.0;
        for (std::size_t e = 0; e < edges; ++e) {
            delta = std::max(delta, (next.var_to_factor[e] - state.var_to_factor[e]).cwiseAbs().maxCoeff());
            delta = std::max(delta, (next.factor_to_var[e] - state.factor_to_var[e]).cwiseAbs().maxCoeff());
        }
        std::swap(state, next);

        std::size_t hits = 0;
        for (auto& h : sign_hits) {
            hits += h;
            h = 0;
        }
        if (hits > 0) {
            result.sign_warnings += hits;
            if (opts.warn) {
                opts.warn("iteration " + std::to_string(t) + ": " + std::to_string(hits) +
                          " low-rank message(s) had negative entries before normalization");
            }
        }

        result.iterations = t;
        result.final_delta = delta;
        if (opts.trace) opts.trace(t, delta);
        if (!std::isfinite(delta)) {
            throw NonFiniteError("iteration " + std::to_string(t) + ": non-finite message delta");
        }
        if (delta < opts.tol) {
            result.converged = true;
            break;
        }
    }

    result.beliefs = compute_beliefs(g, state);
    return result;
}

BeliefSet exact_marginals(const FactorGraph& g, std::int64_t cap) {
    const auto jt = joint_table(g, resolve_cap(cap));
    const int n = g.num_vars();
    const Index d = g.cardinality();
    std::vector<Vector> marg(static_cast<std::size_t>(n), Vector::Zero(d));
    std::vector<Index> x(static_cast<std::size_t>(n), 0);
    const auto& shape = jt.joint.shape();
    Index e = 0;
    do {
        const double p = jt.joint.data()[e++];
        for (int i = 0; i < n; ++i) marg[static_cast<std::size_t>(i)][x[static_cast<std::size_t>(i)]] += p;
    } while (detail::next_index(x, shape));

    BeliefSet out;
    for (auto& m : marg) m /= jt.z;
    out.beliefs = std::move(marg);
    out.converged = true;
    out.final_delta = 0.0;
    return out;
}

FactorGraph expand_to_dense(const FactorGraph& g, std::int64_t cap) {
    std::vector<FactorBinding> factors;
    for (int a = 0; a < g.num_factors(); ++a) {
        factors.push_back(FactorBinding{g.factor(a).scope, g.dense_payload(a, resolve_cap(cap))});
    }
    return FactorGraph::build(g.num_vars(), g.cardinality(), std::move(factors), g.unary());
}

}  // namespace lrbp
