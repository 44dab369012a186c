#pragma once

// Shared test oracles and random instance generators. The oracles only use
// the public data (payload tables, CP weights, unaries) and enumerate with
// their own index arithmetic.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "lrbp/factor_graph.hpp"
#include "lrbp/tensor.hpp"

namespace lrbp_test {

using lrbp::CPFactord;
using lrbp::DenseTensord;
using lrbp::FactorBinding;
using lrbp::FactorGraph;
using lrbp::Index;
using lrbp::LowRankRef;
using lrbp::Matrix;
using lrbp::Vector;

inline std::vector<Index> decode(long flat, int m, Index d) {
    std::vector<Index> x(static_cast<std::size_t>(m));
    for (int k = m - 1; k >= 0; --k) {
        x[static_cast<std::size_t>(k)] = flat % d;
        flat /= d;
    }
    return x;
}

inline long ipow(Index d, int m) {
    long n = 1;
    for (int k = 0; k < m; ++k) n *= d;
    return n;
}

// sum_r prod_j W_j(x_j, r)
inline double cp_entry(const CPFactord& f, const std::vector<Index>& x) {
    double s = 0.0;
    for (Index r = 0; r < f.rank(); ++r) {
        double p = 1.0;
        for (Index j = 0; j < f.arity(); ++j) p *= f.weight(j)(x[static_cast<std::size_t>(j)], r);
        s += p;
    }
    return s;
}

// Table entry at x for uniform cardinality d, computed from the raw data.
inline double dense_entry(const DenseTensord& t, const std::vector<Index>& x) {
    long flat = 0;
    for (std::size_t k = 0; k < x.size(); ++k) flat = flat * t.shape()[k] + x[k];
    return t.data()[flat];
}

// out(x_keep) = sum over the other axes of entry(x) * prod_{j != keep} in_j(x_j)
template <typename Entry>
Vector loop_marginal(Entry&& entry, int m, Index d, const std::vector<Vector>& in, int keep) {
    Vector out = Vector::Zero(d);
    const long n = ipow(d, m);
    for (long e = 0; e < n; ++e) {
        const auto x = decode(e, m, d);
        double w = entry(x);
        for (int j = 0; j < m; ++j) {
            if (j != keep) w *= in[static_cast<std::size_t>(j)][x[static_cast<std::size_t>(j)]];
        }
        out[x[static_cast<std::size_t>(keep)]] += w;
    }
    return out;
}

inline double factor_value(const FactorGraph& g, int a, const std::vector<Index>& assignment) {
    const auto& b = g.factor(a);
    std::vector<Index> x;
    for (int v : b.scope) x.push_back(assignment[static_cast<std::size_t>(v)]);
    if (const auto* ref = std::get_if<LowRankRef>(&b.payload)) return cp_entry(g.params().at(ref->param_id), x);
    return dense_entry(std::get<DenseTensord>(b.payload), x);
}

// Unnormalized weight of one full assignment.
inline double assignment_weight(const FactorGraph& g, const std::vector<Index>& x) {
    double w = 1.0;
    for (int i = 0; i < g.num_vars(); ++i) {
        if (g.has_unary()) w *= g.unary()[static_cast<std::size_t>(i)][x[static_cast<std::size_t>(i)]];
    }
    for (int a = 0; a < g.num_factors(); ++a) w *= factor_value(g, a, x);
    return w;
}

// Marginals by enumeration, visiting assignments in the order given by
// `perm` (variable perm[0] varies slowest).
inline std::vector<Vector> brute_marginals(const FactorGraph& g, std::vector<int> perm = {}) {
    const int n = g.num_vars();
    const Index d = g.cardinality();
    if (perm.empty()) {
        for (int i = 0; i < n; ++i) perm.push_back(i);
    }
    std::vector<Vector> marg(static_cast<std::size_t>(n), Vector::Zero(d));
    const long total = ipow(d, n);
    double z = 0.0;
    std::vector<Index> x(static_cast<std::size_t>(n));
    for (long e = 0; e < total; ++e) {
        const auto digits = decode(e, n, d);
        for (int k = 0; k < n; ++k) x[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] = digits[static_cast<std::size_t>(k)];
        const double w = assignment_weight(g, x);
        z += w;
        for (int i = 0; i < n; ++i) marg[static_cast<std::size_t>(i)][x[static_cast<std::size_t>(i)]] += w;
    }
    for (auto& m : marg) m /= z;
    return marg;
}

inline double max_abs_diff(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

inline double rel_dev(const Vector& got, const Vector& want) {
    return (got - want).cwiseAbs().maxCoeff() / want.cwiseAbs().maxCoeff();
}

inline double max_belief_diff(const std::vector<Vector>& a, const std::vector<Vector>& b) {
    double w = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) w = std::max(w, max_abs_diff(a[i], b[i]));
    return w;
}

inline Vector random_positive(Index d, std::mt19937_64& rng, double lo = 0.05, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vector v(d);
    for (Index k = 0; k < d; ++k) v[k] = u(rng);
    return v;
}

inline DenseTensord random_dense(int m, Index d, std::mt19937_64& rng, double lo = 0.1, double hi = 1.0) {
    std::vector<Index> shape(static_cast<std::size_t>(m), d);
    return DenseTensord(shape, random_positive(ipow(d, m), rng, lo, hi));
}

// CP weights uniform on [lo, hi].
inline CPFactord random_cp(int m, Index d, Index rank, std::mt19937_64& rng, double lo = 0.05, double hi = 1.0) {
    std::vector<Matrix> w;
    for (int j = 0; j < m; ++j) {
        Matrix mtx(d, rank);
        for (Index c = 0; c < rank; ++c) mtx.col(c) = random_positive(d, rng, lo, hi);
        w.push_back(mtx);
    }
    return CPFactord(std::move(w));
}

struct GraphParts {
    int num_vars = 0;
    int d = 2;
    std::vector<FactorBinding> factors;
    std::vector<Vector> unary;
    std::map<std::string, CPFactord> params;

    void add(std::vector<int> scope, bool low_rank, std::mt19937_64& rng, double lo, double hi, int max_rank = 6) {
        const int m = static_cast<int>(scope.size());
        if (low_rank) {
            std::uniform_int_distribution<int> rk(1, max_rank);
            const std::string id = "p" + std::to_string(factors.size());
            params.emplace(id, random_cp(m, d, rk(rng), rng, lo, hi));
            factors.push_back(FactorBinding{std::move(scope), LowRankRef{id, {}}});
        } else {
            factors.push_back(FactorBinding{std::move(scope), random_dense(m, d, rng, lo, hi)});
        }
    }

    FactorGraph build() const { return FactorGraph::build(num_vars, d, factors, unary, params); }
};

// Random factor tree: each new factor joins one existing variable with
// fresh ones, plus occasional arity-1 leaves. Mixed dense / low-rank.
inline FactorGraph random_tree(std::mt19937_64& rng, int max_vars = 12, int max_arity = 5) {
    std::uniform_int_distribution<int> dd(2, 3);
    GraphParts parts;
    parts.d = dd(rng);
    const int cap_vars = parts.d == 3 ? std::min(max_vars, 10) : max_vars;
    parts.num_vars = std::uniform_int_distribution<int>(2, cap_vars)(rng);
    std::bernoulli_distribution coin(0.5);
    std::bernoulli_distribution leaf(0.3);

    int next = 1;
    while (next < parts.num_vars) {
        const int anchor = std::uniform_int_distribution<int>(0, next - 1)(rng);
        const int k = std::uniform_int_distribution<int>(2, std::min(max_arity, parts.num_vars - next + 1))(rng);
        std::vector<int> scope{anchor};
        for (int j = 1; j < k; ++j) scope.push_back(next++);
        std::shuffle(scope.begin(), scope.end(), rng);
        parts.add(std::move(scope), coin(rng), rng, 0.1, 1.5);
        if (leaf(rng)) parts.add({std::uniform_int_distribution<int>(0, next - 1)(rng)}, coin(rng), rng, 0.1, 1.5);
    }
    if (coin(rng)) {
        for (int i = 0; i < parts.num_vars; ++i) parts.unary.push_back(random_positive(parts.d, rng, 0.1, 1.0));
    }
    return parts.build();
}

// Ring of pairwise factors plus a few arity-3 factors; potentials close to
// uniform so flooding converges.
inline FactorGraph random_loopy(std::mt19937_64& rng) {
    GraphParts parts;
    parts.d = std::uniform_int_distribution<int>(2, 3)(rng);
    parts.num_vars = std::uniform_int_distribution<int>(4, 8)(rng);
    std::bernoulli_distribution coin(0.5);
    for (int i = 0; i < parts.num_vars; ++i) {
        parts.add({i, (i + 1) % parts.num_vars}, coin(rng), rng, 0.5, 1.5);
    }
    const int extra = std::uniform_int_distribution<int>(1, 3)(rng);
    std::vector<int> ids(static_cast<std::size_t>(parts.num_vars));
    for (int i = 0; i < parts.num_vars; ++i) ids[static_cast<std::size_t>(i)] = i;
    for (int e = 0; e < extra; ++e) {
        std::shuffle(ids.begin(), ids.end(), rng);
        parts.add({ids[0], ids[1], ids[2]}, coin(rng), rng, 0.5, 1.5);
    }
    for (int i = 0; i < parts.num_vars; ++i) parts.unary.push_back(random_positive(parts.d, rng, 0.2, 1.0));
    return parts.build();
}

}  // namespace lrbp_test
