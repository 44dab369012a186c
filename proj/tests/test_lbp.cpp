#include <doctest.h>

#include <random>

#include "lrbp/lbp.hpp"
#include "support.hpp"

using namespace lrbp;
using namespace lrbp_test;

namespace {

Vector vec2(double a, double b) { return (Vector(2) << a, b).finished(); }

DenseTensord identity2() { return DenseTensord({2, 2}, (Vector(4) << 1, 0, 0, 1).finished()); }

LbpOptions tight() {
    LbpOptions o;
    o.tol = 1e-13;
    o.max_iters = 2000;
    return o;
}

}  // namespace

TEST_CASE("variable-to-factor update multiplies the other incoming messages") {
    const auto pair = DenseTensord::constant({2, 2}, 1.0);
    const auto g = FactorGraph::build(3, 2, {FactorBinding{{0, 1}, pair}, FactorBinding{{0, 2}, pair},
                                             FactorBinding{{0}, DenseTensord::constant({2}, 1.0)}});
    auto st = init_messages(g);
    st.factor_to_var[static_cast<std::size_t>(g.edge(1, 0))] = vec2(0.8, 0.2);
    st.factor_to_var[static_cast<std::size_t>(g.edge(2, 0))] = vec2(0.5, 0.5);
    const Vector m = var_to_factor_update(st, g, 0, 0);
    CHECK(m[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(m[1] == doctest::Approx(0.2).epsilon(1e-15));

    const Vector lone = var_to_factor_update(st, g, 1, 0);
    CHECK(lone[0] == 0.5);
    CHECK(lone[1] == 0.5);
    CHECK_THROWS_AS(var_to_factor_update(st, g, 2, 0), ValidationError);
}

TEST_CASE("dense factor-to-variable messages") {
    const auto g = FactorGraph::build(2, 2, {FactorBinding{{0, 1}, identity2()}});
    auto st = init_messages(g);
    st.var_to_factor[static_cast<std::size_t>(g.edge(0, 1))] = vec2(1.0, 0.0);
    const Vector m = factor_to_var_dense(g, st, 0, 0);
    CHECK(m[0] == 1.0);
    CHECK(m[1] == 0.0);

    const auto h = FactorGraph::build(2, 2, {FactorBinding{{0, 1}, DenseTensord::constant({2, 2}, 1.0)}});
    auto s2 = init_messages(h);
    s2.var_to_factor[static_cast<std::size_t>(h.edge(0, 1))] = vec2(0.9, 0.1);
    const Vector u = factor_to_var_dense(h, s2, 0, 0);
    CHECK(u[0] == 0.5);
    CHECK(u[1] == 0.5);
}

TEST_CASE("low-rank and dense factor-to-variable paths agree") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        GraphParts parts;
        parts.d = std::uniform_int_distribution<int>(2, 4)(rng);
        const int m = std::uniform_int_distribution<int>(2, 5)(rng);
        parts.num_vars = m;
        std::vector<int> scope(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) scope[static_cast<std::size_t>(k)] = k;
        std::shuffle(scope.begin(), scope.end(), rng);
        parts.add(scope, true, rng, 0.05, 1.0, 12);
        const auto g = parts.build();
        auto st = init_messages(g);
        for (auto& v : st.var_to_factor) v = random_positive(parts.d, rng);
        for (int i = 0; i < m; ++i) {
            CHECK(rel_dev(factor_to_var_lowrank(g, st, 0, i), factor_to_var_dense(g, st, 0, i)) < 1e-12);
        }
    }
}

TEST_CASE("single variable with unary factor (2, 6)") {
    const auto g = FactorGraph::build(1, 2, {FactorBinding{{0}, DenseTensord({2}, vec2(2.0, 6.0))}});
    LbpOptions o;
    o.max_iters = 1;
    const auto b = run_lbp(g, o);
    CHECK(b.iterations == 1);
    CHECK(b.beliefs[0][0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(b.beliefs[0][1] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("zero iterations return the initial beliefs") {
    const auto g = FactorGraph::build(2, 2, {FactorBinding{{0, 1}, identity2()}}, {vec2(1.0, 3.0), vec2(1.0, 1.0)});
    LbpOptions o;
    o.max_iters = 0;
    const auto b = run_lbp(g, o);
    CHECK_FALSE(b.converged);
    CHECK(b.iterations == 0);
    CHECK(b.beliefs[0][0] == doctest::Approx(0.25));
    CHECK(b.beliefs[1][0] == doctest::Approx(0.5));
}

TEST_CASE("exact marginals of an identity coupling") {
    const auto g = FactorGraph::build(2, 2, {FactorBinding{{0, 1}, identity2()}}, {vec2(1.0, 0.0), vec2(0.5, 0.5)});
    const auto ex = exact_marginals(g);
    for (const auto& b : ex.beliefs) {
        CHECK(b[0] == 1.0);
        CHECK(b[1] == 0.0);
    }
    const auto bp = run_lbp(g, tight());
    CHECK(bp.converged);
    CHECK(max_belief_diff(bp.beliefs, ex.beliefs) < 1e-12);
}

TEST_CASE("exact marginals agree with a permuted enumeration") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = random_loopy(rng);
        std::vector<int> perm(static_cast<std::size_t>(g.num_vars()));
        for (int i = 0; i < g.num_vars(); ++i) perm[static_cast<std::size_t>(i)] = i;
        std::shuffle(perm.begin(), perm.end(), rng);
        CHECK(max_belief_diff(exact_marginals(g).beliefs, brute_marginals(g, perm)) < 1e-12);
    }
}

TEST_CASE("LBP is exact on random trees") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 15; ++trial) {
        const auto g = random_tree(rng, 9, 4);
        REQUIRE(g.is_forest());
        const auto bp = run_lbp(g, tight());
        CHECK(bp.converged);
        CHECK(max_belief_diff(bp.beliefs, brute_marginals(g)) < 1e-10);
    }
}

TEST_CASE("damping") {
    std::mt19937_64 rng(6);
    const auto g = random_loopy(rng);
    LbpOptions plain;
    plain.max_iters = 7;
    auto zero = plain;
    zero.damping = 0.0;
    const auto a = run_lbp(g, plain);
    const auto b = run_lbp(g, zero);
    for (std::size_t i = 0; i < a.beliefs.size(); ++i) CHECK(a.beliefs[i] == b.beliefs[i]);

    const auto t = random_tree(rng, 8, 3);
    auto damped = tight();
    damped.damping = 0.5;
    const auto d = run_lbp(t, damped);
    CHECK(d.converged);
    CHECK(max_belief_diff(d.beliefs, brute_marginals(t)) < 1e-10);

    auto bad = plain;
    bad.damping = 1.0;
    CHECK_THROWS_AS(run_lbp(g, bad), ValidationError);
}

TEST_CASE("results do not depend on the worker count") {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 5; ++trial) {
        const auto g = random_loopy(rng);
        LbpOptions one;
        one.max_iters = 25;
        auto many = one;
        many.workers = 3;
        const auto a = run_lbp(g, one);
        const auto b = run_lbp(g, many);
        CHECK(a.iterations == b.iterations);
        CHECK(a.final_delta == b.final_delta);
        for (std::size_t i = 0; i < a.beliefs.size(); ++i) CHECK(a.beliefs[i] == b.beliefs[i]);
    }
}

TEST_CASE("rescaled initial messages reach the same beliefs") {
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 5; ++trial) {
        const auto g = random_loopy(rng);
        const auto base = run_lbp(g, tight());
        REQUIRE(base.converged);
        for (double c : {0.1, 10.0}) {
            auto st = init_messages(g);
            const auto e = std::uniform_int_distribution<int>(0, g.num_edges() - 1)(rng);
            st.factor_to_var[static_cast<std::size_t>(e)] *= c;
            st.var_to_factor[static_cast<std::size_t>(e)] *= c;
            const auto scaled = run_lbp(g, tight(), st);
            CHECK(scaled.converged);
            CHECK(max_belief_diff(scaled.beliefs, base.beliefs) < 1e-10);
        }
    }
}

TEST_CASE("beliefs are normalized and nonnegative") {
    std::mt19937_64 rng(90);
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = random_loopy(rng);
        LbpOptions o;
        o.max_iters = 10;
        for (const auto& b : run_lbp(g, o).beliefs) {
            CHECK(b.sum() == doctest::Approx(1.0).epsilon(1e-14));
            CHECK(b.minCoeff() >= 0.0);
        }
    }
}

TEST_CASE("expanding low-rank factors leaves beliefs unchanged") {
    std::mt19937_64 rng(15);
    const auto g = random_loopy(rng);
    LbpOptions o;
    o.max_iters = 30;
    const auto a = run_lbp(g, o);
    const auto b = run_lbp(expand_to_dense(g), o);
    CHECK(max_belief_diff(a.beliefs, b.beliefs) < 1e-12);
}

TEST_CASE("convergence reporting and trace") {
    std::mt19937_64 rng(3);
    const auto g = random_loopy(rng);
    std::vector<double> deltas;
    LbpOptions o;
    o.max_iters = 3;
    o.tol = 1e-300;
    o.trace = [&](int, double d) { deltas.push_back(d); };
    const auto b = run_lbp(g, o);
    CHECK_FALSE(b.converged);
    CHECK(b.iterations == 3);
    REQUIRE(deltas.size() == 3);
    CHECK(b.final_delta == deltas.back());
}

TEST_CASE("degenerate messages raise errors with the iteration") {
    const auto zero = FactorGraph::build(2, 2, {FactorBinding{{0, 1}, DenseTensord::constant({2, 2}, 0.0)}});
    try {
        run_lbp(zero);
        FAIL("expected ZeroMassError");
    } catch (const ZeroMassError& e) {
        CHECK(std::string(e.what()).find("iteration 1") != std::string::npos);
    }
    auto inf = DenseTensord::constant({2, 2}, 1.0);
    inf.data()[0] = std::numeric_limits<double>::infinity();
    const auto g = FactorGraph::build(2, 2, {FactorBinding{{0, 1}, inf}});
    CHECK_THROWS_AS(run_lbp(g), NonFiniteError);
}

TEST_CASE("negative low-rank outputs are counted") {
    Matrix w0(2, 1);
    w0 << 2.0, -1.0;
    Matrix w1(2, 1);
    w1 << 1.0, 1.0;
    const auto g = FactorGraph::build(2, 2, {FactorBinding{{0, 1}, LowRankRef{"p", {}}}}, {},
                                      {{"p", CPFactord({w0, w1})}});
    int warned = 0;
    LbpOptions o;
    o.max_iters = 1;
    o.warn = [&](const std::string&) { ++warned; };
    const auto b = run_lbp(g, o);
    CHECK(b.sign_warnings == 1);
    CHECK(warned == 1);
}
