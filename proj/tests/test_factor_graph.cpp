#include <doctest.h>

#include <algorithm>
#include <random>

#include "lrbp/factor_graph.hpp"
#include "lrbp/graph_io.hpp"
#include "support.hpp"

using namespace lrbp;
using namespace lrbp_test;

namespace {

DenseTensord table(std::vector<Index> shape, std::initializer_list<double> v) {
    Vector data(static_cast<Index>(v.size()));
    Index k = 0;
    for (double x : v) data[k++] = x;
    return DenseTensord(std::move(shape), data);
}

}  // namespace

TEST_CASE("build rejects malformed factors") {
    const auto pair = DenseTensord::constant({2, 2}, 1.0);
    CHECK_THROWS_AS(FactorGraph::build(2, 2, {FactorBinding{{0, 0}, pair}}), ValidationError);
    CHECK_THROWS_AS(FactorGraph::build(2, 2, {FactorBinding{{0, 2}, pair}}), ValidationError);
    CHECK_THROWS_AS(FactorGraph::build(2, 2, {FactorBinding{{}, pair}}), ValidationError);
    CHECK_THROWS_AS(FactorGraph::build(2, 2, {FactorBinding{{0}, pair}}), ShapeError);
    CHECK_THROWS_AS(FactorGraph::build(2, 2, {FactorBinding{{0, 1}, LowRankRef{"missing", {}}}}), ValidationError);
    CHECK_THROWS_AS(FactorGraph::build(2, 2, {FactorBinding{{0, 1}, LowRankRef{"p", {}}}}, {},
                                       {{"p", cp_random(3, 2, 1, 1)}}),
                    ShapeError);
    CHECK_THROWS_AS(FactorGraph::build(2, 2, {FactorBinding{{0, 1}, LowRankRef{"p", {"a"}}}}, {},
                                       {{"p", cp_random(2, 2, 1, 1)}}),
                    ShapeError);
    CHECK_THROWS_AS(FactorGraph::build(0, 2, {}), ValidationError);
    CHECK_THROWS_AS(FactorGraph::build(1, 1, {}), ValidationError);
    CHECK_THROWS_AS(FactorGraph::build(2, 2, {}, {Vector::Ones(2)}), ShapeError);
    CHECK_THROWS_AS(FactorGraph::build(1, 2, {}, {Vector::Constant(2, -1.0)}), ValidationError);
}

TEST_CASE("build error names the factor index") {
    const auto pair = DenseTensord::constant({2, 2}, 1.0);
    try {
        FactorGraph::build(3, 2, {FactorBinding{{0, 1}, pair}, FactorBinding{{1, 1}, pair}});
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("factor 1") != std::string::npos);
    }
}

TEST_CASE("edges and adjacency") {
    const auto pair = DenseTensord::constant({2, 2}, 1.0);
    const auto triple = DenseTensord::constant({2, 2, 2}, 1.0);
    const auto g = FactorGraph::build(4, 2, {FactorBinding{{2, 0}, pair}, FactorBinding{{1, 2, 3}, triple}});
    CHECK(g.num_edges() == 5);
    CHECK(g.edge(0, 1) == 1);
    CHECK(g.edge(1, 0) == 2);
    CHECK(g.neighbor_factors(2) == std::vector<int>{0, 1});
    CHECK(g.adjacency(2)[0].slot == 0);
    CHECK(g.adjacency(2)[1].slot == 1);
    CHECK(g.is_forest());
}

TEST_CASE("is_forest detects cycles") {
    const auto pair = DenseTensord::constant({2, 2}, 1.0);
    const auto ring = FactorGraph::build(3, 2, {FactorBinding{{0, 1}, pair}, FactorBinding{{1, 2}, pair},
                                                FactorBinding{{2, 0}, pair}});
    CHECK_FALSE(ring.is_forest());
    const auto twice = FactorGraph::build(2, 2, {FactorBinding{{0, 1}, pair}, FactorBinding{{1, 0}, pair}});
    CHECK_FALSE(twice.is_forest());
}

TEST_CASE("unary factor (2, 6) gives Z = 8") {
    const auto g = FactorGraph::build(1, 2, {FactorBinding{{0}, table({2}, {2.0, 6.0})}});
    CHECK(joint_table(g).z == 8.0);
    const auto h = FactorGraph::build(1, 2, {}, {(Vector(2) << 2.0, 6.0).finished()});
    CHECK(joint_table(h).z == 8.0);
}

TEST_CASE("Z is invariant to factor order") {
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = random_loopy(rng);
        auto factors = g.factors();
        std::shuffle(factors.begin(), factors.end(), rng);
        const auto h = FactorGraph::build(g.num_vars(), g.cardinality(), factors, g.unary(), g.params());
        CHECK(joint_table(h).z == doctest::Approx(joint_table(g).z).epsilon(1e-12));
    }
}

TEST_CASE("joint table matches assignment weights") {
    std::mt19937_64 rng(4);
    const auto g = random_loopy(rng);
    const auto jt = joint_table(g);
    for (long e = 0; e < jt.joint.size(); ++e) {
        const auto x = decode(e, g.num_vars(), g.cardinality());
        CHECK(jt.joint.data()[e] == doctest::Approx(assignment_weight(g, x)).epsilon(1e-12));
    }
}

TEST_CASE("joint table enforces the cap and rejects zero mass") {
    const auto big = FactorGraph::build(20, 2, {});
    CHECK_THROWS_AS(joint_table(big, 1000), CapacityError);
    const auto zero = FactorGraph::build(1, 2, {FactorBinding{{0}, table({2}, {0.0, 0.0})}});
    CHECK_THROWS_AS(joint_table(zero), ZeroMassError);
}

TEST_CASE("low-rank payload expands under the cap") {
    const auto g = FactorGraph::build(3, 2, {FactorBinding{{0, 1, 2}, LowRankRef{"p", {}}}}, {},
                                      {{"p", cp_random(3, 2, 2, 9)}});
    CHECK(g.dense_payload(0, 100).size() == 8);
    CHECK_THROWS_AS(g.dense_payload(0, 4), CapacityError);
    CHECK(slot_key(std::get<LowRankRef>(g.factor(0).payload), 2) == "p/2");
}

TEST_CASE("graph JSON round trip") {
    std::mt19937_64 rng(8);
    auto parts = GraphParts{};
    parts.num_vars = 3;
    parts.d = 3;
    parts.add({0, 1}, false, rng, 0.1, 1.0);
    parts.add({1, 2, 0}, true, rng, 0.1, 1.0);
    parts.factors.back().payload = LowRankRef{"p1", {"a", "b", "a"}};
    parts.unary = {random_positive(3, rng), random_positive(3, rng), random_positive(3, rng)};
    const auto g = parts.build();
    const auto h = graph_from_json(graph_to_json(g));
    REQUIRE(h.num_factors() == 2);
    CHECK(std::get<DenseTensord>(h.factor(0).payload).data() == std::get<DenseTensord>(g.factor(0).payload).data());
    CHECK(std::get<LowRankRef>(h.factor(1).payload) == std::get<LowRankRef>(g.factor(1).payload));
    CHECK(h.params().at("p1") == g.params().at("p1"));
    for (int i = 0; i < 3; ++i) CHECK(h.unary()[static_cast<std::size_t>(i)] == g.unary()[static_cast<std::size_t>(i)]);
}

TEST_CASE("malformed graph JSON names the field") {
    auto j = nlohmann::json::parse(R"({
        "num_vars": 2, "cardinality": 2, "unary": null,
        "factors": [{"scope": [0, 1], "payload": {"kind": "dense", "shape": [2, 2], "data": [1, 1, 1, 1]}},
                    {"scope": [0], "payload": {"kind": "sparse"}}]
    })");
    auto message = [](const nlohmann::json& doc) {
        try {
            graph_from_json(doc);
        } catch (const FormatError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message(j).find("factors[1].payload.kind") != std::string::npos);

    j["factors"][1]["payload"] = {{"kind", "dense"}, {"shape", {2}}, {"data", {1, "x"}}};
    CHECK(message(j).find("factors[1].payload.data[1]") != std::string::npos);

    j.erase("cardinality");
    CHECK(message(j).find("cardinality") != std::string::npos);
}
