#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "lrbp/tensor.hpp"

namespace lrbp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Reference to a CP factor in the graph's parameter table. Several bindings
// may point at the same parameter id; the weights are stored once.
//
// `slots` optionally names a learnable slot key for each scope position.
// The neural layer keys its weight matrices by these names; when absent,
// position k of the binding resolves to "<param_id>/<k>".
struct LowRankRef {
    std::string param_id;
    std::vector<std::string> slots;

    friend bool operator==(const LowRankRef&, const LowRankRef&) = default;
};

using Payload = std::variant<DenseTensord, LowRankRef>;

struct FactorBinding {
    std::vector<int> scope;
    Payload payload;

    bool is_low_rank() const { return std::holds_alternative<LowRankRef>(payload); }
};

// Slot key of scope position `k` of a low-rank binding.
std::string slot_key(const LowRankRef& ref, std::size_t k);

// One variable-factor edge; `slot` is the variable's position in the scope.
struct Incidence {
    int factor;
    int slot;
};

// Bipartite variable/factor graph. Immutable after construction; build()
// validates every invariant and reports errors with the factor index.
class FactorGraph {
public:
    static FactorGraph build(int num_vars, int cardinality, std::vector<FactorBinding> factors,
                             std::vector<Vector> unary = {}, std::map<std::string, CPFactord> params = {});

    int num_vars() const { return num_vars_; }
    int cardinality() const { return cardinality_; }
    int num_factors() const { return static_cast<int>(factors_.size()); }
    int num_edges() const { return static_cast<int>(edge_offset_.back()); }

    const std::vector<FactorBinding>& factors() const { return factors_; }
    const FactorBinding& factor(int a) const { return factors_[static_cast<std::size_t>(a)]; }
    const std::map<std::string, CPFactord>& params() const { return params_; }

    bool has_unary() const { return !unary_.empty(); }
    const std::vector<Vector>& unary() const { return unary_; }
    // Unary of variable i, or all-ones when the graph carries none.
    Vector unary_or_ones(int i) const;

    // N(i) as (factor, slot) pairs in ascending factor order.
    const std::vector<Incidence>& adjacency(int i) const { return var_adjacency_[static_cast<std::size_t>(i)]; }
    // N(i) as plain factor ids.
    std::vector<int> neighbor_factors(int i) const;

    // Dense edge index of (factor a, scope slot k); edges of a factor are contiguous.
    int edge(int a, int slot) const { return edge_offset_[static_cast<std::size_t>(a)] + slot; }
    int arity(int a) const { return static_cast<int>(factors_[static_cast<std::size_t>(a)].scope.size()); }

    // CP factor behind a low-rank binding.
    const CPFactord& low_rank(int a) const;

    // Payload as a dense table; low-rank payloads are expanded under `cap`.
    DenseTensord dense_payload(int a, std::int64_t cap) const;

    // True when the bipartite graph has no cycles.
    bool is_forest() const;

private:
    int num_vars_ = 0;
    int cardinality_ = 0;
    std::vector<FactorBinding> factors_;
    std::vector<Vector> unary_;
    std::map<std::string, CPFactord> params_;
    std::vector<std::vector<Incidence>> var_adjacency_;
    std::vector<int> edge_offset_{0};
};

// Full joint table over all variables (row-major, variable 0 slowest) and
// its normalizer Z. Intended as the exact-inference oracle.
struct JointTable {
    DenseTensord joint;
    double z = 0.0;
};

JointTable joint_table(const FactorGraph& g, std::int64_t cap);
JointTable joint_table(const FactorGraph& g);

}  // namespace lrbp
