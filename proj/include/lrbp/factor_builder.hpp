#pragma once

// Higher-order factor construction from typed application graphs.
//
// Node-centered factors: one factor per node, scope = [center, neighbors in
// ascending id order]. Each scope position is keyed for parameter sharing:
//
//   CAT    every position keys on the center type
//   BT     neighbor positions key on the bond type; the center on "self"
//   CABT   (center type, bond type | self)
//   CABTA  (center type, bond type, neighbor type); the center on (center type, self)
//
// Keys are directional from the center.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrbp/factor_graph.hpp"

namespace lrbp {

struct TypedNode {
    int type = 0;
    std::vector<double> features;
    std::optional<std::array<double, 3>> pos3d;
};

struct TypedEdge {
    int u = 0;
    int v = 0;
    int bond_type = 0;
};

class TypedGraph {
public:
    // Vocabulary sizes <= 0 are inferred as (max id + 1).
    static TypedGraph make(std::vector<TypedNode> nodes, std::vector<TypedEdge> edges, int num_atom_types = 0,
                           int num_bond_types = 0);

    int num_nodes() const { return static_cast<int>(nodes_.size()); }
    int num_atom_types() const { return num_atom_types_; }
    int num_bond_types() const { return num_bond_types_; }
    const std::vector<TypedNode>& nodes() const { return nodes_; }
    const std::vector<TypedEdge>& edges() const { return edges_; }

    // (neighbor, bond type) pairs sorted by neighbor id.
    const std::vector<std::pair<int, int>>& neighbors(int v) const { return adj_[static_cast<std::size_t>(v)]; }

private:
    std::vector<TypedNode> nodes_;
    std::vector<TypedEdge> edges_;
    std::vector<std::vector<std::pair<int, int>>> adj_;
    int num_atom_types_ = 0;
    int num_bond_types_ = 0;
};

// Typed-graph JSON: {"nodes": [{"type", "features"?, "pos3d"?}],
//                    "edges": [{"u", "v", "bond_type"}],
//                    "num_atom_types"?, "num_bond_types"?}
TypedGraph typed_graph_from_json(const nlohmann::json& j);
nlohmann::json typed_graph_to_json(const TypedGraph& tg);
TypedGraph load_typed_graph(const std::filesystem::path& file);

enum class SharingScheme { CAT, BT, CABT, CABTA };

std::string to_string(SharingScheme s);
SharingScheme parse_scheme(const std::string& name);

inline constexpr int kSelfBond = -1;

struct SlotKey {
    SharingScheme scheme = SharingScheme::CAT;
    int center_type = -1;
    int bond_type = -1;  // kSelfBond for the center position
    int neighbor_type = -1;

    std::string str() const;
    friend auto operator<=>(const SlotKey&, const SlotKey&) = default;
};

// Key of scope position `pos` of the factor centered at `center`
// (pos 0 is the center, pos k > 0 the k-th neighbor by id).
SlotKey slot_key_for(const TypedGraph& tg, SharingScheme scheme, int center, int pos);

struct NodeCenteredFactors {
    std::vector<FactorBinding> bindings;  // low-rank refs "node<i>" carrying per-position slot keys
    std::vector<std::string> slot_table;  // sorted, each realized key once
    int rank = 0;
};

NodeCenteredFactors build_node_centered(const TypedGraph& tg, SharingScheme scheme, int rank);

// Size of the slot-key space for the given vocabularies:
//   CAT   A
//   BT    B + 1
//   CABT  A * (B + 1)
//   CABTA A * B * A + A
std::int64_t slot_count(SharingScheme scheme, int num_atom_types, int num_bond_types);

// Supplies the d x R weight matrix of one slot. Discrete keyed lookup is the
// built-in source; a feature-conditioned generator can implement the same
// interface.
class SlotWeightSource {
public:
    virtual ~SlotWeightSource() = default;
    virtual Matrix weights(const std::string& slot_key, int d, int rank) const = 0;
};

// Seeded nonnegative matrices, identical for identical keys.
class KeyedSlotWeights : public SlotWeightSource {
public:
    explicit KeyedSlotWeights(std::uint64_t seed, double scale = 1.0) : seed_(seed), scale_(scale) {}
    Matrix weights(const std::string& slot_key, int d, int rank) const override;

private:
    std::uint64_t seed_;
    double scale_;
};

// Node-centered factor graph with one CP parameter per factor assembled from
// its slots' matrices; the slot keys are kept on each binding.
FactorGraph typed_to_factor_graph(const TypedGraph& tg, SharingScheme scheme, int d, int rank,
                                  const SlotWeightSource& source);

struct SequenceFactors {
    std::vector<FactorBinding> bindings;
    std::map<std::string, int> param_arity;  // param id -> arity
};

// One factor per position p over positions [max(0, p-k+1), p]. With
// shared = true all factors of the same arity use param "order<m>",
// otherwise each uses "pos<p>".
SequenceFactors build_sequence(int length, int order, bool shared);

// Sequence factor graph with seeded random nonnegative CP params.
FactorGraph sequence_graph(int length, int order, bool shared, int d, int rank, std::uint64_t seed,
                           std::vector<Vector> unary = {});

}  // namespace lrbp
