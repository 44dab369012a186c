#include "lrbp/factor_builder.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "lrbp/graph_io.hpp"
#include "lrbp/json_util.hpp"

namespace lrbp {

using nlohmann::json;
using namespace json_util;

TypedGraph TypedGraph::make(std::vector<TypedNode> nodes, std::vector<TypedEdge> edges, int num_atom_types,
                            int num_bond_types) {
    TypedGraph tg;
    int max_atom = -1;
    int max_bond = -1;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].type < 0) throw ValidationError("node " + std::to_string(i) + ": negative type id");
        max_atom = std::max(max_atom, nodes[i].type);
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
        if (edges[e].bond_type < 0) throw ValidationError("edge " + std::to_string(e) + ": negative bond type");
        max_bond = std::max(max_bond, edges[e].bond_type);
    }
    tg.num_atom_types_ = num_atom_types > 0 ? num_atom_types : max_atom + 1;
    tg.num_bond_types_ = num_bond_types > 0 ? num_bond_types : max_bond + 1;
    if (max_atom >= tg.num_atom_types_) {
        throw ValidationError("atom type " + std::to_string(max_atom) + " outside vocabulary of " +
                              std::to_string(tg.num_atom_types_));
    }
    if (max_bond >= tg.num_bond_types_) {
        throw ValidationError("bond type " + std::to_string(max_bond) + " outside vocabulary of " +
                              std::to_string(tg.num_bond_types_));
    }

    const int n = static_cast<int>(nodes.size());
    tg.adj_.assign(nodes.size(), {});
    std::set<std::pair<int, int>> seen;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto& ed = edges[e];
        const std::string at = "edge " + std::to_string(e) + ": ";
        if (ed.u < 0 || ed.u >= n || ed.v < 0 || ed.v >= n) throw ValidationError(at + "endpoint out of range");
        if (ed.u == ed.v) throw ValidationError(at + "self-loop");
        if (!seen.insert(std::minmax(ed.u, ed.v)).second) throw ValidationError(at + "duplicate edge");
        tg.adj_[static_cast<std::size_t>(ed.u)].emplace_back(ed.v, ed.bond_type);
        tg.adj_[static_cast<std::size_t>(ed.v)].emplace_back(ed.u, ed.bond_type);
    }
    for (auto& a : tg.adj_) std::sort(a.begin(), a.end());
    tg.nodes_ = std::move(nodes);
    tg.edges_ = std::move(edges);
    return tg;
}

TypedGraph typed_graph_from_json(const json& j) {
    const std::string root = "typed_graph";
    std::vector<TypedNode> nodes;
    const auto& nj = to_array(field(j, "nodes", root), "nodes");
    for (std::size_t i = 0; i < nj.size(); ++i) {
        const std::string p = "nodes[" + std::to_string(i) + "]";
        TypedNode node;
        node.type = static_cast<int>(to_int(field(nj[i], "type", p), p + ".type"));
        if (nj[i].contains("features") && !nj[i]["features"].is_null()) {
            const auto v = vector_from_json(nj[i]["features"], p + ".features");
            node.features.assign(v.data(), v.data() + v.size());
        }
        if (nj[i].contains("pos3d") && !nj[i]["pos3d"].is_null()) {
            const auto v = vector_from_json(nj[i]["pos3d"], p + ".pos3d");
            if (v.size() != 3) throw FormatError(p + ".pos3d: expected 3 coordinates");
            node.pos3d = std::array<double, 3>{v[0], v[1], v[2]};
        }
        nodes.push_back(std::move(node));
    }
    std::vector<TypedEdge> edges;
    const auto& ej = to_array(field(j, "edges", root), "edges");
    for (std::size_t e = 0; e < ej.size(); ++e) {
        const std::string p = "edges[" + std::to_string(e) + "]";
        edges.push_back(TypedEdge{static_cast<int>(to_int(field(ej[e], "u", p), p + ".u")),
                                  static_cast<int>(to_int(field(ej[e], "v", p), p + ".v")),
                                  static_cast<int>(to_int(field(ej[e], "bond_type", p), p + ".bond_type"))});
    }
    const int a = j.contains("num_atom_types") ? static_cast<int>(to_int(j["num_atom_types"], "num_atom_types")) : 0;
    const int b = j.contains("num_bond_types") ? static_cast<int>(to_int(j["num_bond_types"], "num_bond_types")) : 0;
    return TypedGraph::make(std::move(nodes), std::move(edges), a, b);
}

json typed_graph_to_json(const TypedGraph& tg) {
    json nodes = json::array();
    for (const auto& n : tg.nodes()) {
        json nj{{"type", n.type}};
        if (!n.features.empty()) nj["features"] = n.features;
        if (n.pos3d) nj["pos3d"] = *n.pos3d;
        nodes.push_back(std::move(nj));
    }
    json edges = json::array();
    for (const auto& e : tg.edges()) edges.push_back(json{{"u", e.u}, {"v", e.v}, {"bond_type", e.bond_type}});
    return json{{"nodes", nodes},
                {"edges", edges},
                {"num_atom_types", tg.num_atom_types()},
                {"num_bond_types", tg.num_bond_types()}};
}

TypedGraph load_typed_graph(const std::filesystem::path& file) {
    const auto j = read_json_file(file);
    try {
        return typed_graph_from_json(j);
    } catch (const FormatError& e) {
        throw FormatError(file.string() + ": " + e.what());
    }
}

std::string to_string(SharingScheme s) {
    switch (s) {
        case SharingScheme::CAT: return "CAT";
        case SharingScheme::BT: return "BT";
        case SharingScheme::CABT: return "CABT";
        case SharingScheme::CABTA: return "CABTA";
    }
    return "?";
}

SharingScheme parse_scheme(const std::string& name) {
    if (name == "CAT") return SharingScheme::CAT;
    if (name == "BT") return SharingScheme::BT;
    if (name == "CABT") return SharingScheme::CABT;
    if (name == "CABTA") return SharingScheme::CABTA;
    throw ValidationError("unknown sharing scheme '" + name + "' (expected CAT, BT, CABT or CABTA)");
}

std::string SlotKey::str() const {
    const auto bond = [&] { return bond_type == kSelfBond ? std::string("self") : std::to_string(bond_type); };
    switch (scheme) {
        case SharingScheme::CAT: return "CAT:c" + std::to_string(center_type);
        case SharingScheme::BT: return "BT:b" + bond();
        case SharingScheme::CABT: return "CABT:c" + std::to_string(center_type) + ":b" + bond();
        case SharingScheme::CABTA:
            if (bond_type == kSelfBond) return "CABTA:c" + std::to_string(center_type) + ":bself";
            return "CABTA:c" + std::to_string(center_type) + ":b" + bond() + ":n" + std::to_string(neighbor_type);
    }
    return "?";
}

SlotKey slot_key_for(const TypedGraph& tg, SharingScheme scheme, int center, int pos) {
    const int ct = tg.nodes()[static_cast<std::size_t>(center)].type;
    const auto& nbrs = tg.neighbors(center);
    if (pos < 0 || pos > static_cast<int>(nbrs.size())) throw ValidationError("scope position out of range");
    int bond = kSelfBond;
    int nt = -1;
    if (pos > 0) {
        const auto& [nb, bt] = nbrs[static_cast<std::size_t>(pos - 1)];
        bond = bt;
        nt = tg.nodes()[static_cast<std::size_t>(nb)].type;
    }
    switch (scheme) {
        case SharingScheme::CAT: return SlotKey{scheme, ct, -1, -1};
        case SharingScheme::BT: return SlotKey{scheme, -1, bond, -1};
        case SharingScheme::CABT: return SlotKey{scheme, ct, bond, -1};
        case SharingScheme::CABTA: return SlotKey{scheme, ct, bond, pos > 0 ? nt : -1};
    }
    throw ValidationError("unknown scheme");
}

NodeCenteredFactors build_node_centered(const TypedGraph& tg, SharingScheme scheme, int rank) {
    if (rank < 1) throw ValidationError("rank must be >= 1");
    NodeCenteredFactors out;
    out.rank = rank;
    std::set<std::string> table;
    for (int c = 0; c < tg.num_nodes(); ++c) {
        FactorBinding b;
        LowRankRef ref{"node" + std::to_string(c), {}};
        b.scope.push_back(c);
        for (const auto& [nb, bt] : tg.neighbors(c)) b.scope.push_back(nb);
        for (int pos = 0; pos < static_cast<int>(b.scope.size()); ++pos) {
            auto key = slot_key_for(tg, scheme, c, pos).str();
            table.insert(key);
            ref.slots.push_back(std::move(key));
        }
        b.payload = std::move(ref);
        out.bindings.push_back(std::move(b));
    }
    out.slot_table.assign(table.begin(), table.end());
    return out;
}

std::int64_t slot_count(SharingScheme scheme, int num_atom_types, int num_bond_types) {
    if (num_atom_types < 1 || num_bond_types < 1) throw ValidationError("vocabularies must be positive");
    const std::int64_t a = num_atom_types;
    const std::int64_t b = num_bond_types;
    switch (scheme) {
        case SharingScheme::CAT: return a;
        case SharingScheme::BT: return b + 1;
        case SharingScheme::CABT: return a * (b + 1);
        case SharingScheme::CABTA: return a * b * a + a;
    }
    return 0;
}

Matrix KeyedSlotWeights::weights(const std::string& slot_key, int d, int rank) const {
    // FNV-1a of the key, mixed with the seed.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : slot_key) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    std::mt19937_64 rng(h ^ (seed_ * 0x9E3779B97F4A7C15ULL));
    std::uniform_real_distribution<double> unif(0.0, scale_);
    Matrix m(d, rank);
    for (Index c = 0; c < rank; ++c) {
        for (Index r = 0; r < d; ++r) m(r, c) = unif(rng);
    }
    return m;
}

FactorGraph typed_to_factor_graph(const TypedGraph& tg, SharingScheme scheme, int d, int rank,
                                  const SlotWeightSource& source) {
    auto built = build_node_centered(tg, scheme, rank);
    std::map<std::string, CPFactord> params;
    for (const auto& b : built.bindings) {
        const auto& ref = std::get<LowRankRef>(b.payload);
        std::vector<Matrix> w;
        for (const auto& key : ref.slots) w.push_back(source.weights(key, d, rank));
        params.emplace(ref.param_id, CPFactord(std::move(w)));
    }
    return FactorGraph::build(tg.num_nodes(), d, std::move(built.bindings), {}, std::move(params));
}

SequenceFactors build_sequence(int length, int order, bool shared) {
    if (length < 1) throw ValidationError("sequence length must be >= 1");
    if (order < 1) throw ValidationError("factor order must be >= 1");
    SequenceFactors out;
    for (int p = 0; p < length; ++p) {
        const int first = std::max(0, p - order + 1);
        FactorBinding b;
        for (int q = first; q <= p; ++q) b.scope.push_back(q);
        const int arity = p - first + 1;
        std::string id = shared ? "order" + std::to_string(arity) : "pos" + std::to_string(p);
        out.param_arity[id] = arity;
        b.payload = LowRankRef{std::move(id), {}};
        out.bindings.push_back(std::move(b));
    }
    return out;
}

FactorGraph sequence_graph(int length, int order, bool shared, int d, int rank, std::uint64_t seed,
                           std::vector<Vector> unary) {
    auto seq = build_sequence(length, order, shared);
    std::map<std::string, CPFactord> params;
    std::uint64_t k = 0;
    for (const auto& [id, arity] : seq.param_arity) {
        params.emplace(id, cp_random(arity, d, rank, seed + 7919 * (++k)));
    }
    return FactorGraph::build(length, d, std::move(seq.bindings), std::move(unary), std::move(params));
}

}  // namespace lrbp
