#pragma once

// Graph file format: one JSON document
//
//   { "num_vars": n, "cardinality": d,
//     "unary": [[...], ...] | null,
//     "factors": [ { "scope": [...],
//                    "payload": {"kind": "dense", "shape": [...], "data": [...]}
//                             | {"kind": "lowrank", "param_id": "...", "slots": [...]?} } ],
//     "params": { "<id>": {"arity": m, "d": d, "rank": R, "weights": [W_1, ..., W_m]} } }
//
// Each W_j is a d x R matrix written as an array of rows. "slots" is
// optional and names the learnable slot key of each scope position.

#include <json.hpp>

#include <filesystem>
#include <string>

#include "lrbp/factor_graph.hpp"

namespace lrbp {

nlohmann::json cp_to_json(const CPFactord& f);
CPFactord cp_from_json(const nlohmann::json& j, const std::string& path);

nlohmann::json graph_to_json(const FactorGraph& g);
FactorGraph graph_from_json(const nlohmann::json& j);

// Parse errors carry the byte offset; schema errors carry the field path.
FactorGraph load_graph(const std::filesystem::path& file);
void save_graph(const FactorGraph& g, const std::filesystem::path& file);

nlohmann::json read_json_file(const std::filesystem::path& file);
void write_json_file(const nlohmann::json& j, const std::filesystem::path& file);

}  // namespace lrbp
