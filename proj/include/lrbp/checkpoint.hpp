#pragma once

// Model checkpoints as JSON, using the same matrix conventions as the graph
// file (arrays of rows, shortest round-trip doubles):
//
//   { "format": "lrbp-checkpoint", "version": 1,
//     "d_h": .., "rank": .., "layers": T, "mlp_width": ..,
//     "params": { "slots": { "<key>": {"w_in": [[..]], "w_out": [[..]]} },
//                 "mlp": {"w1", "b1", "w2", "b2"}, "readout": {"w", "b"} },
//     "optimizer": { "beta1", "beta2", "eps", "step",
//                    "m": {"<param name>": [..]}, "v": {..} } }

#include <json.hpp>

#include <filesystem>

#include "lrbp/neural.hpp"

namespace lrbp {

struct Checkpoint {
    Model model;
    AdamState optimizer;
};

nlohmann::json checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& file);
Checkpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace lrbp
