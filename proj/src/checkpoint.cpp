#include "lrbp/checkpoint.hpp"

#include "lrbp/graph_io.hpp"
#include "lrbp/json_util.hpp"

namespace lrbp {

using nlohmann::json;
using namespace json_util;

namespace {

constexpr const char* kFormat = "lrbp-checkpoint";
constexpr int kVersion = 1;

json moments_to_json(const std::map<std::string, Vector>& mom) {
    json out = json::object();
    for (const auto& [name, v] : mom) out[name] = vector_to_json(v);
    return out;
}

std::map<std::string, Vector> moments_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw FormatError(path + ": expected an object");
    std::map<std::string, Vector> out;
    for (const auto& [name, v] : j.items()) out.emplace(name, vector_from_json(v, path + "." + name));
    return out;
}

}  // namespace

json checkpoint_to_json(const Checkpoint& c) {
    const auto& p = c.model.layer;
    json slots = json::object();
    for (const auto& [key, s] : p.slots) {
        slots[key] = json{{"w_in", matrix_to_json(s.w_in)}, {"w_out", matrix_to_json(s.w_out)}};
    }
    json params{{"slots", slots},
                {"mlp",
                 {{"w1", matrix_to_json(p.mlp.w1)},
                  {"b1", vector_to_json(p.mlp.b1)},
                  {"w2", matrix_to_json(p.mlp.w2)},
                  {"b2", vector_to_json(p.mlp.b2)}}},
                {"readout", {{"w", matrix_to_json(c.model.head.w)}, {"b", vector_to_json(c.model.head.b)}}}};
    const auto& o = c.optimizer;
    json opt{{"beta1", o.beta1}, {"beta2", o.beta2}, {"eps", o.eps}, {"step", o.step},
             {"m", moments_to_json(o.m)}, {"v", moments_to_json(o.v)}};
    return json{{"format", kFormat},          {"version", kVersion},
                {"d_h", p.d_h},               {"rank", p.rank},
                {"layers", c.model.layers},   {"mlp_width", p.mlp_width()},
                {"out_dim", c.model.head.w.rows()}, {"params", params},
                {"optimizer", opt}};
}

Checkpoint checkpoint_from_json(const json& j) {
    const std::string root = "checkpoint";
    const auto& fmt = field(j, "format", root);
    if (!fmt.is_string() || fmt.get<std::string>() != kFormat) throw FormatError("format: not an lrbp checkpoint");
    if (to_int(field(j, "version", root), "version") != kVersion) throw FormatError("version: unsupported");
    const auto d_h = to_int(field(j, "d_h", root), "d_h");
    const auto rank = to_int(field(j, "rank", root), "rank");
    const auto width = to_int(field(j, "mlp_width", root), "mlp_width");
    const auto out_dim = to_int(field(j, "out_dim", root), "out_dim");
    if (d_h < 1 || rank < 1 || width < 1 || out_dim < 1) throw FormatError("checkpoint dimensions must be positive");

    Checkpoint c;
    c.model.layers = static_cast<int>(to_int(field(j, "layers", root), "layers"));
    auto& p = c.model.layer;
    p.d_h = static_cast<int>(d_h);
    p.rank = static_cast<int>(rank);

    const auto& params = field(j, "params", root);
    const auto& slots = field(params, "slots", "params");
    if (!slots.is_object()) throw FormatError("params.slots: expected an object");
    for (const auto& [key, s] : slots.items()) {
        const std::string sp = "params.slots." + key;
        p.slots.emplace(key, SlotWeights{matrix_from_json(field(s, "w_in", sp), sp + ".w_in", d_h, rank),
                                         matrix_from_json(field(s, "w_out", sp), sp + ".w_out", d_h, rank)});
    }
    const auto& mlp = field(params, "mlp", "params");
    p.mlp.w1 = matrix_from_json(field(mlp, "w1", "params.mlp"), "params.mlp.w1", width, d_h);
    p.mlp.b1 = vector_from_json(field(mlp, "b1", "params.mlp"), "params.mlp.b1");
    p.mlp.w2 = matrix_from_json(field(mlp, "w2", "params.mlp"), "params.mlp.w2", d_h, width);
    p.mlp.b2 = vector_from_json(field(mlp, "b2", "params.mlp"), "params.mlp.b2");
    if (p.mlp.b1.size() != width || p.mlp.b2.size() != d_h) throw FormatError("params.mlp: bias length mismatch");

    const auto& ro = field(params, "readout", "params");
    c.model.head.w = matrix_from_json(field(ro, "w", "params.readout"), "params.readout.w", out_dim, d_h);
    c.model.head.b = vector_from_json(field(ro, "b", "params.readout"), "params.readout.b");
    if (c.model.head.b.size() != out_dim) throw FormatError("params.readout.b: length mismatch");

    const auto& opt = field(j, "optimizer", root);
    auto& o = c.optimizer;
    o.beta1 = to_double(field(opt, "beta1", "optimizer"), "optimizer.beta1");
    o.beta2 = to_double(field(opt, "beta2", "optimizer"), "optimizer.beta2");
    o.eps = to_double(field(opt, "eps", "optimizer"), "optimizer.eps");
    o.step = static_cast<long>(to_int(field(opt, "step", "optimizer"), "optimizer.step"));
    o.m = moments_from_json(field(opt, "m", "optimizer"), "optimizer.m");
    o.v = moments_from_json(field(opt, "v", "optimizer"), "optimizer.v");
    return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& file) {
    write_json_file(checkpoint_to_json(c), file);
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
    const auto j = read_json_file(file);
    try {
        return checkpoint_from_json(j);
    } catch (const FormatError& e) {
        throw FormatError(file.string() + ": " + e.what());
    }
}

}  // namespace lrbp
