#include "lrbp/graph_io.hpp"

#include <fstream>
#include <sstream>

#include "lrbp/json_util.hpp"

namespace lrbp {

using nlohmann::json;
using namespace json_util;

json cp_to_json(const CPFactord& f) {
    json weights = json::array();
    for (const auto& w : f.weights()) weights.push_back(matrix_to_json(w));
    return json{{"arity", f.arity()}, {"d", f.cardinality()}, {"rank", f.rank()}, {"weights", weights}};
}

CPFactord cp_from_json(const json& j, const std::string& path) {
    const auto arity = to_int(field(j, "arity", path), path + ".arity");
    const auto d = to_int(field(j, "d", path), path + ".d");
    const auto rank = to_int(field(j, "rank", path), path + ".rank");
    if (arity < 1 || d < 2 || rank < 1) throw FormatError(path + ": need arity >= 1, d >= 2, rank >= 1");
    const auto& w = to_array(field(j, "weights", path), path + ".weights");
    if (static_cast<long long>(w.size()) != arity) {
        throw FormatError(path + ".weights: expected " + std::to_string(arity) + " matrices");
    }
    std::vector<Matrix> mats;
    for (std::size_t k = 0; k < w.size(); ++k) {
        mats.push_back(matrix_from_json(w[k], path + ".weights[" + std::to_string(k) + "]", d, rank));
    }
    return CPFactord(std::move(mats));
}

json graph_to_json(const FactorGraph& g) {
    json j;
    j["num_vars"] = g.num_vars();
    j["cardinality"] = g.cardinality();
    if (g.has_unary()) {
        json u = json::array();
        for (const auto& v : g.unary()) u.push_back(vector_to_json(v));
        j["unary"] = u;
    } else {
        j["unary"] = nullptr;
    }
    json factors = json::array();
    for (const auto& b : g.factors()) {
        json payload;
        if (const auto* t = std::get_if<DenseTensord>(&b.payload)) {
            payload = json{{"kind", "dense"}, {"shape", t->shape()}, {"data", vector_to_json(t->data())}};
        } else {
            const auto& ref = std::get<LowRankRef>(b.payload);
            payload = json{{"kind", "lowrank"}, {"param_id", ref.param_id}};
            if (!ref.slots.empty()) payload["slots"] = ref.slots;
        }
        factors.push_back(json{{"scope", b.scope}, {"payload", payload}});
    }
    j["factors"] = factors;
    json params = json::object();
    for (const auto& [id, f] : g.params()) params[id] = cp_to_json(f);
    j["params"] = params;
    return j;
}

FactorGraph graph_from_json(const json& j) {
    const std::string root = "graph";
    const auto n = to_int(field(j, "num_vars", root), "num_vars");
    const auto d = to_int(field(j, "cardinality", root), "cardinality");

    std::vector<Vector> unary;
    if (j.contains("unary") && !j["unary"].is_null()) {
        const auto& u = to_array(j["unary"], "unary");
        for (std::size_t i = 0; i < u.size(); ++i) {
            unary.push_back(vector_from_json(u[i], "unary[" + std::to_string(i) + "]"));
        }
    }

    std::map<std::string, CPFactord> params;
    if (j.contains("params") && !j["params"].is_null()) {
        const auto& p = j["params"];
        if (!p.is_object()) throw FormatError("params: expected an object");
        for (const auto& [id, val] : p.items()) {
            params.emplace(id, cp_from_json(val, "params." + id));
        }
    }

    std::vector<FactorBinding> factors;
    const auto& fs = to_array(field(j, "factors", root), "factors");
    for (std::size_t a = 0; a < fs.size(); ++a) {
        const std::string fp = "factors[" + std::to_string(a) + "]";
        FactorBinding b;
        const auto& scope = to_array(field(fs[a], "scope", fp), fp + ".scope");
        for (std::size_t k = 0; k < scope.size(); ++k) {
            b.scope.push_back(static_cast<int>(to_int(scope[k], fp + ".scope[" + std::to_string(k) + "]")));
        }
        const std::string pp = fp + ".payload";
        const auto& payload = field(fs[a], "payload", fp);
        const auto& kind = field(payload, "kind", pp);
        if (!kind.is_string()) throw FormatError(pp + ".kind: expected a string");
        if (kind == "dense") {
            const auto& shape_j = to_array(field(payload, "shape", pp), pp + ".shape");
            std::vector<Index> shape;
            for (std::size_t k = 0; k < shape_j.size(); ++k) {
                shape.push_back(static_cast<Index>(to_int(shape_j[k], pp + ".shape[" + std::to_string(k) + "]")));
            }
            auto data = vector_from_json(field(payload, "data", pp), pp + ".data");
            try {
                b.payload = DenseTensord(std::move(shape), std::move(data));
            } catch (const ShapeError& e) {
                throw FormatError(pp + ": " + e.what());
            }
        } else if (kind == "lowrank") {
            const auto& id = field(payload, "param_id", pp);
            if (!id.is_string()) throw FormatError(pp + ".param_id: expected a string");
            LowRankRef ref{id.get<std::string>(), {}};
            if (payload.contains("slots") && !payload["slots"].is_null()) {
                const auto& s = to_array(payload["slots"], pp + ".slots");
                for (std::size_t k = 0; k < s.size(); ++k) {
                    if (!s[k].is_string()) throw FormatError(pp + ".slots[" + std::to_string(k) + "]: expected a string");
                    ref.slots.push_back(s[k].get<std::string>());
                }
            }
            b.payload = std::move(ref);
        } else {
            throw FormatError(pp + ".kind: unknown payload kind '" + kind.get<std::string>() + "'");
        }
        factors.push_back(std::move(b));
    }

    return FactorGraph::build(static_cast<int>(n), static_cast<int>(d), std::move(factors), std::move(unary),
                              std::move(params));
}

json read_json_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw FormatError(file.string() + ": cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(file.string() + ": " + e.what());
    }
}

void write_json_file(const json& j, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw Error(file.string() + ": cannot open for writing");
    out << j.dump(1) << '\n';
    if (!out) throw Error(file.string() + ": write failed");
}

FactorGraph load_graph(const std::filesystem::path& file) {
    const auto j = read_json_file(file);
    try {
        return graph_from_json(j);
    } catch (const FormatError& e) {
        throw FormatError(file.string() + ": " + e.what());
    }
}

void save_graph(const FactorGraph& g, const std::filesystem::path& file) { write_json_file(graph_to_json(g), file); }

}  // namespace lrbp
