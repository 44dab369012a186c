#pragma once

// Small helpers for reading and writing Eigen values as JSON with field-path
// error messages. Doubles are written in shortest round-trip form.

#include <Eigen/Dense>
#include <json.hpp>

#include <string>

#include "lrbp/errors.hpp"

namespace lrbp::json_util {

using nlohmann::json;

inline const json& field(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) throw FormatError(path + ": expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) throw FormatError(path + "." + key + ": missing field");
    return *it;
}

inline double to_double(const json& v, const std::string& path) {
    if (!v.is_number()) throw FormatError(path + ": expected a number");
    return v.get<double>();
}

inline long long to_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw FormatError(path + ": expected an integer");
    return v.get<long long>();
}

inline const json& to_array(const json& v, const std::string& path) {
    if (!v.is_array()) throw FormatError(path + ": expected an array");
    return v;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

inline Eigen::VectorXd vector_from_json(const json& v, const std::string& path) {
    to_array(v, path);
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = to_double(v[i], path + "[" + std::to_string(i) + "]");
    }
    return out;
}

// Matrices are arrays of rows.
inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

inline Eigen::MatrixXd matrix_from_json(const json& v, const std::string& path, Eigen::Index rows,
                                        Eigen::Index cols) {
    to_array(v, path);
    if (static_cast<Eigen::Index>(v.size()) != rows) {
        throw FormatError(path + ": expected " + std::to_string(rows) + " rows, got " + std::to_string(v.size()));
    }
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::string rp = path + "[" + std::to_string(r) + "]";
        const auto& row = to_array(v[static_cast<std::size_t>(r)], rp);
        if (static_cast<Eigen::Index>(row.size()) != cols) {
            throw FormatError(rp + ": expected " + std::to_string(cols) + " columns, got " + std::to_string(row.size()));
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            out(r, c) = to_double(row[static_cast<std::size_t>(c)], rp + "[" + std::to_string(c) + "]");
        }
    }
    return out;
}

}  // namespace lrbp::json_util
