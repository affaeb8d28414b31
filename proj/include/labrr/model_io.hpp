#pragma once

// JSON serialization of LabModel. Doubles are written in shortest
// round-trip form, so a loaded model predicts bit-identically.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "labrr/ridgeless.hpp"

namespace labrr {

inline constexpr const char *kModelFormat = "labrr-lab-model";
inline constexpr int kModelVersion = 1;

namespace detail {

using ordered_json = nlohmann::ordered_json;

inline ordered_json matrix_to_json(const RealMatrix &m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) { row.push_back(m(i, j)); }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline RealMatrix matrix_from_json(const ordered_json &j, Eigen::Index rows, Eigen::Index cols, const char *what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
        throw InvalidArgument(std::string("model: '") + what + "' must have " + std::to_string(rows) + " rows");
    }
    RealMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto &row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw InvalidArgument(std::string("model: '") + what + "' row " + std::to_string(i) + " must have " +
                                  std::to_string(cols) + " entries");
        }
        for (Eigen::Index c = 0; c < cols; ++c) { m(i, c) = row[static_cast<std::size_t>(c)].get<double>(); }
    }
    return m;
}

inline ordered_json range_to_json(const ColumnRange &r) {
    return ordered_json{{"min", r.min}, {"max", r.max}, {"degenerate", r.degenerate}};
}

inline ColumnRange range_from_json(const ordered_json &j) {
    return ColumnRange{j.at("min").get<double>(), j.at("max").get<double>(), j.at("degenerate").get<bool>()};
}

}  // namespace detail

inline std::string model_to_string(const LabModel &model) {
    using detail::ordered_json;
    ordered_json doc;
    doc["format"] = kModelFormat;
    doc["version"] = kModelVersion;
    doc["dim"] = model.dim();
    doc["n_support"] = model.n_support();
    doc["jitter"] = model.jitter;
    doc["theta_bounds"] = {model.theta.bounds().min, model.theta.bounds().max};
    doc["support_x"] = detail::matrix_to_json(model.support_x);
    doc["theta"] = detail::matrix_to_json(model.theta.values());
    doc["alpha"] = ordered_json::array();
    for (Eigen::Index i = 0; i < model.alpha.size(); ++i) { doc["alpha"].push_back(model.alpha(i)); }
    ordered_json features = ordered_json::array();
    for (const auto &r : model.norm_meta.features) { features.push_back(detail::range_to_json(r)); }
    doc["normalization"] = {{"features", std::move(features)}, {"label", detail::range_to_json(model.norm_meta.label)}};
    return doc.dump(2) + "\n";
}

inline LabModel model_from_string(const std::string &text) {
    using detail::ordered_json;
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::exception &e) {
        throw InvalidArgument(std::string("model: malformed JSON: ") + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != kModelFormat) { throw InvalidArgument("model: unexpected format tag"); }
        if (doc.at("version").get<int>() != kModelVersion) { throw InvalidArgument("model: unsupported version"); }
        const auto dim = doc.at("dim").get<Eigen::Index>();
        const auto n = doc.at("n_support").get<Eigen::Index>();
        const auto &bounds = doc.at("theta_bounds");

        LabModel model;
        model.jitter = doc.at("jitter").get<double>();
        model.support_x = detail::matrix_from_json(doc.at("support_x"), n, dim, "support_x");
        model.theta = BandwidthSet(detail::matrix_from_json(doc.at("theta"), n, dim, "theta"),
                                   BandwidthBounds{bounds.at(0).get<double>(), bounds.at(1).get<double>()});
        const auto &alpha = doc.at("alpha");
        if (static_cast<Eigen::Index>(alpha.size()) != n) { throw InvalidArgument("model: alpha length mismatch"); }
        model.alpha.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) { model.alpha(i) = alpha[static_cast<std::size_t>(i)].get<double>(); }
        const auto &norm = doc.at("normalization");
        for (const auto &r : norm.at("features")) { model.norm_meta.features.push_back(detail::range_from_json(r)); }
        if (static_cast<Eigen::Index>(model.norm_meta.features.size()) != dim) {
            throw InvalidArgument("model: normalization feature count mismatch");
        }
        model.norm_meta.label = detail::range_from_json(norm.at("label"));
        return model;
    } catch (const nlohmann::json::exception &e) {
        throw InvalidArgument(std::string("model: ") + e.what());
    }
}

inline void save_model(const LabModel &model, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) { throw IoError("cannot write '" + path + "'"); }
    out << model_to_string(model);
    if (!out) { throw IoError("write failed for '" + path + "'"); }
}

inline LabModel load_model(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) { throw IoError("cannot open '" + path + "'"); }
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_string(ss.str());
}

}  // namespace labrr
