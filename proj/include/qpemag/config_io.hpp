// Copyright 2026 The qpemag Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// JSON run/sweep configuration, CSV result tables and run manifests.
//
// Config schema (every key optional; unknown keys are errors):
//   scheme        "adaptive" | "nonadaptive"                  default "adaptive"
//   K             int >= 0, or array of them (sweep axis)     default 8
//   M             int >= 1 (adaptive only)                    default 6
//   M_K, F        int (nonadaptive only)                      default 6, 2
//   M_K_F         array of [M_K, F] pairs (sweep axis)
//   T2_over_tau   number > 0 or "inf"                         default "inf"
//   f_d           number in [0, 1], or array (sweep axis)
//   f_a, f_i      numbers, f_a may be an array (sweep axis)   default 1, 0
//   S             int >= 1                                    default 1000
//   seed          unsigned 64-bit int                         default 0
//   initial_phase number                                      default 0
//   stage_order   array of each of 0..K once (nonadaptive)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "qpemag/errors.hpp"
#include "qpemag/estimation_engine.hpp"

namespace qpemag {

inline constexpr const char *kToolVersion = "qpemag 1.0.0";

/// Ensemble size allowed without full-scale mode.
inline constexpr std::uint64_t kDefaultMaxTrials = 10000;

/// A resolved configuration: the base trial settings plus any sweep axes.
/// Axis values override the base per cell; the base holds the first value of
/// each axis so that a single-cell run is well defined.
struct RunConfig {
    TrialConfig base;
    SweepAxes axes;

    bool is_sweep() const {
        return !axes.empty();
    }
    std::vector<TrialConfig> cells() const {
        return sweep_cells(base, axes);
    }
    bool operator==(const RunConfig &) const = default;
};

namespace detail {

using nlohmann::json;

inline std::string child(const std::string &path, const std::string &key) {
    return path.empty() ? key : path + "." + key;
}
inline std::string child(const std::string &path, std::size_t index) {
    return path + "[" + std::to_string(index) + "]";
}

inline std::uint64_t get_uint(const json &v, const std::string &path, std::uint64_t min = 0) {
    if (v.is_number_unsigned()) {
        const auto x = v.get<std::uint64_t>();
        if (x < min) {
            throw ConfigError(path, "must be at least " + std::to_string(min));
        }
        return x;
    }
    if (v.is_number_integer()) {
        throw ConfigError(path, "must be non-negative (got " + v.dump() + ")");
    }
    throw ConfigError(path, "expected an integer, got " + std::string(v.type_name()));
}

inline unsigned get_exponent(const json &v, const std::string &path) {
    const std::uint64_t k = get_uint(v, path);
    if (k > kHighMemoryMaxExponent) {
        throw ConfigError(path, "K = " + std::to_string(k) + " exceeds the supported maximum of " +
                                    std::to_string(kHighMemoryMaxExponent));
    }
    return static_cast<unsigned>(k);
}

inline double get_number(const json &v, const std::string &path) {
    if (!v.is_number()) {
        throw ConfigError(path, "expected a number, got " + std::string(v.type_name()));
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        throw ConfigError(path, "must be finite");
    }
    return x;
}

inline double get_probability(const json &v, const std::string &path) {
    const double x = get_number(v, path);
    if (x < 0.0 || x > 1.0) {
        throw ConfigError(path, "must lie in [0, 1] (got " + v.dump() + ")");
    }
    return x;
}

template <typename T, typename F>
std::vector<T> get_list(const json &v, const std::string &path, F &&element) {
    if (v.empty()) {
        throw ConfigError(path, "axis array must not be empty");
    }
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(element(v[i], child(path, i)));
    }
    return out;
}

inline json number_or_inf(double x) {
    return std::isinf(x) ? json("inf") : json(x);
}

}  // namespace detail

/// Parses and validates a configuration document.
inline RunConfig parse_config(const nlohmann::json &doc) {
    using detail::json;
    if (!doc.is_object()) {
        throw ConfigError("", "configuration must be a JSON object");
    }
    static const std::vector<std::string> known = {"scheme", "K",  "M",   "M_K", "F",    "M_K_F",         "T2_over_tau",
                                                   "f_d",    "f_a", "f_i", "S",   "seed", "initial_phase", "stage_order"};
    for (const auto &[key, value] : doc.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError(key, "unknown key");
        }
    }
    RunConfig rc;
    TrialConfig &c = rc.base;

    if (doc.contains("scheme")) {
        const json &v = doc["scheme"];
        if (v == "adaptive") {
            c.scheme = Scheme::adaptive;
        } else if (v == "nonadaptive") {
            c.scheme = Scheme::nonadaptive;
        } else {
            throw ConfigError("scheme", "must be \"adaptive\" or \"nonadaptive\" (got " + v.dump() + ")");
        }
    }
    const bool adaptive = c.scheme == Scheme::adaptive;
    for (const char *key : {"M_K", "F", "M_K_F", "stage_order"}) {
        if (adaptive && doc.contains(key)) {
            throw ConfigError(key, "applies only to the nonadaptive scheme");
        }
    }
    if (!adaptive && doc.contains("M")) {
        throw ConfigError("M", "applies only to the adaptive scheme; use M_K and F");
    }

    if (doc.contains("K")) {
        const json &v = doc["K"];
        if (v.is_array()) {
            rc.axes.K = detail::get_list<unsigned>(v, "K", detail::get_exponent);
            c.K = rc.axes.K.front();
        } else {
            c.K = detail::get_exponent(v, "K");
        }
    }
    if (doc.contains("M")) {
        c.M = detail::get_uint(doc["M"], "M", 1);
    }
    if (doc.contains("M_K_F") && (doc.contains("M_K") || doc.contains("F"))) {
        throw ConfigError("M_K_F", "conflicts with scalar " + std::string(doc.contains("M_K") ? "M_K" : "F"));
    }
    if (doc.contains("M_K")) {
        c.M_K = detail::get_uint(doc["M_K"], "M_K", 1);
    }
    if (doc.contains("F")) {
        c.F = detail::get_uint(doc["F"], "F");
    }
    if (doc.contains("M_K_F")) {
        const json &v = doc["M_K_F"];
        if (!v.is_array()) {
            throw ConfigError("M_K_F", "expected an array of [M_K, F] pairs");
        }
        rc.axes.M_K_F = detail::get_list<std::pair<std::uint64_t, std::uint64_t>>(
            v, "M_K_F", [](const json &p, const std::string &path) {
                if (!p.is_array() || p.size() != 2) {
                    throw ConfigError(path, "expected a [M_K, F] pair");
                }
                return std::pair{detail::get_uint(p[0], detail::child(path, 0), 1),
                                 detail::get_uint(p[1], detail::child(path, 1))};
            });
        c.M_K = rc.axes.M_K_F.front().first;
        c.F = rc.axes.M_K_F.front().second;
    }

    if (doc.contains("T2_over_tau")) {
        const json &v = doc["T2_over_tau"];
        if (v == "inf") {
            c.T2_over_tau = std::numeric_limits<double>::infinity();
        } else {
            c.T2_over_tau = detail::get_number(v, "T2_over_tau");
            if (!(c.T2_over_tau > 0.0)) {
                throw ConfigError("T2_over_tau", "must be positive");
            }
        }
    }

    if (doc.contains("f_d")) {
        if (doc.contains("f_a") || doc.contains("f_i")) {
            throw ConfigError("f_d", std::string("contradicts ") + (doc.contains("f_a") ? "f_a" : "f_i") +
                                         ": give either f_d or (f_a, f_i), not both");
        }
        const json &v = doc["f_d"];
        if (v.is_array()) {
            rc.axes.f_d = detail::get_list<double>(v, "f_d", detail::get_probability);
            c.contrast = Contrast::from_visibility(rc.axes.f_d.front());
        } else {
            c.contrast = Contrast::from_visibility(detail::get_probability(v, "f_d"));
        }
    } else {
        if (doc.contains("f_i")) {
            c.contrast.low = detail::get_probability(doc["f_i"], "f_i");
        }
        std::vector<double> highs{c.contrast.high};
        if (doc.contains("f_a")) {
            const json &v = doc["f_a"];
            if (v.is_array()) {
                rc.axes.f_a = detail::get_list<double>(v, "f_a", detail::get_probability);
                highs = rc.axes.f_a;
            } else {
                highs = {detail::get_probability(v, "f_a")};
            }
            c.contrast.high = highs.front();
        }
        for (std::size_t i = 0; i < highs.size(); ++i) {
            if (c.contrast.low > highs[i]) {
                throw ConfigError(rc.axes.f_a.empty() ? "f_i" : detail::child("f_a", i),
                                  "f_i = " + std::to_string(c.contrast.low) + " exceeds f_a = " + std::to_string(highs[i]));
            }
        }
    }

    if (doc.contains("S")) {
        c.S = detail::get_uint(doc["S"], "S", 1);
    }
    if (doc.contains("seed")) {
        c.master_seed = detail::get_uint(doc["seed"], "seed");
    }
    if (doc.contains("initial_phase")) {
        c.initial_phase = detail::get_number(doc["initial_phase"], "initial_phase");
    }
    if (doc.contains("stage_order")) {
        const json &v = doc["stage_order"];
        if (!v.is_array()) {
            throw ConfigError("stage_order", "expected an array of exponents");
        }
        if (!rc.axes.K.empty()) {
            throw ConfigError("stage_order", "cannot be combined with a K sweep");
        }
        c.stage_order = detail::get_list<unsigned>(v, "stage_order", detail::get_exponent);
    }

    for (const auto &cell : rc.cells()) {
        try {
            cell.validate();
        } catch (const std::invalid_argument &e) {
            throw ConfigError("", e.what());
        }
    }
    return rc;
}

inline RunConfig parse_config_text(const std::string &text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return parse_config(doc);
}

inline RunConfig load_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("", "cannot open config file '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

/// The fully resolved configuration as a document parse_config accepts.
inline nlohmann::json to_json(const RunConfig &rc) {
    nlohmann::json j;
    const TrialConfig &c = rc.base;
    j["scheme"] = to_string(c.scheme);
    if (rc.axes.K.empty()) {
        j["K"] = c.K;
    } else {
        j["K"] = rc.axes.K;
    }
    if (c.scheme == Scheme::adaptive) {
        j["M"] = c.M;
    } else if (rc.axes.M_K_F.empty()) {
        j["M_K"] = c.M_K;
        j["F"] = c.F;
    } else {
        nlohmann::json pairs = nlohmann::json::array();
        for (auto [mk, f] : rc.axes.M_K_F) {
            pairs.push_back({mk, f});
        }
        j["M_K_F"] = pairs;
    }
    j["T2_over_tau"] = detail::number_or_inf(c.T2_over_tau);
    if (!rc.axes.f_d.empty()) {
        j["f_d"] = rc.axes.f_d;
    } else {
        if (rc.axes.f_a.empty()) {
            j["f_a"] = c.contrast.high;
        } else {
            j["f_a"] = rc.axes.f_a;
        }
        j["f_i"] = c.contrast.low;
    }
    j["S"] = c.S;
    j["seed"] = c.master_seed;
    j["initial_phase"] = c.initial_phase;
    if (!c.stage_order.empty()) {
        j["stage_order"] = c.stage_order;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Figure presets
// ---------------------------------------------------------------------------

inline std::vector<unsigned> exponent_range(unsigned first, unsigned last) {
    std::vector<unsigned> ks;
    for (unsigned k = first; k <= last; ++k) {
        ks.push_back(k);
    }
    return ks;
}

/// Preset sweeps for the published figures. The desk-scale defaults truncate
/// K and S; `full_scale` restores the published ranges.
///   fig2: adaptive, M = 6, f_d = 1, T2/tau = 1e3
///   fig3: nonadaptive, M_K = 6, F = 2, f_d in {0.82, ..., 0.98}, T2/tau = 1e3
///   fig4: nonadaptive, (M_K, F) in {8,12,16} x {8,12}, f_a in {0.55, ..., 0.85},
///         f_i = 0.05, T2/tau = 1e3, K = 1..8
inline RunConfig figure_preset(const std::string &name, bool full_scale) {
    RunConfig rc;
    TrialConfig &c = rc.base;
    c.T2_over_tau = 1e3;
    if (name == "fig2") {
        c.scheme = Scheme::adaptive;
        c.M = 6;
        rc.axes.K = exponent_range(1, full_scale ? 20 : 10);
        c.S = 1000;
    } else if (name == "fig3") {
        c.scheme = Scheme::nonadaptive;
        c.M_K = 6;
        c.F = 2;
        rc.axes.f_d = {0.82, 0.86, 0.90, 0.94, 0.98};
        c.contrast = Contrast::from_visibility(rc.axes.f_d.front());
        rc.axes.K = exponent_range(1, full_scale ? 20 : 10);
        c.S = full_scale ? 5000 : 1000;
    } else if (name == "fig4") {
        c.scheme = Scheme::nonadaptive;
        rc.axes.M_K_F = {{8, 8}, {12, 8}, {16, 8}, {8, 12}, {12, 12}, {16, 12}};
        c.M_K = 8;
        c.F = 8;
        rc.axes.f_a = {0.55, 0.65, 0.75, 0.85};
        c.contrast = {0.55, 0.05};
        rc.axes.K = exponent_range(1, 8);
        c.S = full_scale ? 10000 : 2000;
    } else {
        throw ConfigError("figure", "unknown figure '" + name + "' (expected fig2, fig3 or fig4)");
    }
    c.K = rc.axes.K.front();
    return rc;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr const char *kCsvHeader =
    "scheme,K,M,M_K,F,f_a,f_i,T2_over_tau,S,seed,T_tilde,V_H,V_H_err,V_H_T,stderr_V_H,invalid_trials";

/// %.17g, with infinities as `inf` / `-inf` and NaN as `nan`.
inline std::string format_number(double x) {
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// One CSV line (without newline). Fields that do not apply to the scheme are
/// left empty; a failed cell has empty result fields.
inline std::string csv_row(const SweepRow &row) {
    const TrialConfig &c = row.config;
    const bool adaptive = c.scheme == Scheme::adaptive;
    std::ostringstream out;
    out << to_string(c.scheme) << ',' << c.K << ',';
    if (adaptive) {
        out << c.M << ",,,";
    } else {
        out << ',' << c.M_K << ',' << c.F << ',';
    }
    out << format_number(c.contrast.high) << ',' << format_number(c.contrast.low) << ','
        << format_number(c.T2_over_tau) << ',' << c.S << ',' << c.master_seed << ',';
    out << resource_time(c.schedule()) << ',';
    if (row.result) {
        const AggregateResult &r = *row.result;
        out << format_number(r.V_H) << ',' << format_number(r.V_H_err) << ',' << format_number(r.product) << ','
            << format_number(r.stderr_V_H) << ',' << r.invalid_trials;
    } else {
        out << ",,,,";
    }
    return out.str();
}

inline void emit_csv(const std::vector<SweepRow> &rows, std::ostream &out) {
    if (rows.empty()) {
        throw std::invalid_argument("emit_csv: no rows");
    }
    out << kCsvHeader << '\n';
    for (const auto &row : rows) {
        out << csv_row(row) << '\n';
    }
}

inline void emit_csv(const std::vector<SweepRow> &rows, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    emit_csv(rows, out);
    out.flush();
    if (!out) {
        throw std::runtime_error("failed writing '" + path + "'");
    }
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct RunManifest {
    std::string version = kToolVersion;
    RunConfig config;
    std::uint64_t seed = 0;
    double duration_seconds = 0.0;
    std::size_t rows = 0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["version"] = version;
        j["config"] = qpemag::to_json(config);
        j["seed"] = seed;
        j["duration_seconds"] = duration_seconds;
        j["rows"] = rows;
        return j;
    }

    static RunManifest from_json(const nlohmann::json &j) {
        RunManifest m;
        try {
            m.version = j.at("version").get<std::string>();
            m.config = parse_config(j.at("config"));
            m.seed = j.at("seed").get<std::uint64_t>();
            m.duration_seconds = j.at("duration_seconds").get<double>();
            m.rows = j.at("rows").get<std::size_t>();
        } catch (const nlohmann::json::exception &e) {
            throw ConfigError("manifest", e.what());
        }
        return m;
    }
};

/// Writes `<csv path>.manifest.json` next to the CSV.
inline std::string manifest_path(const std::string &csv_path) {
    return csv_path + ".manifest.json";
}

inline void write_manifest(const RunManifest &m, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    out << m.to_json().dump(2) << '\n';
}

}  // namespace qpemag
