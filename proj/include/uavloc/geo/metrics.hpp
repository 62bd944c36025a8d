// Copyright 2026 The uavloc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uavloc/core/error.hpp"
#include "uavloc/geo/georef.hpp"

namespace uavloc::geo {

inline constexpr double kSuccessThresholdMeters = 25.0;
inline constexpr double kDriftThresholdMeters = 50.0;

struct TrajectoryEval {
    std::vector<double> errors;
    std::vector<bool> drift;
    double success_rate = 0.0;
    double mle = 0.0;  // NaN when every frame drifted
    bool all_drift = false;

    [[nodiscard]] std::size_t drift_count() const {
        std::size_t n = 0;
        for (bool d : drift) n += d;
        return n;
    }
};

/// Success: error < 25 m, counted over all frames. Drift: error > 50 m.
/// MLE: mean error over non-drift frames. Non-finite errors (frames without
/// an estimate) count as drift.
inline TrajectoryEval evaluate_trajectory(const std::vector<double>& errors) {
    if (errors.empty()) throw ContractViolation("evaluate_trajectory: empty error list");
    TrajectoryEval ev;
    ev.errors = errors;
    std::size_t success = 0;
    std::size_t kept = 0;
    double sum = 0.0;
    for (double e : errors) {
        if (std::isnan(e) || e < 0.0) throw ContractViolation("evaluate_trajectory: errors must be >= 0");
        const bool drift = !(e <= kDriftThresholdMeters);
        ev.drift.push_back(drift);
        success += e < kSuccessThresholdMeters;
        if (!drift) {
            sum += e;
            ++kept;
        }
    }
    ev.success_rate = static_cast<double>(success) / static_cast<double>(errors.size());
    ev.all_drift = kept == 0;
    ev.mle = ev.all_drift ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(kept);
    return ev;
}

inline nlohmann::json metrics_json(const TrajectoryEval& ev) {
    nlohmann::json j;
    j["frames"] = ev.errors.size();
    j["success_rate"] = ev.success_rate;
    j["mle_m"] = ev.all_drift ? nlohmann::json(nullptr) : nlohmann::json(ev.mle);
    j["drift_frames"] = ev.drift_count();
    j["all_drift"] = ev.all_drift;
    j["success_threshold_m"] = kSuccessThresholdMeters;
    j["drift_threshold_m"] = kDriftThresholdMeters;
    return j;
}

/// One row of the results CSV:
/// frame_id,est_lat,est_lon,gt_lat,gt_lon,error_m,drift
struct ResultRow {
    std::string frame_id;
    GeoPoint estimate;
    GeoPoint ground_truth;
    double error_m = 0.0;
    bool drift = false;
};

inline constexpr const char* kResultsHeader = "frame_id,est_lat,est_lon,gt_lat,gt_lon,error_m,drift";

inline std::string format_results_csv(const std::vector<ResultRow>& rows) {
    std::string out = std::string(kResultsHeader) + "\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, ",%.9f,%.9f,%.9f,%.9f,%.4f,%d\n", r.estimate.lat, r.estimate.lon,
                      r.ground_truth.lat, r.ground_truth.lon, r.error_m, r.drift ? 1 : 0);
        out += r.frame_id;
        out += buf;
    }
    return out;
}

inline void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write results: " + path);
    out << format_results_csv(rows);
}

/// Reads the error column of a results CSV. A file whose header lacks
/// `error_m` is read as one error value per line.
inline std::vector<double> read_errors_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open results: " + path);
    std::string line;
    std::vector<double> errors;
    int column = -1;
    bool first = true;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (first) {
            first = false;
            for (std::size_t c = 0; c < fields.size(); ++c) {
                if (fields[c] == "error_m") column = static_cast<int>(c);
            }
            if (column >= 0) continue;
            column = 0;
        }
        if (column >= static_cast<int>(fields.size())) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": missing error_m column");
        }
        try {
            std::size_t used = 0;
            const double v = std::stod(fields[column], &used);
            if (used != fields[column].size()) throw std::invalid_argument("trailing characters");
            errors.push_back(v);
        } catch (const std::exception&) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": not a number: '" + fields[column] + "'");
        }
    }
    if (errors.empty()) throw FormatError(path + ": no error rows");
    return errors;
}

}  // namespace uavloc::geo
