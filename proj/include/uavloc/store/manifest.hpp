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

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uavloc/core/error.hpp"
#include "uavloc/geo/georef.hpp"

namespace uavloc::store {

struct FrameEntry {
    std::string frame_id;
    std::string image;     // path, relative to the manifest directory unless absolute
    std::string features;    // optional precomputed coarse feature tensor
    std::string descriptor;  // optional precomputed global descriptor tensor
    geo::GeoPoint ground_truth;
    double timestamp = 0.0;
};

struct MapEntry {
    std::string image;
    int width = 0;
    int height = 0;
    geo::GeoRef georef;
    int tile_size = 512;
    int overlap = 256;
};

struct DatasetManifest {
    MapEntry map;
    std::vector<FrameEntry> frames;
    std::filesystem::path base_dir;  // directory the relative paths refer to

    [[nodiscard]] std::filesystem::path resolve(const std::string& p) const {
        const std::filesystem::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    }
};

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : m.frames) {
        nlohmann::json j{{"frame_id", f.frame_id},
                         {"image", f.image},
                         {"gt_lat", f.ground_truth.lat},
                         {"gt_lon", f.ground_truth.lon},
                         {"timestamp", f.timestamp}};
        if (!f.features.empty()) j["features"] = f.features;
        if (!f.descriptor.empty()) j["descriptor"] = f.descriptor;
        frames.push_back(std::move(j));
    }
    return {{"version", 1},
            {"map",
             {{"image", m.map.image},
              {"width", m.map.width},
              {"height", m.map.height},
              {"georef", m.map.georef},
              {"tile_size", m.map.tile_size},
              {"overlap", m.map.overlap}}},
            {"frames", frames}};
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest: " + path.string());
    out << manifest_to_json(m).dump(2) << '\n';
}

/// Parses a manifest and checks that frame ids are unique and every
/// referenced file exists. `check_paths` may be disabled for tests.
inline DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                          bool check_paths = true) {
    DatasetManifest m;
    m.base_dir = base_dir;
    try {
        const auto& map = j.at("map");
        m.map.image = map.at("image").get<std::string>();
        m.map.width = map.at("width").get<int>();
        m.map.height = map.at("height").get<int>();
        m.map.georef = map.at("georef").get<geo::GeoRef>();
        m.map.tile_size = map.value("tile_size", 512);
        m.map.overlap = map.value("overlap", 256);
        std::set<std::string> seen;
        for (const auto& f : j.at("frames")) {
            FrameEntry e;
            e.frame_id = f.at("frame_id").get<std::string>();
            e.image = f.value("image", std::string());
            e.features = f.value("features", std::string());
            e.descriptor = f.value("descriptor", std::string());
            if (e.image.empty() && e.features.empty()) {
                throw FormatError("frame " + e.frame_id + " has neither an image nor a feature path");
            }
            if (!f.contains("gt_lat") || !f.contains("gt_lon")) {
                throw FormatError("frame " + e.frame_id + " lacks gt_lat/gt_lon");
            }
            e.ground_truth = {f.at("gt_lat").get<double>(), f.at("gt_lon").get<double>()};
            e.timestamp = f.value("timestamp", 0.0);
            if (!seen.insert(e.frame_id).second) throw FormatError("duplicate frame_id " + e.frame_id);
            m.frames.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    if (m.map.width < 1 || m.map.height < 1) throw FormatError("manifest: map dimensions must be positive");
    if (check_paths) {
        auto require = [&](const std::string& p) {
            if (!p.empty() && !std::filesystem::exists(m.resolve(p))) {
                throw IoError("manifest references a missing file: " + m.resolve(p).string());
            }
        };
        require(m.map.image);
        for (const auto& f : m.frames) {
            require(f.image);
            require(f.features);
            require(f.descriptor);
        }
    }
    return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return manifest_from_json(j, path.parent_path());
}

}  // namespace uavloc::store
