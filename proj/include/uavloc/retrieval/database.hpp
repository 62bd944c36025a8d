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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uavloc/core/error.hpp"
#include "uavloc/core/geometry.hpp"
#include "uavloc/geo/georef.hpp"
#include "uavloc/store/tensor_file.hpp"

namespace uavloc::retrieval {

struct TileRecord {
    int tile_id = 0;
    PixelRect rect;          // in the source map
    geo::GeoRef georef;      // of the tile's own pixel (0, 0)
    std::vector<double> descriptor;
    std::string dense_features;  // tensor file, relative to the database directory; may be empty
};

struct RankedTile {
    int tile_id = 0;
    double similarity = 0.0;
    friend bool operator==(const RankedTile&, const RankedTile&) = default;
};

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DimensionError("cosine_similarity: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t q = 0; q < a.size(); ++q) {
        dot += a[q] * b[q];
        na += a[q] * a[q];
        nb += b[q] * b[q];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Exhaustive cosine ranking; descending similarity, ties to the lower id.
inline std::vector<RankedTile> query_top_k(const std::vector<double>& query, const std::vector<TileRecord>& db,
                                           int k) {
    if (db.empty()) throw ConfigError("query_top_k: empty database");
    if (k < 1) throw ConfigError("query_top_k: k must be >= 1");
    std::vector<RankedTile> all;
    all.reserve(db.size());
    for (const auto& t : db) all.push_back({t.tile_id, cosine_similarity(query, t.descriptor)});
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(k), all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(),
                      [](const RankedTile& a, const RankedTile& b) {
                          if (a.similarity != b.similarity) return a.similarity > b.similarity;
                          return a.tile_id < b.tile_id;
                      });
    all.resize(n);
    return all;
}

/// Tile database: JSON manifest plus one N x d descriptor tensor file and
/// optional per-tile dense feature files.
struct TileDatabase {
    std::string map_image;  // relative to the database directory, or absolute
    int map_width = 0;
    int map_height = 0;
    geo::GeoRef map_georef;
    int tile_size = 512;
    int overlap = 256;
    std::string backend;
    std::vector<TileRecord> tiles;

    [[nodiscard]] const TileRecord& tile(int id) const {
        for (const auto& t : tiles) {
            if (t.tile_id == id) return t;
        }
        throw ContractViolation("unknown tile id " + std::to_string(id));
    }
};

inline constexpr const char* kDatabaseManifest = "db.json";
inline constexpr const char* kDescriptorFile = "descriptors.glft";

inline void save_database(const TileDatabase& db, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    if (db.tiles.empty()) throw ConfigError("save_database: no tiles");
    const std::size_t dim = db.tiles.front().descriptor.size();
    std::vector<float> desc;
    desc.reserve(db.tiles.size() * dim);
    nlohmann::json tiles = nlohmann::json::array();
    for (const auto& t : db.tiles) {
        if (t.descriptor.size() != dim) throw DimensionError("save_database: inconsistent descriptor size");
        for (double v : t.descriptor) desc.push_back(static_cast<float>(v));
        tiles.push_back({{"tile_id", t.tile_id},
                         {"rect", {t.rect.x0, t.rect.y0, t.rect.x1, t.rect.y1}},
                         {"georef", t.georef},
                         {"dense_features", t.dense_features}});
    }
    const std::uint32_t dims[2] = {static_cast<std::uint32_t>(db.tiles.size()), static_cast<std::uint32_t>(dim)};
    store::write_tensor((dir / kDescriptorFile).string(), desc, dims, {{"kind", "global_descriptors"}});
    nlohmann::json j;
    j["version"] = 1;
    j["map"] = {{"image", db.map_image},
                {"width", db.map_width},
                {"height", db.map_height},
                {"georef", db.map_georef},
                {"tile_size", db.tile_size},
                {"overlap", db.overlap}};
    j["backend"] = db.backend;
    j["descriptors"] = kDescriptorFile;
    j["tiles"] = tiles;
    std::ofstream out(dir / kDatabaseManifest, std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / kDatabaseManifest).string());
    out << j.dump(2) << '\n';
}

inline TileDatabase load_database(const std::filesystem::path& dir) {
    const auto manifest = dir / kDatabaseManifest;
    std::ifstream in(manifest);
    if (!in) throw IoError("cannot open database manifest: " + manifest.string());
    TileDatabase db;
    try {
        const auto j = nlohmann::json::parse(in);
        const auto& m = j.at("map");
        db.map_image = m.at("image").get<std::string>();
        db.map_width = m.at("width").get<int>();
        db.map_height = m.at("height").get<int>();
        db.map_georef = m.at("georef").get<geo::GeoRef>();
        db.tile_size = m.at("tile_size").get<int>();
        db.overlap = m.at("overlap").get<int>();
        db.backend = j.value("backend", std::string());
        const auto rec = store::read_tensor((dir / j.at("descriptors").get<std::string>()).string());
        const auto& tiles = j.at("tiles");
        if (rec.dims.size() != 2 || rec.dims[0] != tiles.size()) {
            throw FormatError("descriptor tensor does not match the tile list");
        }
        const std::size_t dim = rec.dims[1];
        for (std::size_t n = 0; n < tiles.size(); ++n) {
            const auto& t = tiles[n];
            TileRecord r;
            r.tile_id = t.at("tile_id").get<int>();
            const auto rect = t.at("rect").get<std::vector<int>>();
            if (rect.size() != 4) throw FormatError("tile rect must have 4 entries");
            r.rect = {rect[0], rect[1], rect[2], rect[3]};
            if (r.rect.empty() || !r.rect.inside(db.map_width, db.map_height)) {
                throw FormatError("tile " + std::to_string(r.tile_id) + " lies outside the map");
            }
            r.georef = t.at("georef").get<geo::GeoRef>();
            r.dense_features = t.value("dense_features", std::string());
            r.descriptor.assign(rec.data.begin() + static_cast<std::ptrdiff_t>(n * dim),
                                rec.data.begin() + static_cast<std::ptrdiff_t>((n + 1) * dim));
            db.tiles.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(manifest.string() + ": " + e.what());
    }
    return db;
}

}  // namespace uavloc::retrieval
