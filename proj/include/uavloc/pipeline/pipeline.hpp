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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uavloc/backends/fallback.hpp"
#include "uavloc/core/error.hpp"
#include "uavloc/core/image.hpp"
#include "uavloc/fine/classical.hpp"
#include "uavloc/fine/homography.hpp"
#include "uavloc/fine/keypoints.hpp"
#include "uavloc/fine/neural.hpp"
#include "uavloc/geo/georef.hpp"
#include "uavloc/geo/metrics.hpp"
#include "uavloc/retrieval/database.hpp"
#include "uavloc/retrieval/tiling.hpp"
#include "uavloc/sascm/coarse.hpp"
#include "uavloc/sascm/model_io.hpp"
#include "uavloc/store/feature_io.hpp"
#include "uavloc/store/manifest.hpp"

namespace uavloc::pipeline {

enum class FrameStatus { ok, fine_fail, retrieval_only, input_error };

inline std::string to_string(FrameStatus s) {
    switch (s) {
        case FrameStatus::ok: return "ok";
        case FrameStatus::fine_fail: return "fine_fail";
        case FrameStatus::retrieval_only: return "retrieval_only";
        case FrameStatus::input_error: return "input_error";
    }
    return "unknown";
}

/// How far the pipeline runs: `retrieval` stops after tile retrieval and
/// reports the tile centre.
enum class Mode { full, retrieval };

struct PipelineConfig {
    int top_k = 3;
    int tile_size = 512;
    int overlap = 256;
    std::string coarse_backend = "fallback";  // fallback | neural (precomputed exporter features)
    std::string fine_backend = "fallback";    // fallback | neural
    backends::FallbackConfig coarse_features{8, 14};
    backends::FallbackConfig retrieval_features{16, 14};
    // Random texture stays below this match score; real frames exceed it on
    // at least one candidate.
    sascm::CoarseMatchConfig coarse{.score_threshold = 2e-3};
    fine::FineConfig fine;
    fine::ClassicalConfig classical;
    std::string sascm_weights;  // model directory; empty selects the hand-set consensus prior
    std::string fine_weights;   // neural fine backend directory
    std::uint64_t seed = 0;
    Mode mode = Mode::full;

    void validate() const {
        if (top_k < 1) throw ConfigError("k must be >= 1");
        if (tile_size < 32 || overlap < 0 || overlap >= tile_size) throw ConfigError("need tile_size > overlap >= 0");
        for (const auto* b : {&coarse_backend, &fine_backend}) {
            if (*b != "fallback" && *b != "neural") throw ConfigError("backend must be 'fallback' or 'neural', got '" + *b + "'");
        }
        coarse_features.validate();
        retrieval_features.validate();
        coarse.validate();
        fine.validate();
        if (fine_backend == "neural" && fine_weights.empty()) throw ConfigError("neural fine backend needs fine_weights");
    }
};

inline nlohmann::json to_json(const PipelineConfig& c) {
    return {{"k", c.top_k},
            {"tile_size", c.tile_size},
            {"overlap", c.overlap},
            {"coarse_backend", c.coarse_backend},
            {"fine_backend", c.fine_backend},
            {"coarse_grid", c.coarse_features.grid},
            {"retrieval_grid", c.retrieval_features.grid},
            {"center_neighborhood", c.coarse.center_neighborhood},
            {"region_margin", c.coarse.region_margin},
            {"score_threshold", c.coarse.score_threshold},
            {"sigma", c.fine.sigma},
            {"ransac_threshold", c.fine.ransac_threshold},
            {"ransac_max_iters", c.fine.ransac_max_iters},
            {"ransac_confidence", c.fine.ransac_confidence},
            {"max_keypoints", c.fine.max_keypoints},
            {"min_inliers", c.fine.min_inliers},
            {"sascm_weights", c.sascm_weights},
            {"fine_weights", c.fine_weights},
            {"seed", c.seed},
            {"mode", c.mode == Mode::full ? "full" : "retrieval"}};
}

/// Overlays the keys present in `j` onto `c`; unknown keys are a config error.
inline void apply_json(PipelineConfig& c, const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "k") c.top_k = v.get<int>();
            else if (key == "tile_size") c.tile_size = v.get<int>();
            else if (key == "overlap") c.overlap = v.get<int>();
            else if (key == "coarse_backend") c.coarse_backend = v.get<std::string>();
            else if (key == "fine_backend") c.fine_backend = v.get<std::string>();
            else if (key == "coarse_grid") c.coarse_features.grid = v.get<int>();
            else if (key == "retrieval_grid") c.retrieval_features.grid = v.get<int>();
            else if (key == "center_neighborhood") c.coarse.center_neighborhood = v.get<int>();
            else if (key == "region_margin") c.coarse.region_margin = v.get<int>();
            else if (key == "score_threshold") c.coarse.score_threshold = v.get<double>();
            else if (key == "sigma") c.fine.sigma = v.get<double>();
            else if (key == "ransac_threshold") c.fine.ransac_threshold = v.get<double>();
            else if (key == "ransac_max_iters") c.fine.ransac_max_iters = v.get<int>();
            else if (key == "ransac_confidence") c.fine.ransac_confidence = v.get<double>();
            else if (key == "max_keypoints") c.fine.max_keypoints = v.get<int>();
            else if (key == "min_inliers") c.fine.min_inliers = v.get<int>();
            else if (key == "sascm_weights") c.sascm_weights = v.get<std::string>();
            else if (key == "fine_weights") c.fine_weights = v.get<std::string>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "mode") {
                const auto m = v.get<std::string>();
                if (m != "full" && m != "retrieval") throw ConfigError("mode must be 'full' or 'retrieval'");
                c.mode = m == "full" ? Mode::full : Mode::retrieval;
            } else {
                throw ConfigError("unknown pipeline config key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("pipeline config: ") + e.what());
    }
}

struct FrameResult {
    std::string frame_id;
    FrameStatus status = FrameStatus::input_error;
    int tile_id = -1;
    double retrieval_similarity = 0.0;
    std::optional<sascm::RegionCorrespondence> region;
    std::optional<fine::Homography> homography;  // region A pixels -> region B pixels
    int inliers = 0;
    int candidates_tried = 0;
    Point2 map_pixel{std::nan(""), std::nan("")};
    geo::GeoPoint estimate{std::nan(""), std::nan("")};
    std::string message;
};

inline nlohmann::json to_json(const FrameResult& r) {
    nlohmann::json j{{"frame_id", r.frame_id},
                     {"status", to_string(r.status)},
                     {"tile_id", r.tile_id},
                     {"retrieval_similarity", r.retrieval_similarity},
                     {"inliers", r.inliers},
                     {"candidates_tried", r.candidates_tried},
                     {"map_pixel", {r.map_pixel.x, r.map_pixel.y}},
                     {"estimate", {r.estimate.lat, r.estimate.lon}},
                     {"message", r.message}};
    if (r.region) {
        const auto& u = r.region->uav_region;
        const auto& s = r.region->sat_region;
        j["uav_region"] = {u.x0, u.y0, u.x1, u.y1};
        j["sat_region"] = {s.x0, s.y0, s.x1, s.y1};
        j["region_confidence"] = r.region->confidence;
    }
    if (r.homography) {
        const auto& m = r.homography->matrix();
        j["homography"] = {{m(0, 0), m(0, 1), m(0, 2)}, {m(1, 0), m(1, 1), m(1, 2)}, {m(2, 0), m(2, 1), m(2, 2)}};
    }
    return j;
}

/// Per-frame inputs. The image is required for the fallback backends and
/// the fine stage; precomputed features and descriptors are optional.
struct FrameInput {
    std::string frame_id;
    std::optional<Image> image;
    std::optional<DenseFeatureMap> coarse_features;
    std::optional<std::vector<double>> descriptor;
};

/// Central square crop resized to `size`.
inline Image preprocess_frame(const Image& frame, int size) {
    if (frame.empty()) throw DimensionError("empty frame");
    const int side = std::min(frame.width(), frame.height());
    const int x0 = (frame.width() - side) / 2, y0 = (frame.height() - side) / 2;
    Image sq = (side == frame.width() && side == frame.height()) ? frame : crop(frame, {x0, y0, x0 + side, y0 + side});
    return side == size ? sq : resize(sq, size, size);
}

inline std::string dense_file_name(int tile_id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "dense/tile_%04d.glft", tile_id);
    return buf;
}

inline std::string tile_file_stem(int tile_id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "tile_%04d", tile_id);
    return buf;
}

struct BuildOptions {
    std::filesystem::path descriptors_from;  // <dir>/tile_NNNN.glft global descriptors from the exporter
    std::filesystem::path features_from;     // <dir>/tile_NNNN.glft dense features from the exporter
    std::filesystem::path write_tiles;       // dump tile images for the exporter
};

/// Tiles the map, describes every tile and writes the database into `out_dir`.
inline retrieval::TileDatabase build_database(const std::filesystem::path& map_path, const geo::GeoRef& georef,
                                              const PipelineConfig& cfg, const std::filesystem::path& out_dir,
                                              const BuildOptions& opts = {}) {
    cfg.validate();
    georef.validate();
    const Image map = read_pnm(map_path.string());
    std::filesystem::create_directories(out_dir / "dense");
    if (!opts.write_tiles.empty()) std::filesystem::create_directories(opts.write_tiles);
    retrieval::TileDatabase db;
    db.map_image = std::filesystem::absolute(map_path).string();
    db.map_width = map.width();
    db.map_height = map.height();
    db.map_georef = georef;
    db.tile_size = cfg.tile_size;
    db.overlap = cfg.overlap;
    db.backend = opts.descriptors_from.empty() ? "fallback" : "neural";
    const auto rects = retrieval::tile_satellite_map(map.width(), map.height(), cfg.tile_size, cfg.overlap);
    for (std::size_t n = 0; n < rects.size(); ++n) {
        const int id = static_cast<int>(n);
        const Image tile = crop(map, rects[n]);
        if (!opts.write_tiles.empty()) write_pnm((opts.write_tiles / (tile_file_stem(id) + ".ppm")).string(), tile);
        retrieval::TileRecord rec;
        rec.tile_id = id;
        rec.rect = rects[n];
        rec.georef = geo::sub_georef(georef, {static_cast<double>(rects[n].x0), static_cast<double>(rects[n].y0)});
        if (opts.descriptors_from.empty()) {
            rec.descriptor = backends::global_descriptor(tile, cfg.retrieval_features);
        } else {
            rec.descriptor = retrieval::l2_normalized(
                store::read_descriptor((opts.descriptors_from / (tile_file_stem(id) + ".glft")).string()));
        }
        DenseFeatureMap dense = opts.features_from.empty()
                                    ? backends::coarse_features(tile, cfg.coarse_features)
                                    : store::read_feature_map((opts.features_from / (tile_file_stem(id) + ".glft")).string());
        rec.dense_features = dense_file_name(id);
        store::write_feature_map((out_dir / rec.dense_features).string(), dense, {{"tile_id", id}});
        db.tiles.push_back(std::move(rec));
    }
    retrieval::save_database(db, out_dir);
    return db;
}

/// Read-only localisation state: database, map, dense tile features and
/// models. Safe to share across threads.
class Localizer {
public:
    Localizer(retrieval::TileDatabase db, const std::filesystem::path& db_dir, PipelineConfig cfg)
        : db_(std::move(db)), cfg_(std::move(cfg)) {
        cfg_.validate();
        if (db_.tiles.empty()) throw ConfigError("empty tile database");
        const std::filesystem::path map_path(db_.map_image);
        map_ = read_pnm((map_path.is_absolute() ? map_path : db_dir / map_path).string());
        if (map_.width() != db_.map_width || map_.height() != db_.map_height) {
            throw FormatError("map image size does not match the database");
        }
        for (const auto& t : db_.tiles) {
            if (t.dense_features.empty()) throw FormatError("tile " + std::to_string(t.tile_id) + " has no dense features");
            dense_.push_back(store::read_feature_map((db_dir / t.dense_features).string()));
        }
        model_ = cfg_.sascm_weights.empty() ? Conv4DModel::consensus_prior() : sascm::load_model(cfg_.sascm_weights);
        if (cfg_.fine_backend == "neural") net_ = fine::FineNet::load(cfg_.fine_weights);
    }

    [[nodiscard]] const PipelineConfig& config() const { return cfg_; }
    [[nodiscard]] const retrieval::TileDatabase& database() const { return db_; }

    [[nodiscard]] FrameResult localize(const FrameInput& in) const {
        FrameResult r;
        r.frame_id = in.frame_id;
        std::optional<Image> frame;
        if (in.image) frame = preprocess_frame(*in.image, cfg_.tile_size);

        // retrieval
        std::vector<double> query;
        if (in.descriptor) {
            query = retrieval::l2_normalized(*in.descriptor);
        } else if (frame) {
            query = backends::global_descriptor(*frame, cfg_.retrieval_features);
        } else {
            throw ContractViolation("frame " + in.frame_id + " has neither an image nor a descriptor");
        }
        const auto top = retrieval::query_top_k(query, db_.tiles, cfg_.top_k);
        const auto& best_tile = db_.tile(top.front().tile_id);
        r.tile_id = best_tile.tile_id;
        r.retrieval_similarity = top.front().similarity;
        set_estimate(r, best_tile, best_tile.rect.width() / 2.0, best_tile.rect.height() / 2.0);
        r.status = FrameStatus::retrieval_only;
        if (cfg_.mode == Mode::retrieval) return r;

        DenseFeatureMap fu;
        if (in.coarse_features) {
            fu = *in.coarse_features;
        } else if (frame) {
            fu = backends::coarse_features(*frame, cfg_.coarse_features);
        } else {
            throw ContractViolation("frame " + in.frame_id + " has no coarse features");
        }

        bool have_coarse = false;
        for (std::size_t rank = 0; rank < top.size(); ++rank) {
            const auto& tile = db_.tile(top[rank].tile_id);
            const auto& fs = dense_[tile_index(tile.tile_id)];
            ++r.candidates_tried;
            sascm::RegionCorrespondence rc;
            try {
                rc = sascm::center_region_correspondence(sascm::coarse_match(fu, fs, model_, cfg_.coarse), fu, fs,
                                                         cfg_.coarse);
            } catch (const CoarseMatchFailure&) {
                continue;
            }
            if (!have_coarse) {
                have_coarse = true;
                r.status = FrameStatus::fine_fail;
                r.tile_id = tile.tile_id;
                r.retrieval_similarity = top[rank].similarity;
                r.region = rc;
                const auto c = rc.sat_region.center();
                set_estimate(r, tile, c.x, c.y);
            }
            if (!frame) continue;  // no pixels for the fine stage
            const auto fine = fine_stage(*frame, tile, rc, cfg_.seed + rank);
            if (!fine) continue;
            r.status = FrameStatus::ok;
            r.tile_id = tile.tile_id;
            r.retrieval_similarity = top[rank].similarity;
            r.region = rc;
            r.homography = fine->homography;
            r.inliers = fine->inliers;
            set_estimate(r, tile, fine->tile_point.x, fine->tile_point.y);
            return r;
        }
        if (!have_coarse) r.message = "no coarse match in any candidate";
        return r;
    }

private:
    struct FineOutcome {
        fine::Homography homography;
        int inliers = 0;
        Point2 tile_point;
    };

    [[nodiscard]] std::size_t tile_index(int id) const {
        for (std::size_t n = 0; n < db_.tiles.size(); ++n) {
            if (db_.tiles[n].tile_id == id) return n;
        }
        throw ContractViolation("unknown tile id");
    }

    [[nodiscard]] fine::FineFeatures fine_features(const Image& region) const {
        if (net_) return fine::neural_fine_features(region, *net_);
        return fine::classical_fine_features(region, cfg_.classical);
    }

    // Fine matching of region A (UAV) against region B (tile); returns the
    // frame centre projected into tile pixels, or nullopt on failure.
    [[nodiscard]] std::optional<FineOutcome> fine_stage(const Image& frame, const retrieval::TileRecord& tile,
                                                        const sascm::RegionCorrespondence& rc,
                                                        std::uint64_t seed) const {
        const PixelRect& ua = rc.uav_region;
        const PixelRect& sb = rc.sat_region;
        const Image a = crop(frame, ua);
        const Image b = crop(map_, {tile.rect.x0 + sb.x0, tile.rect.y0 + sb.y0, tile.rect.x0 + sb.x1, tile.rect.y0 + sb.y1});
        const auto fa = fine_features(a);
        const auto fb = fine_features(b);
        const auto ka = fine::decode_keypoints(fa, cfg_.fine);
        const auto kb = fine::decode_keypoints(fb, cfg_.fine);
        const auto matches = fine::mutual_nn_match(fine::sample_descriptors(fa, ka), fine::sample_descriptors(fb, kb),
                                                   fine::keypoint_positions(ka), fine::keypoint_positions(kb));
        if (static_cast<int>(matches.size()) < cfg_.fine.min_inliers) return std::nullopt;
        try {
            const auto rs = fine::estimate_homography_ransac(matches, cfg_.fine, seed);
            if (rs.inlier_count < cfg_.fine.min_inliers) return std::nullopt;
            const Point2 centre{frame.width() / 2.0 - ua.x0, frame.height() / 2.0 - ua.y0};
            const Point2 p = fine::project_center(rs.homography, centre);
            const Point2 tp{p.x + sb.x0, p.y + sb.y0};
            if (!(tp.x >= 0 && tp.y >= 0 && tp.x < tile.rect.width() && tp.y < tile.rect.height())) return std::nullopt;
            return FineOutcome{rs.homography, rs.inlier_count, tp};
        } catch (const EstimationFailure&) {
            return std::nullopt;
        } catch (const ProjectionFailure&) {
            return std::nullopt;
        }
    }

    void set_estimate(FrameResult& r, const retrieval::TileRecord& tile, double x, double y) const {
        r.map_pixel = {tile.rect.x0 + x, tile.rect.y0 + y};
        r.estimate = geo::pixel_to_geo(tile.georef, {x, y});
    }

    retrieval::TileDatabase db_;
    PipelineConfig cfg_;
    Image map_;
    std::vector<DenseFeatureMap> dense_;
    Conv4DModel model_;
    std::optional<fine::FineNet> net_;
};

/// Loads a manifest frame; I/O or format problems surface as exceptions.
inline FrameInput load_frame(const store::DatasetManifest& m, const store::FrameEntry& e) {
    FrameInput in;
    in.frame_id = e.frame_id;
    if (!e.image.empty()) in.image = read_pnm(m.resolve(e.image).string());
    if (!e.features.empty()) in.coarse_features = store::read_feature_map(m.resolve(e.features).string());
    if (!e.descriptor.empty()) in.descriptor = store::read_descriptor(m.resolve(e.descriptor).string());
    return in;
}

struct SequenceResult {
    std::vector<FrameResult> frames;
    std::vector<geo::ResultRow> rows;
    geo::TrajectoryEval eval;
};

/// Localises every manifest frame independently. A frame whose inputs
/// cannot be read is reported as input_error without affecting the others.
inline SequenceResult run_sequence(const store::DatasetManifest& m, const Localizer& loc) {
    if (m.frames.empty()) throw ConfigError("manifest has no frames");
    SequenceResult out;
    std::vector<double> errors;
    for (const auto& e : m.frames) {
        FrameResult r;
        try {
            r = loc.localize(load_frame(m, e));
        } catch (const Error& ex) {
            r = FrameResult{};
            r.frame_id = e.frame_id;
            r.status = FrameStatus::input_error;
            r.message = ex.what();
        }
        const bool have = std::isfinite(r.estimate.lat) && std::isfinite(r.estimate.lon);
        const double err = have ? geo::localization_error(r.estimate, e.ground_truth)
                                : std::numeric_limits<double>::infinity();
        errors.push_back(err);
        out.rows.push_back({e.frame_id, r.estimate, e.ground_truth, err, !(err <= geo::kDriftThresholdMeters)});
        out.frames.push_back(std::move(r));
    }
    out.eval = geo::evaluate_trajectory(errors);
    return out;
}

/// Writes `<stem>.csv` (per-frame rows) and `<stem>.json` (metrics plus
/// per-frame status).
inline void write_sequence(const SequenceResult& s, const std::filesystem::path& csv_path,
                           const std::filesystem::path& json_path) {
    geo::write_results_csv(csv_path.string(), s.rows);
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : s.frames) frames.push_back(to_json(f));
    nlohmann::json j{{"metrics", geo::metrics_json(s.eval)}, {"frames", frames}};
    std::ofstream out(json_path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + json_path.string());
    out << j.dump(2) << '\n';
}

}  // namespace uavloc::pipeline
