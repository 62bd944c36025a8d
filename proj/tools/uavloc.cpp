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

// uavloc command-line tool. Exit codes: 0 success, 1 runtime failure,
// 2 configuration error, 3 data-format or I/O error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "uavloc/geo/metrics.hpp"
#include "uavloc/pipeline/pipeline.hpp"
#include "uavloc/pipeline/synth.hpp"
#include "uavloc/sascm/model_io.hpp"
#include "uavloc/sascm/training.hpp"

namespace fs = std::filesystem;
using namespace uavloc;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

// Accepts a bare georef object or any document with map.georef (a dataset
// manifest).
geo::GeoRef read_georef(const fs::path& path) {
    const auto j = read_json(path);
    if (j.contains("map") && j["map"].contains("georef")) return j["map"]["georef"].get<geo::GeoRef>();
    return j.get<geo::GeoRef>();
}

// Flags registered here override the JSON config when given.
struct PipelineFlags {
    std::string config;
    std::optional<int> k, tile_size, overlap, max_keypoints, min_inliers, ransac_iters;
    std::optional<double> sigma, tau, ransac_threshold;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode, coarse_backend, fine_backend, sascm_weights, fine_weights;

    void add(CLI::App* app) {
        app->add_option("--config", config, "JSON pipeline config; flags override its keys")->check(CLI::ExistingFile);
        app->add_option("--k", k, "retrieval candidates tried in order");
        app->add_option("--tile-size", tile_size, "tile side in pixels");
        app->add_option("--overlap", overlap, "tile overlap in pixels");
        app->add_option("--sigma", sigma, "keypoint score threshold");
        app->add_option("--tau", tau, "coarse match score threshold");
        app->add_option("--ransac-threshold", ransac_threshold, "inlier threshold, pixels");
        app->add_option("--ransac-iters", ransac_iters, "RANSAC iteration cap");
        app->add_option("--max-keypoints", max_keypoints, "keypoints kept per region");
        app->add_option("--min-inliers", min_inliers, "inliers needed to accept a homography");
        app->add_option("--seed", seed, "RANSAC seed");
        app->add_option("--mode", mode, "full | retrieval")->check(CLI::IsMember({"full", "retrieval"}));
        app->add_option("--coarse-backend", coarse_backend, "fallback | neural")->check(CLI::IsMember({"fallback", "neural"}));
        app->add_option("--fine-backend", fine_backend, "fallback | neural")->check(CLI::IsMember({"fallback", "neural"}));
        app->add_option("--sascm-weights", sascm_weights, "consensus model directory");
        app->add_option("--fine-weights", fine_weights, "fine network directory");
    }

    [[nodiscard]] pipeline::PipelineConfig resolve() const {
        pipeline::PipelineConfig c;
        if (!config.empty()) pipeline::apply_json(c, read_json(config));
        nlohmann::json o = nlohmann::json::object();
        if (k) o["k"] = *k;
        if (tile_size) o["tile_size"] = *tile_size;
        if (overlap) o["overlap"] = *overlap;
        if (sigma) o["sigma"] = *sigma;
        if (tau) o["score_threshold"] = *tau;
        if (ransac_threshold) o["ransac_threshold"] = *ransac_threshold;
        if (ransac_iters) o["ransac_max_iters"] = *ransac_iters;
        if (max_keypoints) o["max_keypoints"] = *max_keypoints;
        if (min_inliers) o["min_inliers"] = *min_inliers;
        if (seed) o["seed"] = *seed;
        if (mode) o["mode"] = *mode;
        if (coarse_backend) o["coarse_backend"] = *coarse_backend;
        if (fine_backend) o["fine_backend"] = *fine_backend;
        if (sascm_weights) o["sascm_weights"] = *sascm_weights;
        if (fine_weights) o["fine_weights"] = *fine_weights;
        pipeline::apply_json(c, o);
        c.validate();
        return c;
    }
};

void print_metrics(const geo::TrajectoryEval& ev) { std::cout << geo::metrics_json(ev).dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"UAV absolute visual localization against a geo-referenced satellite map"};
    app.require_subcommand(1);

    // build-db
    auto* build = app.add_subcommand("build-db", "tile a satellite map and build the retrieval database");
    std::string map_path, georef_path, db_out = "db";
    std::string descriptors_from, features_from, write_tiles, backend;
    PipelineFlags build_flags;
    build->add_option("map", map_path, "map image (PPM/PGM)")->required()->check(CLI::ExistingFile);
    build->add_option("georef", georef_path, "georef JSON or dataset manifest")->required()->check(CLI::ExistingFile);
    build->add_option("--out", db_out, "database directory");
    build->add_option("--backend", backend, "fallback | neural (neural needs --descriptors-from)")
        ->check(CLI::IsMember({"fallback", "neural"}));
    build->add_option("--descriptors-from", descriptors_from, "directory of exported tile_NNNN.glft descriptors");
    build->add_option("--features-from", features_from, "directory of exported tile_NNNN.glft dense features");
    build->add_option("--write-tiles", write_tiles, "also write tile images here for the exporter");
    build_flags.add(build);

    // localize
    auto* localize = app.add_subcommand("localize", "localize every frame of a manifest");
    std::string manifest_path, db_dir, out_prefix = "results";
    PipelineFlags loc_flags;
    localize->add_option("manifest", manifest_path, "dataset manifest")->required()->check(CLI::ExistingFile);
    localize->add_option("db", db_dir, "database directory")->required()->check(CLI::ExistingDirectory);
    localize->add_option("--out", out_prefix, "writes <out>.csv and <out>.json");
    loc_flags.add(localize);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "success rate and MLE from a results CSV");
    std::string results_path;
    evaluate->add_option("results", results_path, "results CSV or one error per line")->required();

    // train-sascm
    auto* train = app.add_subcommand("train-sascm", "weakly supervised training of the consensus model");
    std::string train_manifest, weights_out = "sascm_weights", init = "random";
    int epochs = 5, negatives = 1, max_frames = 0;
    double lr = sascm::kDefaultLearningRate;
    std::uint64_t train_seed = 0;
    train->add_option("manifest", train_manifest, "dataset manifest with ground truth")->required()->check(CLI::ExistingFile);
    train->add_option("--epochs", epochs, "epochs")->check(CLI::PositiveNumber);
    train->add_option("--lr", lr, "learning rate")->check(CLI::NonNegativeNumber);
    train->add_option("--seed", train_seed, "seed for pairs, init and shuffling");
    train->add_option("--negatives", negatives, "negative pairs per frame")->check(CLI::NonNegativeNumber);
    train->add_option("--max-frames", max_frames, "use only the first N frames (0 = all)")->check(CLI::NonNegativeNumber);
    train->add_option("--init", init, "random | prior | <weights dir>");
    train->add_option("--out-weights", weights_out, "output directory");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic map and frame sequence");
    synth::SynthConfig scfg;
    std::string synth_out = "synth";
    synth_cmd->add_option("--seed", scfg.seed, "seed");
    synth_cmd->add_option("--frames", scfg.frames, "number of frames");
    synth_cmd->add_option("--map-size", scfg.map_size, "map side in pixels");
    synth_cmd->add_option("--gsd", scfg.gsd, "metres per pixel");
    synth_cmd->add_option("--out", synth_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*build) {
            auto cfg = build_flags.resolve();
            pipeline::BuildOptions opts{descriptors_from, features_from, write_tiles};
            if (backend == "neural" && descriptors_from.empty()) throw ConfigError("--backend neural needs --descriptors-from");
            if (backend == "fallback" && !descriptors_from.empty()) throw ConfigError("--descriptors-from implies --backend neural");
            const auto db = pipeline::build_database(map_path, read_georef(georef_path), cfg, db_out, opts);
            std::cout << "built " << db.tiles.size() << " tiles into " << db_out << '\n';
        } else if (*localize) {
            auto cfg = loc_flags.resolve();
            const auto m = store::load_manifest(manifest_path);
            const pipeline::Localizer loc(retrieval::load_database(db_dir), db_dir, cfg);
            const auto s = pipeline::run_sequence(m, loc);
            pipeline::write_sequence(s, out_prefix + ".csv", out_prefix + ".json");
            print_metrics(s.eval);
        } else if (*evaluate) {
            print_metrics(geo::evaluate_trajectory(geo::read_errors_csv(results_path)));
        } else if (*train) {
            auto m = store::load_manifest(train_manifest);
            if (max_frames > 0 && static_cast<std::size_t>(max_frames) < m.frames.size()) m.frames.resize(max_frames);
            sascm::PairBuildConfig pc;
            pc.negatives_per_positive = negatives;
            pc.seed = train_seed;
            const auto set = sascm::build_training_pairs(m, pc);
            Conv4DModel model = init == "random"  ? Conv4DModel::random(train_seed)
                                : init == "prior" ? Conv4DModel::consensus_prior()
                                                  : sascm::load_model(init);
            for (int e = 0; e < epochs; ++e) {
                auto r = sascm::train_epoch(set.pairs, std::move(model), lr, train_seed * 1000 + e);
                model = std::move(r.model);
                std::printf("epoch %d  pairs %zu  mean loss %.9g\n", e + 1, set.pairs.size(), r.mean_loss);
            }
            sascm::save_model(model, weights_out);
            std::cout << "weights written to " << weights_out << '\n';
        } else if (*synth_cmd) {
            const auto m = synth::synth_dataset(scfg, synth_out);
            std::cout << "wrote " << m.frames.size() << " frames to " << synth_out << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const FormatError& e) {
        std::cerr << "data format error: " << e.what() << '\n';
        return kExitData;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitData;
    } catch (const BackendUnavailable& e) {
        std::cerr << "backend unavailable: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
