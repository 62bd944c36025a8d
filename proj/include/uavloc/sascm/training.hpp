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
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "uavloc/backends/fallback.hpp"
#include "uavloc/core/error.hpp"
#include "uavloc/core/image.hpp"
#include "uavloc/geo/georef.hpp"
#include "uavloc/store/manifest.hpp"
#include "uavloc/tensor/loss.hpp"

namespace uavloc::sascm {

struct PairBuildConfig {
    int negatives_per_positive = 1;
    int patch_size = 512;  // satellite patch side, pixels
    backends::FallbackConfig features{8, 14};
    std::uint64_t seed = 0;

    void validate() const {
        if (negatives_per_positive < 0) throw ConfigError("negatives_per_positive must be >= 0");
        if (patch_size < 32) throw ConfigError("patch_size must be >= 32");
        features.validate();
    }
};

/// Where a pair's satellite patch came from, for inspection and tests.
struct PairOrigin {
    std::string frame_id;
    Point2 frame_center;  // ground-truth map pixel
    PixelRect patch;      // satellite patch in map pixels
    int label = 1;
};

struct TrainingSet {
    std::vector<TrainingPair> pairs;
    std::vector<PairOrigin> origins;
};

namespace detail {

inline PixelRect patch_around(const Point2& c, int size, int map_w, int map_h) {
    int x0 = static_cast<int>(std::lround(c.x - size / 2.0));
    int y0 = static_cast<int>(std::lround(c.y - size / 2.0));
    x0 = std::clamp(x0, 0, map_w - size);
    y0 = std::clamp(y0, 0, map_h - size);
    return {x0, y0, x0 + size, y0 + size};
}

}  // namespace detail

/// One positive pair per frame (frame vs. the patch centred on its
/// ground truth) followed by its negatives: patches on a stride size/4
/// lattice whose centres lie more than two patch widths away.
inline TrainingSet build_training_pairs(const store::DatasetManifest& m, const PairBuildConfig& cfg) {
    cfg.validate();
    m.map.georef.validate();
    if (m.map.image.empty()) throw FormatError("training needs the map image");
    const Image map = read_pnm(m.resolve(m.map.image).string());
    if (map.width() < cfg.patch_size || map.height() < cfg.patch_size) {
        throw FormatError("map is smaller than the training patch");
    }
    const int step = std::max(1, cfg.patch_size / 4);
    std::vector<PixelRect> lattice;
    for (int y = 0; y + cfg.patch_size <= map.height(); y += step)
        for (int x = 0; x + cfg.patch_size <= map.width(); x += step) lattice.push_back({x, y, x + cfg.patch_size, y + cfg.patch_size});

    std::mt19937_64 rng(cfg.seed);
    TrainingSet out;
    for (const auto& e : m.frames) {
        if (!std::isfinite(e.ground_truth.lat) || !std::isfinite(e.ground_truth.lon)) {
            throw FormatError("frame " + e.frame_id + " has no geo ground truth");
        }
        if (e.image.empty()) throw FormatError("frame " + e.frame_id + " has no image");
        const Image frame = read_pnm(m.resolve(e.image).string());
        const int side = std::min(frame.width(), frame.height());
        const PixelRect sq{(frame.width() - side) / 2, (frame.height() - side) / 2, (frame.width() + side) / 2,
                           (frame.height() + side) / 2};
        const DenseFeatureMap fu = backends::coarse_features(crop(frame, sq), cfg.features);
        const Point2 c = geo::geo_to_pixel(m.map.georef, e.ground_truth);
        const PixelRect pos = detail::patch_around(c, cfg.patch_size, map.width(), map.height());
        out.pairs.emplace_back(fu, backends::coarse_features(crop(map, pos), cfg.features), 1);
        out.origins.push_back({e.frame_id, c, pos, 1});

        std::vector<std::size_t> far;
        for (std::size_t n = 0; n < lattice.size(); ++n) {
            const Point2 pc = lattice[n].center();
            if (std::hypot(pc.x - c.x, pc.y - c.y) > 2.0 * cfg.patch_size) far.push_back(n);
        }
        if (cfg.negatives_per_positive > 0 && far.empty()) {
            throw ConfigError("frame " + e.frame_id + ": no satellite patch lies two patch widths away");
        }
        std::uniform_int_distribution<std::size_t> pick(0, far.empty() ? 0 : far.size() - 1);
        for (int k = 0; k < cfg.negatives_per_positive; ++k) {
            const PixelRect neg = lattice[far[pick(rng)]];
            out.pairs.emplace_back(fu, backends::coarse_features(crop(map, neg), cfg.features), -1);
            out.origins.push_back({e.frame_id, c, neg, -1});
        }
    }
    return out;
}

inline constexpr double kDefaultLearningRate = 0.1;

namespace detail {

inline void require_finite(const Conv4DModel& model, const char* when) {
    for (int n = 0; n < 3; ++n) {
        const auto& bank = model.layers[n];
        const auto bad = [](double v) { return !std::isfinite(v); };
        if (std::any_of(bank.weights.begin(), bank.weights.end(), bad) ||
            std::any_of(bank.biases.begin(), bank.biases.end(), bad)) {
            throw NumericalError(std::string("train_epoch: non-finite parameters in layer ") + std::to_string(n) + " " + when);
        }
    }
}

}  // namespace detail

struct EpochResult {
    Conv4DModel model;
    double mean_loss = 0.0;
    int empty_assignments = 0;
};

/// One pass of plain per-pair gradient descent in a seeded random order.
/// The reported loss is the mean over pairs, each evaluated just before
/// its own update.
inline EpochResult train_epoch(const std::vector<TrainingPair>& pairs, Conv4DModel model, double learning_rate,
                               std::uint64_t seed) {
    if (pairs.empty()) throw ContractViolation("train_epoch: no training pairs");
    if (!std::isfinite(learning_rate) || learning_rate < 0.0) throw ConfigError("learning rate must be finite and >= 0");
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    detail::require_finite(model, "before training");
    EpochResult out;
    double sum = 0.0;
    for (std::size_t step = 0; step < order.size(); ++step) {
        const auto& pair = pairs[order[step]];
        const LossGradients g = loss_gradients(pair, model);
        if (!std::isfinite(g.loss.value)) {
            std::ostringstream msg;
            msg << "train_epoch: non-finite loss at step " << step << " (pair " << order[step] << ", label "
                << pair.label << ", " << g.matches.size() << " matches)";
            throw NumericalError(msg.str());
        }
        sum += g.loss.value;
        out.empty_assignments += g.loss.empty_assignment;
        if (learning_rate == 0.0) continue;
        for (int n = 0; n < 3; ++n) {
            auto& bank = model.layers[n];
            const auto& gw = g.layers[n].weights;
            const auto& gb = g.layers[n].biases;
            for (std::size_t q = 0; q < bank.weights.size(); ++q) bank.weights[q] -= learning_rate * gw[q];
            for (std::size_t q = 0; q < bank.biases.size(); ++q) bank.biases[q] -= learning_rate * gb[q];
        }
        detail::require_finite(model, ("after step " + std::to_string(step)).c_str());
    }
    out.model = std::move(model);
    out.mean_loss = sum / static_cast<double>(pairs.size());
    return out;
}

}  // namespace uavloc::sascm
