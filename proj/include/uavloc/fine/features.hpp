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
#include <vector>

#include "uavloc/core/error.hpp"

namespace uavloc::fine {

/// h x w x c grid of doubles, row-major with channels innermost.
struct Grid {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Grid() = default;
    Grid(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

    double& at(int i, int j, int c = 0) { return data[(static_cast<std::size_t>(i) * width + j) * channels + c]; }
    [[nodiscard]] double at(int i, int j, int c = 0) const {
        return data[(static_cast<std::size_t>(i) * width + j) * channels + c];
    }
    [[nodiscard]] const double* cell(int i, int j) const {
        return data.data() + (static_cast<std::size_t>(i) * width + j) * channels;
    }
    double* cell(int i, int j) { return data.data() + (static_cast<std::size_t>(i) * width + j) * channels; }

    /// Bilinear interpolation at fractional grid coordinates (row y, col x),
    /// clamped at the borders. Adds weight * value into `out` (size channels).
    void interpolate(double y, double x, double* out) const {
        const double fy = std::floor(y), fx = std::floor(x);
        const double ay = y - fy, ax = x - fx;
        const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
        auto clampi = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
        const int ya = clampi(y0, height), yb = clampi(y0 + 1, height);
        const int xa = clampi(x0, width), xb = clampi(x0 + 1, width);
        const double w00 = (1 - ay) * (1 - ax), w01 = (1 - ay) * ax, w10 = ay * (1 - ax), w11 = ay * ax;
        const double* c00 = cell(ya, xa);
        const double* c01 = cell(ya, xb);
        const double* c10 = cell(yb, xa);
        const double* c11 = cell(yb, xb);
        for (int c = 0; c < channels; ++c) out[c] = w00 * c00[c] + w01 * c01[c] + w10 * c10[c] + w11 * c11[c];
    }
};

inline constexpr int kCellSize = 8;
inline constexpr int kDescriptorDim = 64;
inline constexpr int kKeypointBins = 65;  // 8x8 row-major offsets + "no keypoint"
inline constexpr int kNoKeypointBin = 64;

/// Output of a fine feature backend at 1/8 resolution of a (padded)
/// region image. `valid_width` / `valid_height` give the extent of real
/// image content; padding lies beyond it.
struct FineFeatures {
    Grid descriptors;      // H/8 x W/8 x 64
    Grid reliability;      // H/8 x W/8 x 1
    Grid keypoint_logits;  // H/8 x W/8 x 65
    int valid_width = 0;
    int valid_height = 0;

    [[nodiscard]] int image_width() const { return descriptors.width * kCellSize; }
    [[nodiscard]] int image_height() const { return descriptors.height * kCellSize; }

    void validate() const {
        const int h = descriptors.height, w = descriptors.width;
        if (h < 1 || w < 1) throw DimensionError("FineFeatures: empty maps");
        if (descriptors.channels != kDescriptorDim || reliability.channels != 1 ||
            keypoint_logits.channels != kKeypointBins) {
            throw DimensionError("FineFeatures: wrong channel counts");
        }
        if (reliability.height != h || reliability.width != w || keypoint_logits.height != h ||
            keypoint_logits.width != w) {
            throw DimensionError("FineFeatures: spatial dims disagree");
        }
        for (const auto* g : {&descriptors, &reliability, &keypoint_logits}) {
            for (double v : g->data) {
                if (!std::isfinite(v)) throw ContractViolation("FineFeatures: non-finite value");
            }
        }
    }
};

}  // namespace uavloc::fine
