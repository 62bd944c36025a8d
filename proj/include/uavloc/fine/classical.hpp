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
#include <vector>

#include "uavloc/core/image.hpp"
#include "uavloc/fine/features.hpp"

namespace uavloc::fine {

inline constexpr int kRegionMultiple = 32;

/// Harris corners and blurred-patch descriptors. Grid node (i, j) sits on
/// pixel (8j, 8i); its reliability squashes the strongest corner response
/// within 4 px and its descriptor samples an 8x8 lattice with
/// `descriptor_step` spacing around it.
struct ClassicalConfig {
    double harris_k = 0.04;
    double gradient_sigma = 1.0;
    double window_sigma = 1.5;
    double response_scale = 1e-8;  // response giving reliability 0.5
    double min_response = 1e-12;
    double hot_logit = 8.0;
    double descriptor_sigma = 2.0;
    double descriptor_step = 4.0;
};

namespace detail {

struct HarrisResponse {
    int width = 0;
    int height = 0;
    std::vector<double> r;
    [[nodiscard]] double at(int x, int y) const { return r[static_cast<std::size_t>(y) * width + x]; }
};

inline HarrisResponse harris_response(const Image& gray, const ClassicalConfig& cfg) {
    const int w = gray.width(), h = gray.height();
    const Image s = gaussian_blur(gray, cfg.gradient_sigma);
    Image xx(w, h, 1), yy(w, h, 1), xy(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double gx = 0.5 * (s.clamped(x + 1, y) - s.clamped(x - 1, y));
            const double gy = 0.5 * (s.clamped(x, y + 1) - s.clamped(x, y - 1));
            xx.at(x, y) = static_cast<float>(gx * gx);
            yy.at(x, y) = static_cast<float>(gy * gy);
            xy.at(x, y) = static_cast<float>(gx * gy);
        }
    const Image a = gaussian_blur(xx, cfg.window_sigma);
    const Image b = gaussian_blur(yy, cfg.window_sigma);
    const Image c = gaussian_blur(xy, cfg.window_sigma);
    HarrisResponse out{w, h, std::vector<double>(static_cast<std::size_t>(w) * h)};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double sa = a.at(x, y), sb = b.at(x, y), sc = c.at(x, y);
            out.r[static_cast<std::size_t>(y) * w + x] = sa * sb - sc * sc - cfg.harris_k * (sa + sb) * (sa + sb);
        }
    return out;
}

inline bool local_maximum(const HarrisResponse& r, int x, int y, int radius) {
    const double v = r.at(x, y);
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
            const int px = x + dx, py = y + dy;
            if ((dx == 0 && dy == 0) || px < 0 || py < 0 || px >= r.width || py >= r.height) continue;
            const double u = r.at(px, py);
            // strict against earlier pixels, non-strict against later ones
            if (u > v || (u == v && (dy < 0 || (dy == 0 && dx < 0)))) return false;
        }
    return true;
}

}  // namespace detail

/// Classical fine features of a region image. The image is reflect-padded
/// to a multiple of 32; keypoints are only emitted inside the original
/// extent.
inline FineFeatures classical_fine_features(const Image& region, const ClassicalConfig& cfg = {}) {
    if (region.empty()) throw DimensionError("classical_fine_features: empty region");
    const Image gray = pad_reflect_to_multiple(to_gray(region), kRegionMultiple);
    const int w = gray.width(), h = gray.height();
    const int gh = h / kCellSize, gw = w / kCellSize;
    FineFeatures f;
    f.descriptors = Grid(gh, gw, kDescriptorDim);
    f.reliability = Grid(gh, gw, 1);
    f.keypoint_logits = Grid(gh, gw, kKeypointBins);
    f.valid_width = region.width();
    f.valid_height = region.height();

    const auto resp = detail::harris_response(gray, cfg);
    auto squash = [&](double r) { return r > cfg.min_response ? r / (r + cfg.response_scale) : 0.0; };
    for (int i = 0; i < gh; ++i)
        for (int j = 0; j < gw; ++j) {
            // strongest corner inside the cell
            int bx = -1, by = -1;
            double best = cfg.min_response;
            for (int y = i * kCellSize; y < (i + 1) * kCellSize; ++y)
                for (int x = j * kCellSize; x < (j + 1) * kCellSize; ++x) {
                    if (resp.at(x, y) > best) {
                        best = resp.at(x, y);
                        bx = x;
                        by = y;
                    }
                }
            double* logits = f.keypoint_logits.cell(i, j);
            if (bx >= 0 && detail::local_maximum(resp, bx, by, 2)) {
                logits[(by - i * kCellSize) * kCellSize + (bx - j * kCellSize)] = cfg.hot_logit;
            } else {
                logits[kNoKeypointBin] = cfg.hot_logit;
            }
            // node reliability from the strongest response within 4 px
            double peak = 0.0;
            for (int y = std::max(0, i * kCellSize - 4); y <= std::min(h - 1, i * kCellSize + 4); ++y)
                for (int x = std::max(0, j * kCellSize - 4); x <= std::min(w - 1, j * kCellSize + 4); ++x) {
                    peak = std::max(peak, resp.at(x, y));
                }
            f.reliability.at(i, j) = squash(peak);
        }

    const Image blurred = gaussian_blur(gray, cfg.descriptor_sigma);
    for (int i = 0; i < gh; ++i)
        for (int j = 0; j < gw; ++j) {
            double* d = f.descriptors.cell(i, j);
            double mean = 0.0;
            for (int v = 0; v < 8; ++v)
                for (int u = 0; u < 8; ++u) {
                    const double x = j * kCellSize + (u - 3.5) * cfg.descriptor_step;
                    const double y = i * kCellSize + (v - 3.5) * cfg.descriptor_step;
                    d[v * 8 + u] = blurred.bilinear(x, y);
                    mean += d[v * 8 + u];
                }
            mean /= kDescriptorDim;
            double norm = 0.0;
            for (int q = 0; q < kDescriptorDim; ++q) {
                d[q] -= mean;
                norm += d[q] * d[q];
            }
            norm = std::sqrt(norm);
            for (int q = 0; q < kDescriptorDim; ++q) d[q] = norm > 1e-9 ? d[q] / norm : 0.0;
        }
    return f;
}

}  // namespace uavloc::fine
