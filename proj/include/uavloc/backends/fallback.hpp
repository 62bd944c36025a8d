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
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "uavloc/core/error.hpp"
#include "uavloc/core/image.hpp"
#include "uavloc/retrieval/tiling.hpp"
#include "uavloc/tensor/feature_map.hpp"

namespace uavloc::backends {

/// Deterministic hand-crafted stand-in for foundation-model features. The
/// input is resized to (grid * cell_pixels)^2 and described per cell.
struct FallbackConfig {
    int grid = 16;
    int cell_pixels = 14;

    void validate() const {
        if (grid < 1 || cell_pixels < 4) throw ConfigError("fallback backend: grid >= 1 and cell_pixels >= 4");
    }
    [[nodiscard]] int input_size() const { return grid * cell_pixels; }
};

namespace detail {

inline constexpr int kOrientationBins = 8;
inline constexpr int kLayout = 3;  // 3x3 intensity layout per cell
inline constexpr int kChromaBins = 6;
inline constexpr int kRetrievalOrientation = 4;

struct Planes {
    int size = 0;
    std::vector<double> lum, opp_a, opp_b, gx, gy, mag, chroma_r, chroma_g;
};

inline Planes prepare(const Image& img, const FallbackConfig& cfg) {
    cfg.validate();
    if (img.width() != img.height()) throw DimensionError("fallback backend expects a square image");
    if (img.empty()) throw DimensionError("fallback backend: empty image");
    const int n = cfg.input_size();
    const Image small = resize(img, n, n);
    Planes p;
    p.size = n;
    const std::size_t count = static_cast<std::size_t>(n) * n;
    for (auto* v : {&p.lum, &p.opp_a, &p.opp_b, &p.gx, &p.gy, &p.mag, &p.chroma_r, &p.chroma_g}) v->assign(count, 0.0);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const std::size_t q = static_cast<std::size_t>(y) * n + x;
            const double r = small.at(x, y, 0);
            const double g = small.channels() > 1 ? small.at(x, y, 1) : r;
            const double b = small.channels() > 2 ? small.at(x, y, 2) : r;
            p.lum[q] = (r + g + b) / 3.0;
            p.opp_a[q] = r - g;
            p.opp_b[q] = 0.5 * (r + g) - b;
            const double s = r + g + b + 1e-3;
            p.chroma_r[q] = r / s;
            p.chroma_g[q] = g / s;
        }
    Image lum(n, n, 1);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) lum.at(x, y) = static_cast<float>(p.lum[static_cast<std::size_t>(y) * n + x]);
    const Image smooth = gaussian_blur(lum, 1.0);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const std::size_t q = static_cast<std::size_t>(y) * n + x;
            p.gx[q] = 0.5 * (smooth.clamped(x + 1, y) - smooth.clamped(x - 1, y));
            p.gy[q] = 0.5 * (smooth.clamped(x, y + 1) - smooth.clamped(x, y - 1));
            p.mag[q] = std::hypot(p.gx[q], p.gy[q]);
        }
    return p;
}

// Adds `w` split linearly between the two nearest of `bins` circular bins.
inline void soft_orientation(double* hist, int bins, double angle, double w) {
    double pos = angle / (2 * std::numbers::pi) * bins;
    pos -= bins * std::floor(pos / bins);
    const int b0 = static_cast<int>(pos) % bins;
    const double f = pos - std::floor(pos);
    hist[b0] += w * (1 - f);
    hist[(b0 + 1) % bins] += w * f;
}

// Adds `w` bilinearly into a bins x bins histogram over [lo, hi)^2.
inline void soft_2d(double* hist, int bins, double u, double v, double lo_u, double hi_u, double lo_v, double hi_v,
                    double w) {
    const double pu = std::clamp((u - lo_u) / (hi_u - lo_u) * bins - 0.5, 0.0, bins - 1.0);
    const double pv = std::clamp((v - lo_v) / (hi_v - lo_v) * bins - 0.5, 0.0, bins - 1.0);
    const int u0 = std::min(static_cast<int>(pu), bins - 1), v0 = std::min(static_cast<int>(pv), bins - 1);
    const int u1 = std::min(u0 + 1, bins - 1), v1 = std::min(v0 + 1, bins - 1);
    const double fu = pu - u0, fv = pv - v0;
    hist[v0 * bins + u0] += w * (1 - fu) * (1 - fv);
    hist[v0 * bins + u1] += w * fu * (1 - fv);
    hist[v1 * bins + u0] += w * (1 - fu) * fv;
    hist[v1 * bins + u1] += w * fu * fv;
}

inline void standardize_channels(std::vector<double>& data, int cells, int channels) {
    for (int c = 0; c < channels; ++c) {
        double mean = 0.0;
        for (int k = 0; k < cells; ++k) mean += data[static_cast<std::size_t>(k) * channels + c];
        mean /= cells;
        double var = 0.0;
        for (int k = 0; k < cells; ++k) {
            const double d = data[static_cast<std::size_t>(k) * channels + c] - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / cells);
        for (int k = 0; k < cells; ++k) {
            double& v = data[static_cast<std::size_t>(k) * channels + c];
            v = sd > 1e-9 ? (v - mean) / sd : 0.0;
        }
    }
}

}  // namespace detail

inline constexpr int kCoarseChannels = 3 + 3 + 1 + detail::kOrientationBins + detail::kLayout * detail::kLayout;

/// Per-cell colour mean and spread, gradient energy, orientation histogram
/// and 3x3 intensity layout; each channel standardised over the map.
inline DenseFeatureMap coarse_features(const Image& img, const FallbackConfig& cfg = {}) {
    const auto p = detail::prepare(img, cfg);
    const int g = cfg.grid, s = cfg.cell_pixels, n = p.size;
    constexpr int C = kCoarseChannels;
    std::vector<double> data(static_cast<std::size_t>(g) * g * C, 0.0);
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
            double* f = data.data() + (static_cast<std::size_t>(i) * g + j) * C;
            double sum[3] = {0, 0, 0}, sq[3] = {0, 0, 0}, energy = 0.0;
            double layout[detail::kLayout * detail::kLayout] = {};
            int layout_n[detail::kLayout * detail::kLayout] = {};
            double orient[detail::kOrientationBins] = {};
            for (int y = i * s; y < (i + 1) * s; ++y)
                for (int x = j * s; x < (j + 1) * s; ++x) {
                    const std::size_t q = static_cast<std::size_t>(y) * n + x;
                    const double v[3] = {p.lum[q], p.opp_a[q], p.opp_b[q]};
                    for (int c = 0; c < 3; ++c) {
                        sum[c] += v[c];
                        sq[c] += v[c] * v[c];
                    }
                    energy += p.mag[q];
                    detail::soft_orientation(orient, detail::kOrientationBins, std::atan2(p.gy[q], p.gx[q]), p.mag[q]);
                    const int li = (y - i * s) * detail::kLayout / s, lj = (x - j * s) * detail::kLayout / s;
                    layout[li * detail::kLayout + lj] += p.lum[q];
                    ++layout_n[li * detail::kLayout + lj];
                }
            const double area = static_cast<double>(s) * s;
            int c = 0;
            for (int k = 0; k < 3; ++k) f[c++] = sum[k] / area;
            for (int k = 0; k < 3; ++k) f[c++] = std::sqrt(std::max(0.0, sq[k] / area - (sum[k] / area) * (sum[k] / area)));
            f[c++] = energy / area;
            for (double o : orient) f[c++] = o / (energy + 1e-6);
            for (int k = 0; k < detail::kLayout * detail::kLayout; ++k) f[c++] = layout[k] / layout_n[k] - sum[0] / area;
        }
    detail::standardize_channels(data, g * g, C);
    // group weights: colour mean, colour spread, energy, orientation, layout
    for (int k = 0; k < g * g; ++k) {
        double* f = data.data() + static_cast<std::size_t>(k) * C;
        int c = 0;
        for (int q = 0; q < 3; ++q) f[c++] *= 1.5;
        for (int q = 0; q < 3; ++q) f[c++] *= 0.7;
        f[c++] *= 0.7;
        for (int q = 0; q < detail::kOrientationBins; ++q) f[c++] *= 0.5;
        for (int q = 0; q < detail::kLayout * detail::kLayout; ++q) f[c++] *= 0.5;
    }
    return DenseFeatureMap(g, g, C, std::move(data), static_cast<double>(img.width()) / g, img.width(), img.height());
}

inline constexpr int kRetrievalBlock = detail::kChromaBins * detail::kChromaBins + detail::kRetrievalOrientation;
inline constexpr int kRetrievalChannels = 2 * kRetrievalBlock;

/// Non-negative per-cell histograms for global retrieval: chromaticity and
/// gradient orientation. Cells inside the central disc fill the first
/// channel block, cells in the surrounding ring the second, so plain GeM
/// pooling yields a rotation-tolerant centre/ring descriptor.
inline DenseFeatureMap retrieval_features(const Image& img, const FallbackConfig& cfg = {}) {
    const auto p = detail::prepare(img, cfg);
    const int g = cfg.grid, s = cfg.cell_pixels, n = p.size;
    constexpr int C = kRetrievalChannels;
    std::vector<double> data(static_cast<std::size_t>(g) * g * C, 0.0);
    const double centre = g / 2.0;
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
            const double r = std::hypot(i + 0.5 - centre, j + 0.5 - centre) / centre;
            if (r > 1.0) continue;
            double* f = data.data() + (static_cast<std::size_t>(i) * g + j) * C + (r <= 0.5 ? 0 : kRetrievalBlock);
            double energy = 0.0;
            double orient[detail::kRetrievalOrientation] = {};
            for (int y = i * s; y < (i + 1) * s; ++y)
                for (int x = j * s; x < (j + 1) * s; ++x) {
                    const std::size_t q = static_cast<std::size_t>(y) * n + x;
                    detail::soft_2d(f, detail::kChromaBins, p.chroma_r[q], p.chroma_g[q], 0.15, 0.50, 0.22, 0.52,
                                    1.0 / (s * s));
                    // orientation modulo pi, so contrast polarity does not matter
                    detail::soft_orientation(orient, detail::kRetrievalOrientation,
                                             2.0 * std::atan2(p.gy[q], p.gx[q]), p.mag[q]);
                    energy += p.mag[q];
                }
            for (int k = 0; k < detail::kRetrievalOrientation; ++k) {
                f[detail::kChromaBins * detail::kChromaBins + k] = 0.5 * orient[k] / (energy + 1e-6);
            }
        }
    return DenseFeatureMap(g, g, C, std::move(data), static_cast<double>(img.width()) / g, img.width(), img.height());
}

/// Unit-norm global descriptor of an image.
inline std::vector<double> global_descriptor(const Image& img, const FallbackConfig& cfg = {}) {
    return retrieval::aggregate_descriptor(retrieval_features(img, cfg));
}

}  // namespace uavloc::backends
