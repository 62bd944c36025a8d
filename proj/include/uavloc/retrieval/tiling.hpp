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

#include "uavloc/core/error.hpp"
#include "uavloc/core/geometry.hpp"
#include "uavloc/tensor/feature_map.hpp"

namespace uavloc::retrieval {

namespace detail {

inline std::vector<int> tile_origins(int extent, int tile_size, int stride) {
    std::vector<int> out;
    for (int x = 0;; x += stride) {
        if (x + tile_size >= extent) {
            out.push_back(extent - tile_size);
            break;
        }
        out.push_back(x);
    }
    return out;
}

}  // namespace detail

/// Row-major grid of tile_size x tile_size rectangles with stride
/// tile_size - overlap. The last row and column are shifted inward so every
/// tile is full size and the whole map is covered.
inline std::vector<PixelRect> tile_satellite_map(int map_width, int map_height, int tile_size, int overlap) {
    if (!(tile_size > overlap) || overlap < 0) throw ConfigError("tiling: need tile_size > overlap >= 0");
    if (map_width < tile_size || map_height < tile_size) {
        throw FormatError("tiling: map " + std::to_string(map_width) + "x" + std::to_string(map_height) +
                          " is smaller than the tile size " + std::to_string(tile_size));
    }
    const int stride = tile_size - overlap;
    const auto xs = detail::tile_origins(map_width, tile_size, stride);
    const auto ys = detail::tile_origins(map_height, tile_size, stride);
    std::vector<PixelRect> tiles;
    tiles.reserve(xs.size() * ys.size());
    for (int y : ys)
        for (int x : xs) tiles.push_back({x, y, x + tile_size, y + tile_size});
    return tiles;
}

/// Number of tiles along an axis: 1 + ceil((extent - tile) / stride).
inline int tiles_along(int extent, int tile_size, int overlap) {
    const int stride = tile_size - overlap;
    return 1 + (extent - tile_size + stride - 1) / stride;
}

inline constexpr double kGemPower = 3.0;

/// Generalised-mean pooling over cells followed by L2 normalisation. Uses
/// the signed power so negative channels pool symmetrically.
inline std::vector<double> aggregate_descriptor(const DenseFeatureMap& f, double p = kGemPower) {
    const int c = f.channels();
    std::vector<double> acc(c, 0.0);
    for (int i = 0; i < f.height(); ++i)
        for (int j = 0; j < f.width(); ++j) {
            const auto v = f.cell(i, j);
            for (int q = 0; q < c; ++q) acc[q] += std::copysign(std::pow(std::abs(v[q]), p), v[q]);
        }
    double norm = 0.0;
    for (auto& a : acc) {
        a /= f.cells();
        a = std::copysign(std::pow(std::abs(a), 1.0 / p), a);
        norm += a * a;
    }
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) throw NumericalError("aggregate_descriptor: zero descriptor");
    for (auto& a : acc) a /= norm;
    return acc;
}

inline std::vector<double> l2_normalized(std::vector<double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (!(n > 0.0)) throw NumericalError("l2_normalized: zero vector");
    for (auto& x : v) x /= n;
    return v;
}

}  // namespace uavloc::retrieval
