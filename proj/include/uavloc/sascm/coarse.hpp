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
#include <ostream>

#include "uavloc/core/error.hpp"
#include "uavloc/core/geometry.hpp"
#include "uavloc/tensor/assignment.hpp"
#include "uavloc/tensor/conv4d.hpp"
#include "uavloc/tensor/correlation.hpp"
#include "uavloc/tensor/feature_map.hpp"

namespace uavloc::sascm {

struct CoarseMatchConfig {
    int center_neighborhood = 3;  // cells, odd
    int region_margin = 1;        // cells added around the satellite bounding box
    double score_threshold = 0.0;

    void validate() const {
        if (center_neighborhood < 1 || center_neighborhood % 2 == 0) {
            throw ConfigError("center_neighborhood must be odd and >= 1");
        }
        if (region_margin < 0) throw ConfigError("region_margin must be >= 0");
        if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
            throw ConfigError("score_threshold must lie in [0, 1]");
        }
    }
};

/// Matched UAV centre block and the satellite region it maps to, both in
/// source-image pixels.
struct RegionCorrespondence {
    PixelRect uav_region;
    PixelRect sat_region;
    double confidence = 0.0;
    int contributing_matches = 0;

    friend bool operator==(const RegionCorrespondence&, const RegionCorrespondence&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const RegionCorrespondence& r) {
    return os << "uav " << r.uav_region << " -> sat " << r.sat_region << " conf " << r.confidence;
}

/// Correlation, SoftMNN, neighbourhood consensus, SoftMNN, dual softmax and
/// mutual-argmax assignment.
inline CellMatchSet coarse_match(const DenseFeatureMap& fu, const DenseFeatureMap& fs, const Conv4DModel& model,
                                 const CoarseMatchConfig& cfg = {}) {
    cfg.validate();
    const auto filtered = soft_mutual_nn(cosine_correlation(fu, fs));
    const auto refined = soft_mutual_nn(neighborhood_consensus(filtered, model));
    return hard_assign(dual_softmax(refined), cfg.score_threshold);
}

namespace detail {

// Pixel span of cells [c0, c1] on an axis with the given stride, clipped to
// the source extent.
inline std::pair<int, int> cell_span_to_pixels(int c0, int c1, double stride, int extent) {
    const int p0 = std::clamp(static_cast<int>(std::floor(c0 * stride + 1e-9)), 0, extent);
    const int p1 = std::clamp(static_cast<int>(std::ceil((c1 + 1) * stride - 1e-9)), 0, extent);
    return {p0, p1};
}

inline PixelRect cells_to_pixels(int i0, int j0, int i1, int j1, const DenseFeatureMap& f) {
    const auto [x0, x1] = cell_span_to_pixels(j0, j1, f.stride(), f.source_width());
    const auto [y0, y1] = cell_span_to_pixels(i0, i1, f.stride(), f.source_height());
    return {x0, y0, x1, y1};
}

}  // namespace detail

/// Region correspondence for the centre_neighborhood block around UAV cell
/// (h/2, w/2). Throws CoarseMatchFailure when no block cell is matched.
inline RegionCorrespondence center_region_correspondence(const CellMatchSet& matches, const DenseFeatureMap& fu,
                                                         const DenseFeatureMap& fs,
                                                         const CoarseMatchConfig& cfg = {}) {
    cfg.validate();
    const int half = cfg.center_neighborhood / 2;
    const int ci = fu.height() / 2, cj = fu.width() / 2;
    const int bi0 = std::max(0, ci - half), bi1 = std::min(fu.height() - 1, ci + half);
    const int bj0 = std::max(0, cj - half), bj1 = std::min(fu.width() - 1, cj + half);

    int si0 = fs.height(), sj0 = fs.width(), si1 = -1, sj1 = -1;
    double score_sum = 0.0;
    int count = 0;
    for (const auto& m : matches) {
        if (m.uav.i < bi0 || m.uav.i > bi1 || m.uav.j < bj0 || m.uav.j > bj1) continue;
        if (m.sat.i < 0 || m.sat.i >= fs.height() || m.sat.j < 0 || m.sat.j >= fs.width()) {
            throw ContractViolation("center_region_correspondence: satellite cell outside the map");
        }
        si0 = std::min(si0, m.sat.i);
        si1 = std::max(si1, m.sat.i);
        sj0 = std::min(sj0, m.sat.j);
        sj1 = std::max(sj1, m.sat.j);
        score_sum += m.score;
        ++count;
    }
    if (count == 0) throw CoarseMatchFailure("no coarse matches inside the UAV centre block");

    const int g = cfg.region_margin;
    RegionCorrespondence out;
    out.uav_region = detail::cells_to_pixels(bi0, bj0, bi1, bj1, fu);
    out.sat_region = detail::cells_to_pixels(std::max(0, si0 - g), std::max(0, sj0 - g),
                                             std::min(fs.height() - 1, si1 + g), std::min(fs.width() - 1, sj1 + g), fs);
    out.confidence = std::clamp(score_sum / count, 0.0, 1.0);
    out.contributing_matches = count;
    if (out.uav_region.empty() || out.sat_region.empty()) {
        throw CoarseMatchFailure("centre region collapsed to an empty rectangle");
    }
    return out;
}

}  // namespace uavloc::sascm
