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
#include <limits>
#include <vector>

#include "uavloc/core/error.hpp"
#include "uavloc/core/geometry.hpp"
#include "uavloc/fine/features.hpp"

namespace uavloc::fine {

struct FineConfig {
    double sigma = 0.05;
    double ransac_threshold = 3.0;
    int ransac_max_iters = 2000;
    double ransac_confidence = 0.995;
    int max_keypoints = 1024;
    int min_inliers = 12;  // fewer inliers count as a fine-stage failure

    void validate() const {
        if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
        if (!(ransac_threshold > 0.0)) throw ConfigError("ransac_threshold must be > 0");
        if (ransac_max_iters < 1) throw ConfigError("ransac_max_iters must be >= 1");
        if (!(ransac_confidence > 0.0 && ransac_confidence < 1.0)) {
            throw ConfigError("ransac_confidence must lie in (0, 1)");
        }
        if (max_keypoints < 1) throw ConfigError("max_keypoints must be >= 1");
        if (min_inliers < 4) throw ConfigError("min_inliers must be >= 4");
    }
};

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double score = 0.0;
    friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct PointMatch {
    Point2 a;
    Point2 b;
    double distance = 0.0;
    int index_a = -1;
    int index_b = -1;
};

using PointMatchSet = std::vector<PointMatch>;

/// Reliability sampled at pixel (x, y), i.e. grid coordinates (x/8, y/8).
inline double reliability_at(const FineFeatures& f, double x, double y) {
    double r = 0.0;
    f.reliability.interpolate(y / kCellSize, x / kCellSize, &r);
    return r;
}

/// One keypoint per cell at most: softmax over the 65 bins, skip cells whose
/// argmax is the absence bin, score = hot-bin probability times reliability.
/// Keypoints in the padding beyond the valid extent are dropped.
inline std::vector<Keypoint> decode_keypoints(const FineFeatures& f, const FineConfig& cfg = {}) {
    cfg.validate();
    const int h = f.keypoint_logits.height, w = f.keypoint_logits.width;
    const int valid_w = f.valid_width > 0 ? f.valid_width : w * kCellSize;
    const int valid_h = f.valid_height > 0 ? f.valid_height : h * kCellSize;
    std::vector<Keypoint> out;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double* logits = f.keypoint_logits.cell(i, j);
            int best = 0;
            for (int b = 1; b < kKeypointBins; ++b) {
                if (logits[b] > logits[best]) best = b;
            }
            if (best == kNoKeypointBin) continue;
            double sum = 0.0;
            for (int b = 0; b < kKeypointBins; ++b) sum += std::exp(logits[b] - logits[best]);
            const double prob = 1.0 / sum;
            const int x = j * kCellSize + best % kCellSize;
            const int y = i * kCellSize + best / kCellSize;
            if (x >= valid_w || y >= valid_h) continue;
            const double score = prob * reliability_at(f, x, y);
            if (score > cfg.sigma) out.push_back({static_cast<double>(x), static_cast<double>(y), score});
        }
    std::stable_sort(out.begin(), out.end(), [](const Keypoint& a, const Keypoint& b) { return a.score > b.score; });
    if (out.size() > static_cast<std::size_t>(cfg.max_keypoints)) out.resize(static_cast<std::size_t>(cfg.max_keypoints));
    return out;
}

using Descriptor = std::vector<double>;

/// Bilinear descriptor at grid coordinates (x/8, y/8), L2-normalised.
inline std::vector<Descriptor> sample_descriptors(const FineFeatures& f, const std::vector<Keypoint>& kps) {
    const int width = f.image_width(), height = f.image_height();
    std::vector<Descriptor> out;
    out.reserve(kps.size());
    for (const auto& k : kps) {
        if (!(k.x >= 0.0 && k.x < width && k.y >= 0.0 && k.y < height)) {
            throw ContractViolation("sample_descriptors: keypoint outside the image");
        }
        Descriptor d(kDescriptorDim);
        f.descriptors.interpolate(k.y / kCellSize, k.x / kCellSize, d.data());
        double n = 0.0;
        for (double v : d) n += v * v;
        if (n > 0.0) {
            n = std::sqrt(n);
            for (auto& v : d) v /= n;
        }
        out.push_back(std::move(d));
    }
    return out;
}

namespace detail {

inline double squared_distance(const Descriptor& a, const Descriptor& b) {
    double s = 0.0;
    for (std::size_t q = 0; q < a.size(); ++q) {
        const double d = a[q] - b[q];
        s += d * d;
    }
    return s;
}

}  // namespace detail

/// Mutual nearest neighbours under Euclidean distance, lowest index on
/// ties. Matches come out ordered by index in A.
inline PointMatchSet mutual_nn_match(const std::vector<Descriptor>& da, const std::vector<Descriptor>& db,
                                     const std::vector<Point2>& pa = {}, const std::vector<Point2>& pb = {}) {
    if (da.empty() || db.empty()) return {};
    const std::size_t dim = da.front().size();
    for (const auto* side : {&da, &db})
        for (const auto& d : *side) {
            if (d.size() != dim) throw DimensionError("mutual_nn_match: descriptor dimensions differ");
        }
    if ((!pa.empty() && pa.size() != da.size()) || (!pb.empty() && pb.size() != db.size())) {
        throw DimensionError("mutual_nn_match: point lists must match descriptor lists");
    }
    const std::size_t na = da.size(), nb = db.size();
    std::vector<double> dist(na * nb);
    for (std::size_t a = 0; a < na; ++a)
        for (std::size_t b = 0; b < nb; ++b) dist[a * nb + b] = detail::squared_distance(da[a], db[b]);
    std::vector<std::size_t> nn_b(nb, 0);
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t a = 1; a < na; ++a) {
            if (dist[a * nb + b] < dist[nn_b[b] * nb + b]) nn_b[b] = a;
        }
    PointMatchSet out;
    for (std::size_t a = 0; a < na; ++a) {
        std::size_t best = 0;
        for (std::size_t b = 1; b < nb; ++b) {
            if (dist[a * nb + b] < dist[a * nb + best]) best = b;
        }
        if (nn_b[best] != a) continue;
        PointMatch m;
        m.index_a = static_cast<int>(a);
        m.index_b = static_cast<int>(best);
        m.distance = std::sqrt(dist[a * nb + best]);
        if (!pa.empty()) m.a = pa[a];
        if (!pb.empty()) m.b = pb[best];
        out.push_back(m);
    }
    return out;
}

inline std::vector<Point2> keypoint_positions(const std::vector<Keypoint>& kps) {
    std::vector<Point2> out;
    out.reserve(kps.size());
    for (const auto& k : kps) out.push_back({k.x, k.y});
    return out;
}

}  // namespace uavloc::fine
