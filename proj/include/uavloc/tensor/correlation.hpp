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
#include "uavloc/tensor/feature_map.hpp"
#include "uavloc/tensor/tensor4d.hpp"

namespace uavloc {

/// Clamped cosine similarity between every UAV cell and every satellite
/// cell. Cells with a zero feature vector have similarity 0 to everything.
inline CorrelationTensor4D cosine_correlation(const DenseFeatureMap& fu, const DenseFeatureMap& fs) {
    if (fu.channels() != fs.channels()) {
        throw DimensionError("cosine_correlation: channel mismatch (" + std::to_string(fu.channels()) + " vs " +
                             std::to_string(fs.channels()) + ")");
    }
    const int c = fu.channels();
    auto normalized = [c](const DenseFeatureMap& f) {
        std::vector<double> out(f.data());
        for (int n = 0; n < f.cells(); ++n) {
            double* v = out.data() + static_cast<std::size_t>(n) * c;
            double sq = 0.0;
            for (int q = 0; q < c; ++q) sq += v[q] * v[q];
            const double inv = sq > 0.0 ? 1.0 / std::sqrt(sq) : 0.0;
            for (int q = 0; q < c; ++q) v[q] *= inv;
        }
        return out;
    };
    const auto nu = normalized(fu);
    const auto ns = normalized(fs);
    CorrelationTensor4D s({fu.height(), fu.width(), fs.height(), fs.width()});
    double* out = s.data().data();
    for (int a = 0; a < fu.cells(); ++a) {
        const double* u = nu.data() + static_cast<std::size_t>(a) * c;
        for (int b = 0; b < fs.cells(); ++b) {
            const double* v = ns.data() + static_cast<std::size_t>(b) * c;
            double dot = 0.0;
            for (int q = 0; q < c; ++q) dot += u[q] * v[q];
            *out++ = std::clamp(dot, 0.0, 1.0);
        }
    }
    return s;
}

inline constexpr double kSoftMnnEpsilon = 1e-12;

/// Per-slice maxima of a single-channel tensor, with the flat index of the
/// first (lowest row-major) maximiser.
struct SliceMaxima {
    std::vector<double> over_uav;            // indexed by (k, l): max over (i, j)
    std::vector<std::size_t> argmax_uav;
    std::vector<double> over_sat;            // indexed by (i, j): max over (k, l)
    std::vector<std::size_t> argmax_sat;
};

inline SliceMaxima slice_maxima(const Tensor4D& t) {
    const auto& d = t.dims();
    const int nu = d[0] * d[1];
    const int ns = d[2] * d[3];
    SliceMaxima m;
    m.over_uav.assign(ns, -std::numeric_limits<double>::infinity());
    m.argmax_uav.assign(ns, 0);
    m.over_sat.assign(nu, -std::numeric_limits<double>::infinity());
    m.argmax_sat.assign(nu, 0);
    const double* p = t.channel_data(0);
    for (int a = 0; a < nu; ++a) {
        for (int b = 0; b < ns; ++b) {
            const std::size_t idx = static_cast<std::size_t>(a) * ns + b;
            const double v = p[idx];
            if (v > m.over_uav[b]) {
                m.over_uav[b] = v;
                m.argmax_uav[b] = idx;
            }
            if (v > m.over_sat[a]) {
                m.over_sat[a] = v;
                m.argmax_sat[a] = idx;
            }
        }
    }
    return m;
}

/// Soft mutual nearest-neighbour filter:
///   out = s * (s / max_ab s_abkl) * (s / max_cd s_ijcd),
/// with each denominator floored at kSoftMnnEpsilon.
inline CorrelationTensor4D soft_mutual_nn(const CorrelationTensor4D& t) {
    if (t.channels() != 1) throw DimensionError("soft_mutual_nn: expected a single-channel tensor");
    for (double v : t.data()) {
        if (!(v >= 0.0)) throw ContractViolation("soft_mutual_nn: entries must be non-negative");
    }
    const auto& d = t.dims();
    const int nu = d[0] * d[1];
    const int ns = d[2] * d[3];
    const auto m = slice_maxima(t);
    CorrelationTensor4D out(d);
    const double* in = t.channel_data(0);
    double* o = out.channel_data(0);
    for (int a = 0; a < nu; ++a) {
        const double row = std::max(m.over_sat[a], kSoftMnnEpsilon);
        for (int b = 0; b < ns; ++b) {
            const std::size_t idx = static_cast<std::size_t>(a) * ns + b;
            const double s = in[idx];
            const double col = std::max(m.over_uav[b], kSoftMnnEpsilon);
            o[idx] = s * (s / col) * (s / row);
        }
    }
    return out;
}

/// Vector-Jacobian product of soft_mutual_nn. Each slice maximum is
/// attributed to its first maximiser; maxima clamped at epsilon carry no
/// gradient.
inline CorrelationTensor4D soft_mutual_nn_backward(const CorrelationTensor4D& input,
                                                   const CorrelationTensor4D& grad_out) {
    const auto& d = input.dims();
    const int nu = d[0] * d[1];
    const int ns = d[2] * d[3];
    const auto m = slice_maxima(input);
    CorrelationTensor4D grad(d);
    const double* in = input.channel_data(0);
    const double* g = grad_out.channel_data(0);
    double* gi = grad.channel_data(0);
    std::vector<double> grad_col(ns, 0.0);  // dL/d(max over uav side) per (k, l)
    std::vector<double> grad_row(nu, 0.0);  // dL/d(max over sat side) per (i, j)
    for (int a = 0; a < nu; ++a) {
        const double row = std::max(m.over_sat[a], kSoftMnnEpsilon);
        for (int b = 0; b < ns; ++b) {
            const std::size_t idx = static_cast<std::size_t>(a) * ns + b;
            const double s = in[idx];
            const double col = std::max(m.over_uav[b], kSoftMnnEpsilon);
            const double cube = s * s * s;
            gi[idx] += g[idx] * 3.0 * s * s / (col * row);
            grad_col[b] -= g[idx] * cube / (col * col * row);
            grad_row[a] -= g[idx] * cube / (col * row * row);
        }
    }
    for (int b = 0; b < ns; ++b) {
        if (m.over_uav[b] > kSoftMnnEpsilon) gi[m.argmax_uav[b]] += grad_col[b];
    }
    for (int a = 0; a < nu; ++a) {
        if (m.over_sat[a] > kSoftMnnEpsilon) gi[m.argmax_sat[a]] += grad_row[a];
    }
    return grad;
}

}  // namespace uavloc
