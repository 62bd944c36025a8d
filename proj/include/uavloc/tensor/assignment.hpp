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
#include <limits>
#include <vector>

#include "uavloc/core/error.hpp"
#include "uavloc/tensor/tensor4d.hpp"

namespace uavloc {

/// Match probabilities in both directions. prob_u is normalised over the
/// UAV cells (i, j) for each satellite cell (k, l); prob_s over (k, l) for
/// each (i, j).
struct AssignmentProbabilities {
    Tensor4D prob_u;
    Tensor4D prob_s;
};

struct CellIndex {
    int i = 0;
    int j = 0;
    friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

struct CellMatch {
    CellIndex uav;
    CellIndex sat;
    double score = 0.0;
    friend bool operator==(const CellMatch&, const CellMatch&) = default;
};

using CellMatchSet = std::vector<CellMatch>;

inline AssignmentProbabilities dual_softmax(const CorrelationTensor4D& m) {
    if (m.channels() != 1) throw DimensionError("dual_softmax: expected a single-channel tensor");
    const auto& d = m.dims();
    const int nu = d[0] * d[1];
    const int ns = d[2] * d[3];
    for (double v : m.data()) {
        if (!std::isfinite(v)) throw ContractViolation("dual_softmax: non-finite input");
    }
    AssignmentProbabilities p{Tensor4D(d), Tensor4D(d)};
    const double* in = m.channel_data(0);
    double* pu = p.prob_u.channel_data(0);
    double* ps = p.prob_s.channel_data(0);

    // Over (k, l) for each (i, j): contiguous rows.
    for (int a = 0; a < nu; ++a) {
        const double* row = in + static_cast<std::size_t>(a) * ns;
        double* out = ps + static_cast<std::size_t>(a) * ns;
        double mx = -std::numeric_limits<double>::infinity();
        for (int b = 0; b < ns; ++b) mx = std::max(mx, row[b]);
        double sum = 0.0;
        for (int b = 0; b < ns; ++b) sum += (out[b] = std::exp(row[b] - mx));
        for (int b = 0; b < ns; ++b) out[b] /= sum;
    }
    // Over (i, j) for each (k, l): strided columns.
    std::vector<double> mx(ns, -std::numeric_limits<double>::infinity());
    std::vector<double> sum(ns, 0.0);
    for (int a = 0; a < nu; ++a)
        for (int b = 0; b < ns; ++b) mx[b] = std::max(mx[b], in[static_cast<std::size_t>(a) * ns + b]);
    for (int a = 0; a < nu; ++a)
        for (int b = 0; b < ns; ++b) {
            const std::size_t idx = static_cast<std::size_t>(a) * ns + b;
            sum[b] += (pu[idx] = std::exp(in[idx] - mx[b]));
        }
    for (int a = 0; a < nu; ++a)
        for (int b = 0; b < ns; ++b) pu[static_cast<std::size_t>(a) * ns + b] /= sum[b];
    return p;
}

/// Keeps (i,j) <-> (k,l) when each is the other's argmax and
/// prob_u * prob_s >= threshold. Ties go to the lowest row-major index.
/// Output is ordered by UAV cell.
inline CellMatchSet hard_assign(const AssignmentProbabilities& p, double threshold = 0.0) {
    const auto& d = p.prob_u.dims();
    if (p.prob_s.dims() != d) throw DimensionError("hard_assign: probability tensors disagree in shape");
    const int nu = d[0] * d[1];
    const int ns = d[2] * d[3];
    const double* pu = p.prob_u.channel_data(0);
    const double* ps = p.prob_s.channel_data(0);

    std::vector<int> best_uav(ns, 0);  // argmax over (i, j) of prob_u for each (k, l)
    std::vector<double> best_uav_val(ns, -1.0);
    for (int a = 0; a < nu; ++a)
        for (int b = 0; b < ns; ++b) {
            const double v = pu[static_cast<std::size_t>(a) * ns + b];
            if (v > best_uav_val[b]) {
                best_uav_val[b] = v;
                best_uav[b] = a;
            }
        }

    CellMatchSet out;
    for (int a = 0; a < nu; ++a) {
        const double* row = ps + static_cast<std::size_t>(a) * ns;
        int best = 0;
        for (int b = 1; b < ns; ++b) {
            if (row[b] > row[best]) best = b;
        }
        if (best_uav[best] != a) continue;
        const double score = pu[static_cast<std::size_t>(a) * ns + best] * row[best];
        if (score < threshold) continue;
        out.push_back({{a / d[1], a % d[1]}, {best / d[3], best % d[3]}, score});
    }
    return out;
}

}  // namespace uavloc
