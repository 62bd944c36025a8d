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

#include <array>
#include <cstdint>
#include <vector>

#include "uavloc/core/error.hpp"
#include "uavloc/tensor/assignment.hpp"
#include "uavloc/tensor/conv4d.hpp"
#include "uavloc/tensor/correlation.hpp"
#include "uavloc/tensor/feature_map.hpp"

namespace uavloc {

struct TrainingPair {
    DenseFeatureMap uav_features;
    DenseFeatureMap sat_features;
    int label = 1;  // +1 corresponding, -1 non-corresponding

    TrainingPair() = default;
    TrainingPair(DenseFeatureMap uav, DenseFeatureMap sat, int y)
        : uav_features(std::move(uav)), sat_features(std::move(sat)), label(y) {
        if (y != 1 && y != -1) throw ContractViolation("TrainingPair: label must be +1 or -1");
    }
};

struct LossValue {
    double value = 0.0;
    bool empty_assignment = false;
};

/// -y * (mean prob_u + mean prob_s) over the given matches. An empty match
/// set yields 0 with `empty_assignment` set.
inline LossValue weak_supervision_loss(const AssignmentProbabilities& p, const CellMatchSet& matches, int y) {
    if (y != 1 && y != -1) throw ContractViolation("weak_supervision_loss: label must be +1 or -1");
    if (matches.empty()) return {0.0, true};
    double su = 0.0;
    double ss = 0.0;
    for (const auto& m : matches) {
        su += p.prob_u(m.uav.i, m.uav.j, m.sat.i, m.sat.j);
        ss += p.prob_s(m.uav.i, m.uav.j, m.sat.i, m.sat.j);
    }
    const double n = static_cast<double>(matches.size());
    return {-y * (su / n + ss / n), false};
}

/// Loss over the hard-assigned (threshold 0) matches of `p`.
inline LossValue weak_supervision_loss(const AssignmentProbabilities& p, int y) {
    return weak_supervision_loss(p, hard_assign(p, 0.0), y);
}

/// Every intermediate of the training forward pass.
struct MatchingForward {
    CorrelationTensor4D similarity;   // clamped cosine
    CorrelationTensor4D filtered;     // SoftMNN(similarity)
    ConsensusTrace forward_trace;     // N(filtered)
    ConsensusTrace swapped_trace;     // N(filtered^T)
    CorrelationTensor4D consensus;    // M
    CorrelationTensor4D refined;      // SoftMNN(M)
    AssignmentProbabilities probs;
    CellMatchSet matches;
    LossValue loss;
};

/// Runs the full matching head on a pair. When `fixed_matches` is given the
/// loss is evaluated on those indices instead of a fresh hard assignment.
inline MatchingForward matching_forward(const TrainingPair& pair, const Conv4DModel& model,
                                        const CellMatchSet* fixed_matches = nullptr) {
    MatchingForward f;
    f.similarity = cosine_correlation(pair.uav_features, pair.sat_features);
    f.filtered = soft_mutual_nn(f.similarity);
    f.consensus = consensus_stack(f.filtered, model, &f.forward_trace);
    const Tensor4D swapped = transpose_sides(consensus_stack(transpose_sides(f.filtered), model, &f.swapped_trace));
    for (std::size_t q = 0; q < f.consensus.size(); ++q) f.consensus.data()[q] += swapped.data()[q];
    f.refined = soft_mutual_nn(f.consensus);
    f.probs = dual_softmax(f.refined);
    f.matches = fixed_matches != nullptr ? *fixed_matches : hard_assign(f.probs, 0.0);
    f.loss = weak_supervision_loss(f.probs, f.matches, pair.label);
    return f;
}

struct BankGradients {
    std::vector<double> weights;
    std::vector<double> biases;
};

struct LossGradients {
    LossValue loss;
    CellMatchSet matches;
    std::array<BankGradients, 3> layers;
};

/// Analytic gradient of the weak-supervision loss with respect to every
/// kernel weight and bias. Hard-assigned match indices are held fixed.
inline LossGradients loss_gradients(const TrainingPair& pair, const Conv4DModel& model) {
    const MatchingForward f = matching_forward(pair, model);
    LossGradients out;
    out.loss = f.loss;
    out.matches = f.matches;
    std::array<Conv4DGradients, 3> acc;
    for (int n = 0; n < 3; ++n) {
        acc[n].weights.assign(model.layers[n].weights.size(), 0.0);
        acc[n].biases.assign(model.layers[n].biases.size(), 0.0);
    }
    if (!f.matches.empty()) {
        const auto& d = f.refined.dims();
        const int nu = d[0] * d[1];
        const int ns = d[2] * d[3];
        const double g = -pair.label / static_cast<double>(f.matches.size());
        Tensor4D gu(d);
        Tensor4D gs(d);
        for (const auto& m : f.matches) {
            gu(m.uav.i, m.uav.j, m.sat.i, m.sat.j) += g;
            gs(m.uav.i, m.uav.j, m.sat.i, m.sat.j) += g;
        }
        // Softmax VJPs, columns for prob_u and rows for prob_s.
        Tensor4D grad_refined(d);
        const double* pu = f.probs.prob_u.channel_data(0);
        const double* ps = f.probs.prob_s.channel_data(0);
        double* gr = grad_refined.channel_data(0);
        std::vector<double> col_dot(ns, 0.0);
        for (int a = 0; a < nu; ++a)
            for (int b = 0; b < ns; ++b) {
                const std::size_t idx = static_cast<std::size_t>(a) * ns + b;
                col_dot[b] += gu.data()[idx] * pu[idx];
            }
        for (int a = 0; a < nu; ++a) {
            double row_dot = 0.0;
            for (int b = 0; b < ns; ++b) {
                const std::size_t idx = static_cast<std::size_t>(a) * ns + b;
                row_dot += gs.data()[idx] * ps[idx];
            }
            for (int b = 0; b < ns; ++b) {
                const std::size_t idx = static_cast<std::size_t>(a) * ns + b;
                gr[idx] = pu[idx] * (gu.data()[idx] - col_dot[b]) + ps[idx] * (gs.data()[idx] - row_dot);
            }
        }
        const Tensor4D grad_consensus = soft_mutual_nn_backward(f.consensus, grad_refined);
        consensus_stack_backward(f.forward_trace, model, grad_consensus, acc);
        consensus_stack_backward(f.swapped_trace, model, transpose_sides(grad_consensus), acc);
    }
    for (int n = 0; n < 3; ++n) {
        out.layers[n].weights = std::move(acc[n].weights);
        out.layers[n].biases = std::move(acc[n].biases);
    }
    return out;
}

}  // namespace uavloc
