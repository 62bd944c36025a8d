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
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "uavloc/core/error.hpp"
#include "uavloc/tensor/tensor4d.hpp"

namespace uavloc {

inline constexpr int kConvTaps = 81;  // 3^4

/// One 3x3x3x3 convolution layer, weights laid out (out, in, a, b, c, d).
struct Conv4DBank {
    int in_channels = 0;
    int out_channels = 0;
    std::vector<double> weights;
    std::vector<double> biases;

    Conv4DBank() = default;
    Conv4DBank(int in, int out)
        : in_channels(in), out_channels(out),
          weights(static_cast<std::size_t>(in) * out * kConvTaps, 0.0), biases(out, 0.0) {}

    static constexpr int tap(int a, int b, int c, int d) { return ((a * 3 + b) * 3 + c) * 3 + d; }

    [[nodiscard]] std::size_t weight_index(int out, int in, int tap_index) const {
        return (static_cast<std::size_t>(out) * in_channels + in) * kConvTaps + tap_index;
    }
    double& weight(int out, int in, int tap_index) { return weights[weight_index(out, in, tap_index)]; }
    [[nodiscard]] double weight(int out, int in, int tap_index) const {
        return weights[weight_index(out, in, tap_index)];
    }
    [[nodiscard]] std::size_t parameter_count() const { return weights.size() + biases.size(); }

    friend bool operator==(const Conv4DBank&, const Conv4DBank&) = default;
};

/// Three conv4d + ReLU layers with channel chain 1 -> 16 -> 16 -> 1.
struct Conv4DModel {
    static constexpr std::array<int, 4> kChannels{1, 16, 16, 1};

    std::array<Conv4DBank, 3> layers;

    Conv4DModel() {
        for (int n = 0; n < 3; ++n) layers[n] = Conv4DBank(kChannels[n], kChannels[n + 1]);
    }

    /// Uniform(-a, a) weights with a = 1/sqrt(fan_in); zero biases.
    static Conv4DModel random(std::uint64_t seed) {
        Conv4DModel m;
        std::mt19937_64 rng(seed);
        for (auto& bank : m.layers) {
            const double a = 1.0 / std::sqrt(static_cast<double>(bank.in_channels) * kConvTaps);
            std::uniform_real_distribution<double> dist(-a, a);
            for (auto& w : bank.weights) w = dist(rng);
        }
        return m;
    }

    /// Center-tap identity along channel 0; the stack passes its input through.
    static Conv4DModel identity() {
        Conv4DModel m;
        const int center = Conv4DBank::tap(1, 1, 1, 1);
        for (auto& bank : m.layers) bank.weight(0, 0, center) = 1.0;
        return m;
    }

    /// Hand-set consensus filter used when no trained weights are supplied:
    /// the first layer averages each score with the eight neighbours that
    /// share its displacement, (i+a, j+b) <-> (k+a, l+b); the remaining
    /// layers pass channel 0 through.
    static Conv4DModel consensus_prior() {
        Conv4DModel m = identity();
        auto& first = m.layers[0];
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
                const int t = Conv4DBank::tap(a, b, a, b);
                first.weight(0, 0, t) = (a == 1 && b == 1) ? 0.5 : 0.5 / 8.0;
            }
        }
        return m;
    }

    [[nodiscard]] std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.parameter_count();
        return n;
    }

    friend bool operator==(const Conv4DModel&, const Conv4DModel&) = default;
};

namespace detail {

// Valid output range along one axis for kernel offset `tap` (0..2) with
// padding 1: output index o reads input o + tap - 1.
inline std::pair<int, int> conv_range(int size, int tap) {
    return {std::max(0, 1 - tap), std::min(size, size + 1 - tap)};
}

// Output ranges and flat input offset of every kernel tap for a volume.
struct TapGeometry {
    std::array<int, 8> range{};  // i0, i1, j0, j1, k0, k1, l0, l1
    std::ptrdiff_t shift = 0;
    bool empty = false;
};

inline std::array<TapGeometry, kConvTaps> tap_geometry(const Tensor4D::Dims& d) {
    std::array<TapGeometry, kConvTaps> g;
    const std::ptrdiff_t s1 = static_cast<std::ptrdiff_t>(d[1]) * d[2] * d[3];
    const std::ptrdiff_t s2 = static_cast<std::ptrdiff_t>(d[2]) * d[3];
    const std::ptrdiff_t s3 = d[3];
    for (int t = 0; t < kConvTaps; ++t) {
        const int taps[4] = {t / 27, (t / 9) % 3, (t / 3) % 3, t % 3};
        for (int axis = 0; axis < 4; ++axis) {
            const auto [lo, hi] = conv_range(d[axis], taps[axis]);
            g[t].range[2 * axis] = lo;
            g[t].range[2 * axis + 1] = hi;
            g[t].empty = g[t].empty || lo >= hi;
        }
        g[t].shift = (taps[0] - 1) * s1 + (taps[1] - 1) * s2 + (taps[2] - 1) * s3 + (taps[3] - 1);
    }
    return g;
}


using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Visits every valid (output position, input position) pair of tap `g`
// restricted to output positions [p0, p1).
template <typename Fn>
void for_each_tap_run(const Tensor4D::Dims& d, const TapGeometry& g, std::size_t p0, std::size_t p1, Fn&& fn) {
    const std::size_t s1 = static_cast<std::size_t>(d[1]) * d[2] * d[3];
    const std::size_t s2 = static_cast<std::size_t>(d[2]) * d[3];
    const std::size_t s3 = d[3];
    const auto& r = g.range;
    for (int i = r[0]; i < r[1]; ++i)
        for (int j = r[2]; j < r[3]; ++j)
            for (int k = r[4]; k < r[5]; ++k) {
                const std::size_t base = i * s1 + j * s2 + k * s3;
                const std::size_t lo = std::max(base + r[6], p0);
                const std::size_t hi = std::min(base + r[7], p1);
                if (lo < hi) fn(lo, hi);
            }
}

// Gathers the 81-tap neighbourhood of output positions [p0, p1) of every
// input channel into a (channels*81) x (p1-p0) column matrix; padding reads 0.
inline void im2col(const Tensor4D& input, const std::array<TapGeometry, kConvTaps>& geometry, std::size_t p0,
                   std::size_t p1, RowMajorMatrix& cols) {
    cols.setZero(static_cast<Eigen::Index>(input.channels()) * kConvTaps, static_cast<Eigen::Index>(p1 - p0));
    for (int t = 0; t < kConvTaps; ++t) {
        const auto& g = geometry[t];
        if (g.empty) continue;
        for (int c = 0; c < input.channels(); ++c) {
            const double* src = input.channel_data(c);
            double* row = cols.row(c * kConvTaps + t).data();
            for_each_tap_run(input.dims(), g, p0, p1, [&](std::size_t lo, std::size_t hi) {
                for (std::size_t p = lo; p < hi; ++p) row[p - p0] = src[static_cast<std::ptrdiff_t>(p) + g.shift];
            });
        }
    }
}

// Scatter-adds a column matrix back onto the input volume (adjoint of im2col).
inline void col2im_add(const RowMajorMatrix& cols, const std::array<TapGeometry, kConvTaps>& geometry,
                       std::size_t p0, std::size_t p1, Tensor4D& out) {
    for (int t = 0; t < kConvTaps; ++t) {
        const auto& g = geometry[t];
        if (g.empty) continue;
        for (int c = 0; c < out.channels(); ++c) {
            double* dst = out.channel_data(c);
            const double* row = cols.row(c * kConvTaps + t).data();
            for_each_tap_run(out.dims(), g, p0, p1, [&](std::size_t lo, std::size_t hi) {
                for (std::size_t p = lo; p < hi; ++p) dst[static_cast<std::ptrdiff_t>(p) + g.shift] += row[p - p0];
            });
        }
    }
}

inline constexpr std::size_t kColumnChunk = 2048;

inline bool prefer_direct(const Conv4DBank& bank) {
    std::size_t nonzero = 0;
    for (double w : bank.weights) nonzero += w != 0.0;
    return nonzero * 8 < bank.weights.size();
}

}  // namespace detail

/// 4D cross-correlation with a 3^4 kernel, zero padding 1 on every spatial
/// axis. Output spatial dims equal input dims.
inline Tensor4D conv4d_forward(const Tensor4D& input, const Conv4DBank& bank) {
    if (input.channels() != bank.in_channels) {
        throw DimensionError("conv4d_forward: input has " + std::to_string(input.channels()) +
                             " channels, bank expects " + std::to_string(bank.in_channels));
    }
    const auto& d = input.dims();
    Tensor4D out(d, bank.out_channels);
    const std::size_t s1 = static_cast<std::size_t>(d[1]) * d[2] * d[3];
    const std::size_t s2 = static_cast<std::size_t>(d[2]) * d[3];
    const std::size_t s3 = d[3];
    if (!detail::prefer_direct(bank)) {
        const Eigen::Map<const detail::RowMajorMatrix> w(bank.weights.data(), bank.out_channels,
                                                          static_cast<Eigen::Index>(bank.in_channels) * kConvTaps);
        const auto geometry = detail::tap_geometry(d);
        detail::RowMajorMatrix cols;
        detail::RowMajorMatrix y;
        const std::size_t total = input.spatial_size();
        for (std::size_t p0 = 0; p0 < total; p0 += detail::kColumnChunk) {
            const std::size_t p1 = std::min(total, p0 + detail::kColumnChunk);
            detail::im2col(input, geometry, p0, p1, cols);
            y.noalias() = w * cols;
            for (int o = 0; o < bank.out_channels; ++o) {
                double* dst = out.channel_data(o) + p0;
                const double* src = y.row(o).data();
                for (std::size_t p = 0; p < p1 - p0; ++p) dst[p] = src[p] + bank.biases[o];
            }
        }
        return out;
    }
    const auto geometry = detail::tap_geometry(d);
    for (int o = 0; o < bank.out_channels; ++o) {
        double* dst = out.channel_data(o);
        std::fill(dst, dst + out.spatial_size(), bank.biases[o]);
        for (int c = 0; c < bank.in_channels; ++c) {
            const double* src = input.channel_data(c);
            for (int t = 0; t < kConvTaps; ++t) {
                const double w = bank.weight(o, c, t);
                const auto& g = geometry[t];
                if (w == 0.0 || g.empty) continue;
                const auto& r = g.range;
                for (int i = r[0]; i < r[1]; ++i)
                    for (int j = r[2]; j < r[3]; ++j)
                        for (int k = r[4]; k < r[5]; ++k) {
                            const std::size_t base = i * s1 + j * s2 + k * s3;
                            double* o_row = dst + base;
                            const double* i_row = src + static_cast<std::ptrdiff_t>(base) + g.shift;
                            for (int l = r[6]; l < r[7]; ++l) o_row[l] += w * i_row[l];
                        }
            }
        }
    }
    return out;
}

struct Conv4DGradients {
    Tensor4D input;
    std::vector<double> weights;
    std::vector<double> biases;
};

/// Vector-Jacobian product of conv4d_forward.
inline Conv4DGradients conv4d_backward(const Tensor4D& input, const Conv4DBank& bank, const Tensor4D& grad_out,
                                       bool need_input_grad = true) {
    const auto& d = input.dims();
    Conv4DGradients g{need_input_grad ? Tensor4D(d, bank.in_channels) : Tensor4D(),
                      std::vector<double>(bank.weights.size(), 0.0), std::vector<double>(bank.out_channels, 0.0)};
    const Eigen::Map<const detail::RowMajorMatrix> w(bank.weights.data(), bank.out_channels,
                                                      static_cast<Eigen::Index>(bank.in_channels) * kConvTaps);
    Eigen::Map<detail::RowMajorMatrix> gw(g.weights.data(), bank.out_channels,
                                          static_cast<Eigen::Index>(bank.in_channels) * kConvTaps);
    const auto geometry = detail::tap_geometry(d);
    detail::RowMajorMatrix cols;
    detail::RowMajorMatrix go;
    detail::RowMajorMatrix gcols;
    const std::size_t total = input.spatial_size();
    for (std::size_t p0 = 0; p0 < total; p0 += detail::kColumnChunk) {
        const std::size_t p1 = std::min(total, p0 + detail::kColumnChunk);
        const auto n = static_cast<Eigen::Index>(p1 - p0);
        go.resize(bank.out_channels, n);
        for (int o = 0; o < bank.out_channels; ++o) {
            const double* src = grad_out.channel_data(o) + p0;
            for (Eigen::Index p = 0; p < n; ++p) {
                go(o, p) = src[p];
                g.biases[o] += src[p];
            }
        }
        detail::im2col(input, geometry, p0, p1, cols);
        gw.noalias() += go * cols.transpose();
        if (need_input_grad) {
            gcols.noalias() = w.transpose() * go;
            detail::col2im_add(gcols, geometry, p0, p1, g.input);
        }
    }
    return g;
}

inline void relu_inplace(Tensor4D& t) {
    for (auto& v : t.data()) v = std::max(v, 0.0);
}

/// Activations of one pass through the three-layer stack, kept for backprop.
struct ConsensusTrace {
    std::array<Tensor4D, 3> inputs;       // input to each layer
    std::array<Tensor4D, 3> activations;  // pre-ReLU output of each layer
};

inline Tensor4D consensus_stack(const Tensor4D& input, const Conv4DModel& model, ConsensusTrace* trace = nullptr) {
    Tensor4D x = input;
    for (int n = 0; n < 3; ++n) {
        Tensor4D y = conv4d_forward(x, model.layers[n]);
        if (trace != nullptr) {
            trace->inputs[n] = std::move(x);
            trace->activations[n] = y;
        }
        relu_inplace(y);
        x = std::move(y);
    }
    return x;
}

/// Backprop through consensus_stack; accumulates into `grads` (one entry
/// per layer) and returns d(loss)/d(input).
inline Tensor4D consensus_stack_backward(const ConsensusTrace& trace, const Conv4DModel& model, Tensor4D grad_out,
                                         std::array<Conv4DGradients, 3>& grads) {
    for (int n = 2; n >= 0; --n) {
        const auto& act = trace.activations[n].data();
        auto& g = grad_out.data();
        for (std::size_t q = 0; q < g.size(); ++q) {
            if (!(act[q] > 0.0)) g[q] = 0.0;
        }
        auto layer = conv4d_backward(trace.inputs[n], model.layers[n], grad_out, n > 0);
        for (std::size_t q = 0; q < layer.weights.size(); ++q) grads[n].weights[q] += layer.weights[q];
        for (std::size_t q = 0; q < layer.biases.size(); ++q) grads[n].biases[q] += layer.biases[q];
        if (n > 0) grad_out = std::move(layer.input);
    }
    return grad_out;
}

/// M = N(S) + N(S^T)^T, where N is the conv/ReLU stack and ^T swaps the
/// UAV and satellite axes.
inline CorrelationTensor4D neighborhood_consensus(const CorrelationTensor4D& t, const Conv4DModel& model) {
    if (t.channels() != 1) throw DimensionError("neighborhood_consensus: expected a single-channel tensor");
    for (double v : t.data()) {
        if (!(v >= 0.0)) throw ContractViolation("neighborhood_consensus: entries must be non-negative");
    }
    Tensor4D forward = consensus_stack(t, model);
    const Tensor4D backward = transpose_sides(consensus_stack(transpose_sides(t), model));
    auto& f = forward.data();
    const auto& b = backward.data();
    for (std::size_t q = 0; q < f.size(); ++q) f[q] += b[q];
    return forward;
}

}  // namespace uavloc
