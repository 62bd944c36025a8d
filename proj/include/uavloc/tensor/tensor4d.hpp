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
#include <cstddef>
#include <vector>

#include "uavloc/core/error.hpp"

namespace uavloc {

/// Dense multi-channel 4D volume indexed (channel, i, j, k, l), row-major.
/// (i, j) address cells of the UAV-side map and (k, l) cells of the
/// satellite-side map. A single-channel instance is a correlation tensor.
class Tensor4D {
public:
    using Dims = std::array<int, 4>;

    Tensor4D() = default;
    explicit Tensor4D(Dims dims, int channels = 1, double fill = 0.0) : dims_(dims), channels_(channels) {
        for (int d : dims) {
            if (d < 1) throw DimensionError("Tensor4D: dimensions must be positive");
        }
        if (channels < 1) throw DimensionError("Tensor4D: channels must be positive");
        data_.assign(static_cast<std::size_t>(channels) * spatial_size(), fill);
    }

    [[nodiscard]] const Dims& dims() const { return dims_; }
    [[nodiscard]] int dim(int axis) const { return dims_[axis]; }
    [[nodiscard]] int channels() const { return channels_; }
    [[nodiscard]] std::size_t spatial_size() const {
        return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2] * dims_[3];
    }
    [[nodiscard]] std::size_t size() const { return data_.size(); }

    [[nodiscard]] std::size_t index(int i, int j, int k, int l) const {
        return ((static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k) * dims_[3] + l;
    }

    double& operator()(int i, int j, int k, int l) { return data_[index(i, j, k, l)]; }
    double operator()(int i, int j, int k, int l) const { return data_[index(i, j, k, l)]; }
    double& operator()(int c, int i, int j, int k, int l) {
        return data_[c * spatial_size() + index(i, j, k, l)];
    }
    double operator()(int c, int i, int j, int k, int l) const {
        return data_[c * spatial_size() + index(i, j, k, l)];
    }

    [[nodiscard]] double* channel_data(int c) { return data_.data() + c * spatial_size(); }
    [[nodiscard]] const double* channel_data(int c) const { return data_.data() + c * spatial_size(); }

    [[nodiscard]] std::vector<double>& data() { return data_; }
    [[nodiscard]] const std::vector<double>& data() const { return data_; }

    friend bool operator==(const Tensor4D&, const Tensor4D&) = default;

private:
    Dims dims_{0, 0, 0, 0};
    int channels_ = 0;
    std::vector<double> data_;
};

using CorrelationTensor4D = Tensor4D;

/// Swaps the (i, j) axes with the (k, l) axes: out(k, l, i, j) = in(i, j, k, l).
inline Tensor4D transpose_sides(const Tensor4D& t) {
    const auto& d = t.dims();
    Tensor4D out({d[2], d[3], d[0], d[1]}, t.channels());
    for (int c = 0; c < t.channels(); ++c) {
        for (int i = 0; i < d[0]; ++i)
            for (int j = 0; j < d[1]; ++j)
                for (int k = 0; k < d[2]; ++k)
                    for (int l = 0; l < d[3]; ++l) out(c, k, l, i, j) = t(c, i, j, k, l);
    }
    return out;
}

}  // namespace uavloc
