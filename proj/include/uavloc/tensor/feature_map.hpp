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
#include <span>
#include <vector>

#include "uavloc/core/error.hpp"

namespace uavloc {

/// h x w grid of c-dimensional feature vectors. Cell (i, j) covers the
/// source pixels [j*stride, (j+1)*stride) x [i*stride, (i+1)*stride).
/// `stride` may be fractional when features were extracted from a resized
/// copy of the source image.
class DenseFeatureMap {
public:
    DenseFeatureMap() = default;

    DenseFeatureMap(int height, int width, int channels, std::vector<double> data, double stride,
                    int source_width, int source_height)
        : height_(height), width_(width), channels_(channels), stride_(stride),
          source_width_(source_width), source_height_(source_height), data_(std::move(data)) {
        validate();
    }

    /// Zero-filled map with stride 1 over an h x w source.
    DenseFeatureMap(int height, int width, int channels)
        : DenseFeatureMap(height, width, channels,
                          std::vector<double>(static_cast<std::size_t>(height) * width * channels), 1.0, width,
                          height) {}

    [[nodiscard]] int height() const { return height_; }
    [[nodiscard]] int width() const { return width_; }
    [[nodiscard]] int channels() const { return channels_; }
    [[nodiscard]] int cells() const { return height_ * width_; }
    [[nodiscard]] double stride() const { return stride_; }
    [[nodiscard]] int source_width() const { return source_width_; }
    [[nodiscard]] int source_height() const { return source_height_; }

    [[nodiscard]] std::span<const double> cell(int i, int j) const {
        return {data_.data() + offset(i, j), static_cast<std::size_t>(channels_)};
    }
    [[nodiscard]] std::span<double> cell(int i, int j) {
        return {data_.data() + offset(i, j), static_cast<std::size_t>(channels_)};
    }
    double& at(int i, int j, int c) { return data_[offset(i, j) + c]; }
    [[nodiscard]] double at(int i, int j, int c) const { return data_[offset(i, j) + c]; }

    [[nodiscard]] const std::vector<double>& data() const { return data_; }

    void set_geometry(double stride, int source_width, int source_height) {
        stride_ = stride;
        source_width_ = source_width;
        source_height_ = source_height;
        validate();
    }

private:
    [[nodiscard]] std::size_t offset(int i, int j) const {
        return (static_cast<std::size_t>(i) * width_ + j) * channels_;
    }

    void validate() const {
        if (height_ < 1 || width_ < 1 || channels_ < 1) throw DimensionError("DenseFeatureMap: empty dimensions");
        if (data_.size() != static_cast<std::size_t>(height_) * width_ * channels_) {
            throw DimensionError("DenseFeatureMap: data length does not match h*w*c");
        }
        if (!(stride_ >= 1.0)) throw ContractViolation("DenseFeatureMap: stride must be >= 1");
        if (height_ * stride_ > source_height_ + stride_ + 1e-9 || width_ * stride_ > source_width_ + stride_ + 1e-9) {
            throw ContractViolation("DenseFeatureMap: cells exceed the source image");
        }
        for (double v : data_) {
            if (!std::isfinite(v)) throw ContractViolation("DenseFeatureMap: non-finite value");
        }
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    double stride_ = 1.0;
    int source_width_ = 0;
    int source_height_ = 0;
    std::vector<double> data_;
};

}  // namespace uavloc
