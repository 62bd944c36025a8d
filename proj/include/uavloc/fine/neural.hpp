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
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "uavloc/core/error.hpp"
#include "uavloc/core/image.hpp"
#include "uavloc/fine/classical.hpp"
#include "uavloc/fine/features.hpp"
#include "uavloc/store/tensor_file.hpp"

namespace uavloc::fine {

/// Channel-major activation volume (c, h, w).
struct Volume {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    Volume() = default;
    Volume(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, 0.0f) {}
    float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    [[nodiscard]] float at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
};

/// 2D convolution with bias; batch norm is expected to be folded in.
struct Conv2D {
    std::string name;
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 1;
    int stride = 1;
    int padding = 0;
    std::vector<float> weights;  // (out, in, k, k)
    std::vector<float> bias;

    [[nodiscard]] Volume forward(const Volume& x) const {
        if (x.channels != in_channels) throw DimensionError(name + ": expected " + std::to_string(in_channels) + " channels");
        const int oh = (x.height + 2 * padding - kernel) / stride + 1;
        const int ow = (x.width + 2 * padding - kernel) / stride + 1;
        if (oh < 1 || ow < 1) throw DimensionError(name + ": input too small");
        const int taps = in_channels * kernel * kernel;
        using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        Mat cols(taps, static_cast<Eigen::Index>(oh) * ow);
        for (int c = 0; c < in_channels; ++c)
            for (int ky = 0; ky < kernel; ++ky)
                for (int kx = 0; kx < kernel; ++kx) {
                    float* row = cols.row((c * kernel + ky) * kernel + kx).data();
                    for (int y = 0; y < oh; ++y) {
                        const int iy = y * stride + ky - padding;
                        for (int xo = 0; xo < ow; ++xo) {
                            const int ix = xo * stride + kx - padding;
                            row[y * ow + xo] =
                                (iy < 0 || iy >= x.height || ix < 0 || ix >= x.width) ? 0.0f : x.at(c, iy, ix);
                        }
                    }
                }
        const Eigen::Map<const Mat> w(weights.data(), out_channels, taps);
        Volume out(out_channels, oh, ow);
        Eigen::Map<Mat> o(out.data.data(), out_channels, static_cast<Eigen::Index>(oh) * ow);
        o.noalias() = w * cols;
        for (int c = 0; c < out_channels; ++c) o.row(c).array() += bias[static_cast<std::size_t>(c)];
        return out;
    }
};

inline void relu(Volume& v) {
    for (auto& x : v.data) x = std::max(x, 0.0f);
}

/// Bilinear resize with half-pixel centres (align_corners = false).
inline Volume upsample_bilinear(const Volume& v, int height, int width) {
    Volume out(v.channels, height, width);
    const double sy = static_cast<double>(v.height) / height, sx = static_cast<double>(v.width) / width;
    for (int y = 0; y < height; ++y) {
        const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
        const int y0 = std::min(static_cast<int>(fy), v.height - 1), y1 = std::min(y0 + 1, v.height - 1);
        const double ay = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
            const int x0 = std::min(static_cast<int>(fx), v.width - 1), x1 = std::min(x0 + 1, v.width - 1);
            const double ax = fx - x0;
            for (int c = 0; c < v.channels; ++c) {
                out.at(c, y, x) = static_cast<float>((1 - ay) * ((1 - ax) * v.at(c, y0, x0) + ax * v.at(c, y0, x1)) +
                                                     ay * ((1 - ax) * v.at(c, y1, x0) + ax * v.at(c, y1, x1)));
            }
        }
    }
    return out;
}

/// Rearranges each 8x8 pixel block into 64 channels, row-major within the block.
inline Volume space_to_depth(const Volume& v) {
    const int h = v.height / kCellSize, w = v.width / kCellSize;
    Volume out(v.channels * kCellSize * kCellSize, h, w);
    for (int c = 0; c < v.channels; ++c)
        for (int dy = 0; dy < kCellSize; ++dy)
            for (int dx = 0; dx < kCellSize; ++dx)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) {
                        out.at((c * kCellSize + dy) * kCellSize + dx, i, j) = v.at(c, i * kCellSize + dy, j * kCellSize + dx);
                    }
    return out;
}

/// Layer names in forward order. Stages reach H/8, H/16 and H/32; lateral
/// 1x1 projections bring each to 64 channels before the upsample-and-sum.
inline const std::vector<std::string>& fine_net_layers() {
    static const std::vector<std::string> names{
        "stage1.conv1", "stage1.conv2", "stage1.conv3", "stage2.conv", "stage3.conv", "lateral1", "lateral2",
        "lateral3",     "fuse.conv1",   "fuse.conv2",   "reliability", "keypoint.0",  "keypoint.1", "keypoint.2",
        "keypoint.3"};
    return names;
}

class FineNet {
public:
    static constexpr const char* kManifest = "manifest.json";

    /// Loads `manifest.json` (layer name -> tensor file) from a weights directory.
    static FineNet load(const std::filesystem::path& dir) {
        const auto manifest = dir / kManifest;
        if (!std::filesystem::exists(manifest)) {
            throw BackendUnavailable("neural fine backend: no weights at " + manifest.string());
        }
        std::ifstream in(manifest);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(manifest.string() + ": " + e.what());
        }
        for (const auto& name : fine_net_layers()) {
            if (!j.contains("layers") || !j["layers"].contains(name) || !j["layers"][name].is_string()) {
                throw FormatError(manifest.string() + ": missing layer " + name);
            }
        }
        FineNet net;
        for (const auto& name : fine_net_layers()) {
            const auto path = dir / j["layers"][name].get<std::string>();
            if (!std::filesystem::exists(path)) throw BackendUnavailable("neural fine backend: missing " + path.string());
            const auto rec = store::read_tensor(path.string());
            if (rec.dims.size() != 4 || rec.dims[2] != rec.dims[3]) throw FormatError(path.string() + ": expected (out, in, k, k)");
            Conv2D conv;
            conv.name = name;
            conv.out_channels = static_cast<int>(rec.dims[0]);
            conv.in_channels = static_cast<int>(rec.dims[1]);
            conv.kernel = static_cast<int>(rec.dims[2]);
            conv.weights = rec.data;
            try {
                conv.stride = rec.metadata.value("stride", 1);
                conv.padding = rec.metadata.value("padding", 0);
                conv.bias = rec.metadata.at("bias").get<std::vector<float>>();
            } catch (const nlohmann::json::exception& e) {
                throw FormatError(path.string() + ": " + e.what());
            }
            if (static_cast<int>(conv.bias.size()) != conv.out_channels) throw FormatError(path.string() + ": bias size");
            net.layers_[name] = std::move(conv);
        }
        net.check_shapes();
        return net;
    }

    [[nodiscard]] const Conv2D& layer(const std::string& name) const { return layers_.at(name); }

    /// Forward pass on a single-channel image with H, W multiples of 32.
    [[nodiscard]] FineFeatures forward(const Image& gray) const {
        if (gray.channels() != 1 || gray.width() % kRegionMultiple || gray.height() % kRegionMultiple || gray.empty()) {
            throw DimensionError("FineNet: need a gray image with sides divisible by 32");
        }
        Volume x(1, gray.height(), gray.width());
        for (int y = 0; y < gray.height(); ++y)
            for (int xx = 0; xx < gray.width(); ++xx) x.at(0, y, xx) = gray.at(xx, y);

        auto run = [&](const char* name, const Volume& in, bool act) {
            Volume v = layer(name).forward(in);
            if (act) relu(v);
            return v;
        };
        const Volume s1 = run("stage1.conv3", run("stage1.conv2", run("stage1.conv1", x, true), true), true);
        const Volume s2 = run("stage2.conv", s1, true);
        const Volume s3 = run("stage3.conv", s2, true);
        Volume sum = run("lateral1", s1, false);
        const Volume l2 = upsample_bilinear(run("lateral2", s2, false), s1.height, s1.width);
        const Volume l3 = upsample_bilinear(run("lateral3", s3, false), s1.height, s1.width);
        for (std::size_t q = 0; q < sum.data.size(); ++q) sum.data[q] += l2.data[q] + l3.data[q];
        const Volume desc = run("fuse.conv2", run("fuse.conv1", sum, true), false);
        const Volume rel = run("reliability", desc, false);
        Volume k = space_to_depth(x);
        k = run("keypoint.0", k, true);
        k = run("keypoint.1", k, true);
        k = run("keypoint.2", k, true);
        k = run("keypoint.3", k, false);

        const int h = desc.height, w = desc.width;
        FineFeatures f;
        f.descriptors = Grid(h, w, kDescriptorDim);
        f.reliability = Grid(h, w, 1);
        f.keypoint_logits = Grid(h, w, kKeypointBins);
        f.valid_width = gray.width();
        f.valid_height = gray.height();
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                for (int c = 0; c < kDescriptorDim; ++c) f.descriptors.at(i, j, c) = desc.at(c, i, j);
                f.reliability.at(i, j) = 1.0 / (1.0 + std::exp(-static_cast<double>(rel.at(0, i, j))));
                for (int c = 0; c < kKeypointBins; ++c) f.keypoint_logits.at(i, j, c) = k.at(c, i, j);
            }
        f.validate();
        return f;
    }

private:
    void check_shapes() const {
        struct Want {
            const char* name;
            int in, out, kernel;
        };
        static constexpr Want kWant[] = {
            {"stage1.conv1", 1, 24, 3},   {"stage1.conv2", 24, 24, 3}, {"stage1.conv3", 24, 24, 3},
            {"stage2.conv", 24, 64, 3},   {"stage3.conv", 64, 128, 3}, {"lateral1", 24, 64, 1},
            {"lateral2", 64, 64, 1},      {"lateral3", 128, 64, 1},    {"fuse.conv1", 64, 64, 3},
            {"fuse.conv2", 64, 64, 1},    {"reliability", 64, 1, 1},   {"keypoint.0", 64, 64, 1},
            {"keypoint.1", 64, 64, 1},    {"keypoint.2", 64, 64, 1},   {"keypoint.3", 64, kKeypointBins, 1}};
        for (const auto& w : kWant) {
            const auto& l = layers_.at(w.name);
            if (l.in_channels != w.in || l.out_channels != w.out || l.kernel != w.kernel) {
                throw FormatError(std::string("FineNet: layer ") + w.name + " has an unexpected shape");
            }
        }
    }

    std::map<std::string, Conv2D> layers_;
};

/// Neural fine features of a region: gray conversion, reflect padding to a
/// multiple of 32, forward pass.
inline FineFeatures neural_fine_features(const Image& region, const FineNet& net) {
    const Image gray = pad_reflect_to_multiple(to_gray(region), kRegionMultiple);
    FineFeatures f = net.forward(gray);
    f.valid_width = region.width();
    f.valid_height = region.height();
    return f;
}

}  // namespace uavloc::fine
