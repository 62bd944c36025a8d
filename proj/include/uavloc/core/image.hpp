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
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "uavloc/core/error.hpp"
#include "uavloc/core/geometry.hpp"

namespace uavloc {

/// Interleaved float image, values nominally in [0, 1].
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, float fill = 0.0f)
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<std::size_t>(width) * height * channels, fill) {
        if (width < 0 || height < 0 || channels < 1) {
            throw DimensionError("Image: invalid dimensions");
        }
    }

    [[nodiscard]] int width() const { return width_; }
    [[nodiscard]] int height() const { return height_; }
    [[nodiscard]] int channels() const { return channels_; }
    [[nodiscard]] bool empty() const { return data_.empty(); }

    float& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
    [[nodiscard]] float at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

    [[nodiscard]] float clamped(int x, int y, int c = 0) const {
        x = std::clamp(x, 0, width_ - 1);
        y = std::clamp(y, 0, height_ - 1);
        return data_[index(x, y, c)];
    }

    /// Bilinear sample with pixel centers at integer coordinates and
    /// clamp-to-edge borders.
    [[nodiscard]] float bilinear(double x, double y, int c = 0) const {
        const double fx = std::floor(x);
        const double fy = std::floor(y);
        const int x0 = static_cast<int>(fx);
        const int y0 = static_cast<int>(fy);
        const double ax = x - fx;
        const double ay = y - fy;
        const double v00 = clamped(x0, y0, c);
        const double v10 = clamped(x0 + 1, y0, c);
        const double v01 = clamped(x0, y0 + 1, c);
        const double v11 = clamped(x0 + 1, y0 + 1, c);
        return static_cast<float>((1 - ay) * ((1 - ax) * v00 + ax * v10) + ay * ((1 - ax) * v01 + ax * v11));
    }

    [[nodiscard]] const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

private:
    [[nodiscard]] std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 1;
    std::vector<float> data_;
};

inline Image to_gray(const Image& img) {
    if (img.channels() == 1) return img;
    Image out(img.width(), img.height(), 1);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            float s = 0.0f;
            for (int c = 0; c < img.channels(); ++c) s += img.at(x, y, c);
            out.at(x, y) = s / static_cast<float>(img.channels());
        }
    }
    return out;
}

/// Crop; the rectangle must lie inside the image.
inline Image crop(const Image& img, const PixelRect& r) {
    if (r.empty() || !r.inside(img.width(), img.height())) {
        throw ContractViolation("crop: rectangle outside image");
    }
    Image out(r.width(), r.height(), img.channels());
    for (int y = 0; y < r.height(); ++y) {
        for (int x = 0; x < r.width(); ++x) {
            for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(r.x0 + x, r.y0 + y, c);
        }
    }
    return out;
}

inline std::vector<float> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * i * i / (sigma * sigma));
        k[i + radius] = static_cast<float>(v);
        sum += v;
    }
    for (auto& v : k) v = static_cast<float>(v / sum);
    return k;
}

/// Separable Gaussian blur with clamp-to-edge borders.
inline Image gaussian_blur(const Image& img, double sigma) {
    if (sigma <= 0.0) return img;
    const auto k = gaussian_kernel(sigma);
    const int radius = static_cast<int>(k.size() / 2);
    Image tmp(img.width(), img.height(), img.channels());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < img.channels(); ++c) {
                float s = 0.0f;
                for (int i = -radius; i <= radius; ++i) s += k[i + radius] * img.clamped(x + i, y, c);
                tmp.at(x, y, c) = s;
            }
        }
    }
    Image out(img.width(), img.height(), img.channels());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < img.channels(); ++c) {
                float s = 0.0f;
                for (int i = -radius; i <= radius; ++i) s += k[i + radius] * tmp.clamped(x, y + i, c);
                out.at(x, y, c) = s;
            }
        }
    }
    return out;
}

/// Resample to (width, height). Downscaling pre-filters with a Gaussian
/// matched to the scale factor.
inline Image resize(const Image& img, int width, int height) {
    if (width < 1 || height < 1) throw ContractViolation("resize: empty target");
    if (width == img.width() && height == img.height()) return img;
    const double sx = static_cast<double>(img.width()) / width;
    const double sy = static_cast<double>(img.height()) / height;
    const double factor = std::max(sx, sy);
    const Image& src = img;
    Image blurred;
    if (factor > 1.0) blurred = gaussian_blur(img, 0.5 * factor);
    const Image& from = factor > 1.0 ? blurred : src;
    Image out(width, height, img.channels());
    for (int y = 0; y < height; ++y) {
        const double py = (y + 0.5) * sy - 0.5;
        for (int x = 0; x < width; ++x) {
            const double px = (x + 0.5) * sx - 0.5;
            for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = from.bilinear(px, py, c);
        }
    }
    return out;
}

/// Reflect-pads on the right and bottom so both sides are multiples of
/// `multiple`. Content stays anchored at (0, 0).
inline Image pad_reflect_to_multiple(const Image& img, int multiple) {
    const int w = (img.width() + multiple - 1) / multiple * multiple;
    const int h = (img.height() + multiple - 1) / multiple * multiple;
    if (w == img.width() && h == img.height()) return img;
    auto reflect = [](int v, int n) {
        if (n == 1) return 0;
        const int period = 2 * (n - 1);
        v %= period;
        if (v < 0) v += period;
        return v < n ? v : period - v;
    };
    Image out(w, h, img.channels());
    for (int y = 0; y < h; ++y) {
        const int sy = reflect(y, img.height());
        for (int x = 0; x < w; ++x) {
            const int sx = reflect(x, img.width());
            for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(sx, sy, c);
        }
    }
    return out;
}

// Binary PGM (P5) / PPM (P6), 8-bit.

inline Image read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P6") throw FormatError("unsupported image format (want P5/P6): " + path);
    auto next_int = [&]() {
        int v = 0;
        while (true) {
            in >> std::ws;
            if (in.peek() == '#') {
                std::string line;
                std::getline(in, line);
                continue;
            }
            break;
        }
        if (!(in >> v)) throw FormatError("truncated image header: " + path);
        return v;
    };
    const int w = next_int();
    const int h = next_int();
    const int maxval = next_int();
    if (w < 1 || h < 1 || maxval != 255) throw FormatError("unsupported image header: " + path);
    in.get();
    const int channels = magic == "P6" ? 3 : 1;
    std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * channels);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw FormatError("truncated image payload: " + path);
    Image img(w, h, channels);
    for (std::size_t i = 0; i < bytes.size(); ++i) img.data()[i] = bytes[i] / 255.0f;
    return img;
}

inline void write_pnm(const std::string& path, const Image& img) {
    if (img.channels() != 1 && img.channels() != 3) throw ContractViolation("write_pnm: need 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image: " + path);
    out << (img.channels() == 3 ? "P6" : "P5") << '\n' << img.width() << ' ' << img.height() << "\n255\n";
    std::vector<unsigned char> bytes(img.data().size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const float v = std::clamp(img.data()[i], 0.0f, 1.0f);
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace uavloc
