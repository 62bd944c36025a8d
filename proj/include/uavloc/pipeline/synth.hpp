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
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "uavloc/core/error.hpp"
#include "uavloc/core/image.hpp"
#include "uavloc/geo/georef.hpp"
#include "uavloc/store/manifest.hpp"

namespace uavloc::synth {

struct SynthConfig {
    std::uint64_t seed = 42;
    int frames = 50;
    int map_size = 2048;
    double gsd = 0.5;  // meters per pixel
    double origin_lat = 28.2;
    double origin_lon = 112.9;
    int frame_size = 512;
    double max_rotation_deg = 15.0;
    double min_scale = 0.8;  // UAV pixels per map pixel
    double max_scale = 1.2;
    double max_perspective = 1.5e-4;
    double photometric = 0.2;  // brightness and contrast jitter
    double noise_sigma = 0.01;
    int tile_size = 512;
    int overlap = 256;

    void validate() const {
        if (frames < 1) throw ConfigError("synth: frames must be >= 1");
        if (map_size < 4 * tile_size || tile_size <= overlap || overlap < 0) {
            throw ConfigError("synth: need map_size >= 4 * tile_size and tile_size > overlap >= 0");
        }
        if (!(gsd > 0.0)) throw ConfigError("synth: gsd must be positive");
        if (!(min_scale > 0.0 && max_scale >= min_scale)) throw ConfigError("synth: bad scale range");
        if (frame_size < 32) throw ConfigError("synth: frame_size must be >= 32");
        if (!(photometric >= 0.0 && photometric < 1.0)) throw ConfigError("synth: photometric must lie in [0,1)");
    }
};

namespace detail {

inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Lattice value noise in [0, 1) with smoothstep interpolation.
inline double value_noise(double x, double y, double period, std::uint64_t seed) {
    const double u = x / period, v = y / period;
    const double fu = std::floor(u), fv = std::floor(v);
    const auto iu = static_cast<std::int64_t>(fu), iv = static_cast<std::int64_t>(fv);
    auto lattice = [&](std::int64_t a, std::int64_t b) {
        const std::uint64_t h = mix(seed ^ mix(static_cast<std::uint64_t>(a) * 0x632BE59BD9B4E019ull ^
                                               static_cast<std::uint64_t>(b)));
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    };
    const double tu = u - fu, tv = v - fv;
    const double su = tu * tu * (3 - 2 * tu), sv = tv * tv * (3 - 2 * tv);
    const double a = lattice(iu, iv) + su * (lattice(iu + 1, iv) - lattice(iu, iv));
    const double b = lattice(iu, iv + 1) + su * (lattice(iu + 1, iv + 1) - lattice(iu, iv + 1));
    return a + sv * (b - a);
}

using Rgb = std::array<double, 3>;

// Land-cover palette: forest, meadow, cropland, wheat, bare soil, urban,
// water, orchard.
inline constexpr std::array<Rgb, 8> kLandCover{{{0.16, 0.33, 0.17},
                                               {0.45, 0.62, 0.30},
                                               {0.62, 0.58, 0.30},
                                               {0.80, 0.72, 0.45},
                                               {0.58, 0.44, 0.32},
                                               {0.55, 0.55, 0.57},
                                               {0.18, 0.30, 0.48},
                                               {0.30, 0.45, 0.22}}};

inline void paint(Image& img, int x, int y, const Rgb& c, double alpha = 1.0) {
    if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return;
    for (int k = 0; k < 3; ++k) {
        float& v = img.at(x, y, k);
        v = static_cast<float>((1 - alpha) * v + alpha * c[k]);
    }
}

inline Rgb jitter(const Rgb& c, std::mt19937_64& rng, double amount) {
    std::uniform_real_distribution<double> d(-amount, amount);
    Rgb out;
    for (int k = 0; k < 3; ++k) out[k] = std::clamp(c[k] + d(rng), 0.0, 1.0);
    return out;
}

}  // namespace detail

/// Square RGB map of Voronoi land-cover parcels with textured interiors,
/// buildings, ponds and roads.
inline Image synth_map(int size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    constexpr int kParcel = 150;
    const int cells = (size + kParcel - 1) / kParcel;
    struct Site {
        double x, y;
        detail::Rgb colour;
        double texture;
    };
    std::vector<Site> sites;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> cover(0, static_cast<int>(detail::kLandCover.size()) - 1);
    for (int gy = 0; gy < cells; ++gy)
        for (int gx = 0; gx < cells; ++gx) {
            const auto base = detail::kLandCover[static_cast<std::size_t>(cover(rng))];
            sites.push_back({(gx + unit(rng)) * kParcel, (gy + unit(rng)) * kParcel, detail::jitter(base, rng, 0.08),
                             0.04 + 0.1 * unit(rng)});
        }

    Image img(size, size, 3);
    const std::uint64_t warp_seed = detail::mix(seed + 1), tex_seed = detail::mix(seed + 2);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            // Domain warp gives the parcel borders an irregular outline.
            const double wx = x + 40.0 * (detail::value_noise(x, y, 90.0, warp_seed) - 0.5);
            const double wy = y + 40.0 * (detail::value_noise(x, y, 90.0, warp_seed ^ 0x55) - 0.5);
            const int gx = std::clamp(static_cast<int>(wx / kParcel), 0, cells - 1);
            const int gy = std::clamp(static_cast<int>(wy / kParcel), 0, cells - 1);
            const Site* best = nullptr;
            double best_d = 1e300;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int cx = gx + dx, cy = gy + dy;
                    if (cx < 0 || cy < 0 || cx >= cells || cy >= cells) continue;
                    const Site& s = sites[static_cast<std::size_t>(cy) * cells + cx];
                    const double d = (s.x - wx) * (s.x - wx) + (s.y - wy) * (s.y - wy);
                    if (d < best_d) {
                        best_d = d;
                        best = &s;
                    }
                }
            const double t = best->texture;
            const double n = 0.5 * (detail::value_noise(x, y, 48.0, tex_seed) - 0.5) +
                             0.3 * (detail::value_noise(x, y, 12.0, tex_seed ^ 0x77) - 0.5) +
                             0.2 * (detail::value_noise(x, y, 3.0, tex_seed ^ 0x99) - 0.5);
            for (int k = 0; k < 3; ++k) {
                img.at(x, y, k) = static_cast<float>(std::clamp(best->colour[k] * (1.0 + 4.0 * t * n), 0.0, 1.0));
            }
        }
    }

    // Roads: jittered polylines.
    std::uniform_real_distribution<double> pos(0.0, size);
    const int roads = std::max(4, size * size / 160000);
    for (int r = 0; r < roads; ++r) {
        double x = pos(rng), y = pos(rng);
        double heading = unit(rng) * 2 * std::numbers::pi;
        const double width = 2.0 + 3.0 * unit(rng);
        const detail::Rgb colour = detail::jitter({0.72, 0.70, 0.66}, rng, 0.08);
        const int steps = static_cast<int>(size * (0.3 + 0.5 * unit(rng)));
        for (int s = 0; s < steps; ++s) {
            heading += 0.04 * (unit(rng) - 0.5);
            x += std::cos(heading);
            y += std::sin(heading);
            const int r0 = static_cast<int>(std::ceil(width));
            for (int dy = -r0; dy <= r0; ++dy)
                for (int dx = -r0; dx <= r0; ++dx) {
                    if (dx * dx + dy * dy <= width * width) {
                        detail::paint(img, static_cast<int>(x) + dx, static_cast<int>(y) + dy, colour);
                    }
                }
        }
    }

    // Buildings and ponds.
    const int shapes = size * size / 2500;
    for (int s = 0; s < shapes; ++s) {
        const double cx = pos(rng), cy = pos(rng);
        const bool round = unit(rng) < 0.25;
        const double a = 4.0 + 14.0 * unit(rng), b = 4.0 + 14.0 * unit(rng);
        const double theta = unit(rng) * std::numbers::pi;
        const detail::Rgb colour =
            round ? detail::jitter({0.20, 0.32, 0.50}, rng, 0.1)
                  : detail::jitter(unit(rng) < 0.5 ? detail::Rgb{0.85, 0.84, 0.80} : detail::Rgb{0.55, 0.25, 0.20},
                                   rng, 0.12);
        const double ct = std::cos(theta), st = std::sin(theta);
        const int rad = static_cast<int>(std::max(a, b)) + 1;
        for (int dy = -rad; dy <= rad; ++dy)
            for (int dx = -rad; dx <= rad; ++dx) {
                const double u = ct * dx + st * dy, v = -st * dx + ct * dy;
                const bool inside = round ? (u * u) / (a * a) + (v * v) / (b * b) <= 1.0
                                          : std::abs(u) <= a && std::abs(v) <= b;
                if (!inside) continue;
                const int px = static_cast<int>(cx) + dx, py = static_cast<int>(cy) + dy;
                detail::paint(img, px, py, colour);
                // roof shading splits buildings into two tones
                if (!round && u > 0) detail::paint(img, px, py, {0.1, 0.1, 0.1}, 0.25);
            }
    }
    return img;
}

struct SynthFrame {
    Image image;
    Eigen::Matrix3d uav_to_map;  // homogeneous, UAV pixel -> map pixel
    Point2 center;               // map pixel under the UAV image centre
    double rotation_deg = 0.0;
    double scale = 1.0;
};

/// Renders a UAV view: rotation, scale and a small perspective term about
/// the frame centre, then brightness, contrast and sensor noise.
inline SynthFrame synth_frame(const Image& map, const SynthConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    SynthFrame f;
    f.rotation_deg = between(-cfg.max_rotation_deg, cfg.max_rotation_deg);
    f.scale = between(cfg.min_scale, cfg.max_scale);
    const double half = cfg.frame_size / 2.0;
    // keep the whole footprint inside the map
    const double reach = half * std::sqrt(2.0) / cfg.min_scale * (1.0 + 4 * cfg.max_perspective * half) + 4.0;
    if (2 * reach >= map.width() || 2 * reach >= map.height()) throw ConfigError("synth: map too small for frames");
    f.center = {between(reach, map.width() - reach), between(reach, map.height() - reach)};

    const double th = f.rotation_deg * std::numbers::pi / 180.0;
    Eigen::Matrix3d to_centre = Eigen::Matrix3d::Identity();
    to_centre(0, 2) = -half;
    to_centre(1, 2) = -half;
    Eigen::Matrix3d persp = Eigen::Matrix3d::Identity();
    persp(2, 0) = between(-cfg.max_perspective, cfg.max_perspective);
    persp(2, 1) = between(-cfg.max_perspective, cfg.max_perspective);
    Eigen::Matrix3d rot_scale = Eigen::Matrix3d::Identity();
    rot_scale(0, 0) = std::cos(th) / f.scale;
    rot_scale(0, 1) = -std::sin(th) / f.scale;
    rot_scale(1, 0) = std::sin(th) / f.scale;
    rot_scale(1, 1) = std::cos(th) / f.scale;
    Eigen::Matrix3d to_map = Eigen::Matrix3d::Identity();
    to_map(0, 2) = f.center.x;
    to_map(1, 2) = f.center.y;
    f.uav_to_map = to_map * rot_scale * persp * to_centre;

    const double contrast = 1.0 + between(-cfg.photometric, cfg.photometric);
    const double brightness = 1.0 + between(-cfg.photometric, cfg.photometric);
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    f.image = Image(cfg.frame_size, cfg.frame_size, map.channels());
    for (int y = 0; y < cfg.frame_size; ++y)
        for (int x = 0; x < cfg.frame_size; ++x) {
            const Eigen::Vector3d m = f.uav_to_map * Eigen::Vector3d(x, y, 1.0);
            const double mx = m.x() / m.z(), my = m.y() / m.z();
            for (int c = 0; c < map.channels(); ++c) {
                const double v = map.bilinear(mx, my, c);
                const double out = ((v - 0.5) * contrast + 0.5) * brightness + noise(rng);
                f.image.at(x, y, c) = static_cast<float>(std::clamp(out, 0.0, 1.0));
            }
        }
    return f;
}

inline nlohmann::json matrix_json(const Eigen::Matrix3d& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
    return rows;
}

/// Writes map.ppm, georef.json, frames/frame_NNNN.ppm, manifest.json and
/// truth.json (per-frame warps) into `out_dir`.
inline store::DatasetManifest synth_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir / "frames");
    const Image map = synth_map(cfg.map_size, cfg.seed);
    write_pnm((out_dir / "map.ppm").string(), map);

    store::DatasetManifest m;
    m.base_dir = out_dir;
    m.map = {"map.ppm", cfg.map_size, cfg.map_size, {cfg.origin_lat, cfg.origin_lon, cfg.gsd, cfg.gsd},
             cfg.tile_size, cfg.overlap};
    std::mt19937_64 rng(detail::mix(cfg.seed ^ 0xF00D));
    nlohmann::json truth = nlohmann::json::array();
    // Stored frames are 8-bit; render from the quantised map as a real
    // pipeline would see it.
    const Image stored_map = read_pnm((out_dir / "map.ppm").string());
    for (int k = 0; k < cfg.frames; ++k) {
        const SynthFrame f = synth_frame(stored_map, cfg, rng);
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04d", k);
        const std::string rel = std::string("frames/") + name + ".ppm";
        write_pnm((out_dir / rel).string(), f.image);
        const geo::GeoPoint gt = geo::pixel_to_geo(m.map.georef, f.center);
        m.frames.push_back({name, rel, "", "", gt, static_cast<double>(k)});
        truth.push_back({{"frame_id", name},
                         {"center_px", {f.center.x, f.center.y}},
                         {"rotation_deg", f.rotation_deg},
                         {"scale", f.scale},
                         {"uav_to_map", matrix_json(f.uav_to_map)}});
    }
    store::save_manifest(m, out_dir / "manifest.json");
    std::ofstream out(out_dir / "truth.json", std::ios::trunc);
    out << nlohmann::json{{"seed", cfg.seed}, {"frames", truth}}.dump(2) << '\n';
    std::ofstream ref(out_dir / "georef.json", std::ios::trunc);
    ref << nlohmann::json(m.map.georef).dump(2) << '\n';
    if (!out || !ref) throw IoError("synth: cannot write into " + out_dir.string());
    return m;
}

}  // namespace uavloc::synth
