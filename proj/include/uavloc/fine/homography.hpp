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
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "uavloc/core/error.hpp"
#include "uavloc/core/geometry.hpp"
#include "uavloc/fine/keypoints.hpp"

namespace uavloc::fine {

/// Invertible 3x3 projective transform, scaled so h33 = 1 when nonzero.
class Homography {
public:
    Homography() : m_(Eigen::Matrix3d::Identity()) {}

    explicit Homography(const Eigen::Matrix3d& m) : m_(m) {
        if (!m_.allFinite()) throw ContractViolation("Homography: non-finite entries");
        if (m_(2, 2) != 0.0) m_ /= m_(2, 2);
        const double scale = m_.cwiseAbs().maxCoeff();
        if (!(scale > 0.0) || std::abs(m_.determinant()) <= 1e-12 * scale * scale * scale) {
            throw ContractViolation("Homography: singular matrix");
        }
    }

    static Homography translation(double dx, double dy) {
        Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
        m(0, 2) = dx;
        m(1, 2) = dy;
        return Homography(m);
    }

    [[nodiscard]] const Eigen::Matrix3d& matrix() const { return m_; }
    [[nodiscard]] Homography inverse() const { return Homography(m_.inverse()); }

    /// Homogeneous application; nullopt when the point maps to infinity.
    [[nodiscard]] std::optional<Point2> apply(const Point2& p) const {
        const Eigen::Vector3d v = m_ * Eigen::Vector3d(p.x, p.y, 1.0);
        if (!(std::abs(v.z()) >= 1e-12)) return std::nullopt;
        return Point2{v.x() / v.z(), v.y() / v.z()};
    }

private:
    Eigen::Matrix3d m_;
};

inline Point2 project_center(const Homography& h, const Point2& c) {
    const auto p = h.apply(c);
    if (!p) throw ProjectionFailure("project_center: point maps to infinity");
    return *p;
}

namespace detail {

// Similarity moving the centroid to the origin with mean distance sqrt(2).
inline std::optional<Eigen::Matrix3d> hartley_normalization(const std::vector<Point2>& pts) {
    double cx = 0.0, cy = 0.0;
    for (const auto& p : pts) {
        cx += p.x;
        cy += p.y;
    }
    cx /= static_cast<double>(pts.size());
    cy /= static_cast<double>(pts.size());
    double mean = 0.0;
    for (const auto& p : pts) mean += std::hypot(p.x - cx, p.y - cy);
    mean /= static_cast<double>(pts.size());
    if (!(mean > 1e-12)) return std::nullopt;
    const double s = std::sqrt(2.0) / mean;
    Eigen::Matrix3d t;
    t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
    return t;
}

inline bool nearly_collinear(const Point2& p0, const Point2& p1, const Point2& p2) {
    const double ux = p1.x - p0.x, uy = p1.y - p0.y, vx = p2.x - p0.x, vy = p2.y - p0.y;
    const double lu = std::hypot(ux, uy), lv = std::hypot(vx, vy);
    if (!(lu > 1e-9) || !(lv > 1e-9)) return true;
    return std::abs(ux * vy - uy * vx) / (lu * lv) < 1e-6;
}

inline bool degenerate_sample(const std::vector<Point2>& p) {
    for (std::size_t a = 0; a < p.size(); ++a)
        for (std::size_t b = a + 1; b < p.size(); ++b)
            for (std::size_t c = b + 1; c < p.size(); ++c) {
                if (nearly_collinear(p[a], p[b], p[c])) return true;
            }
    return false;
}

}  // namespace detail

/// Normalised DLT: least-squares algebraic fit of b ~ H a over >= 4 pairs.
inline std::optional<Homography> fit_homography_dlt(const std::vector<Point2>& a, const std::vector<Point2>& b) {
    if (a.size() != b.size() || a.size() < 4) return std::nullopt;
    const auto ta = detail::hartley_normalization(a);
    const auto tb = detail::hartley_normalization(b);
    if (!ta || !tb) return std::nullopt;
    const auto n = static_cast<Eigen::Index>(a.size());
    Eigen::MatrixXd A(2 * n, 9);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Vector3d p = *ta * Eigen::Vector3d(a[k].x, a[k].y, 1.0);
        const Eigen::Vector3d q = *tb * Eigen::Vector3d(b[k].x, b[k].y, 1.0);
        const double x = p.x(), y = p.y(), u = q.x(), v = q.y();
        A.row(2 * k) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
        A.row(2 * k + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const Eigen::VectorXd h = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    const Eigen::Matrix3d m = tb->inverse() * hn * *ta;
    try {
        Homography h(m);
        (void)h.inverse();  // both directions must be well conditioned
        return h;
    } catch (const ContractViolation&) {
        return std::nullopt;
    }
}

/// |b - H a| + |a - H^-1 b|; infinite when either side maps to infinity.
inline double symmetric_transfer_error(const Homography& h, const Homography& h_inv, const Point2& a,
                                       const Point2& b) {
    const auto fa = h.apply(a);
    const auto bb = h_inv.apply(b);
    if (!fa || !bb) return std::numeric_limits<double>::infinity();
    return std::hypot(fa->x - b.x, fa->y - b.y) + std::hypot(bb->x - a.x, bb->y - a.y);
}

inline double mean_transfer_error(const Homography& h, const PointMatchSet& matches, const std::vector<bool>& mask) {
    const Homography inv = h.inverse();
    double sum = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < matches.size(); ++k) {
        if (!mask[k]) continue;
        sum += symmetric_transfer_error(h, inv, matches[k].a, matches[k].b);
        ++n;
    }
    return n > 0 ? sum / n : 0.0;
}

struct RansacResult {
    Homography homography;
    std::vector<bool> inliers;
    int inlier_count = 0;
    int iterations = 0;
    double mean_error = 0.0;       // over the inliers, final model
    double sample_model_error = 0.0;  // same inliers, best minimal-sample model
};

/// Seeded RANSAC over 4-point samples, adaptive iteration count, then a
/// least-squares refit on the inliers kept only if it does not raise the
/// mean symmetric transfer error.
inline RansacResult estimate_homography_ransac(const PointMatchSet& matches, const FineConfig& cfg,
                                               std::uint64_t seed) {
    cfg.validate();
    const int n = static_cast<int>(matches.size());
    if (n < 4) throw EstimationFailure("RANSAC needs at least 4 matches, got " + std::to_string(n));
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, n - 1);

    std::optional<Homography> best;
    int best_count = -1;
    double best_error = std::numeric_limits<double>::infinity();
    std::vector<bool> best_mask;
    long budget = cfg.ransac_max_iters;
    int trial = 0;
    std::vector<double> errors(static_cast<std::size_t>(n));
    for (; trial < budget; ++trial) {
        int idx[4];
        for (int s = 0; s < 4; ++s) {
            bool fresh = false;
            while (!fresh) {
                idx[s] = pick(rng);
                fresh = true;
                for (int t = 0; t < s; ++t) fresh = fresh && idx[t] != idx[s];
            }
        }
        std::vector<Point2> pa, pb;
        for (int s : idx) {
            pa.push_back(matches[s].a);
            pb.push_back(matches[s].b);
        }
        if (detail::degenerate_sample(pa) || detail::degenerate_sample(pb)) continue;
        const auto h = fit_homography_dlt(pa, pb);
        if (!h) continue;
        const Homography inv = h->inverse();
        int count = 0;
        double err = 0.0;
        for (int k = 0; k < n; ++k) {
            errors[k] = symmetric_transfer_error(*h, inv, matches[k].a, matches[k].b);
            if (errors[k] < cfg.ransac_threshold) {
                ++count;
                err += errors[k];
            }
        }
        if (count > best_count || (count == best_count && err < best_error)) {
            best = h;
            best_count = count;
            best_error = err;
            best_mask.assign(static_cast<std::size_t>(n), false);
            for (int k = 0; k < n; ++k) best_mask[k] = errors[k] < cfg.ransac_threshold;
            const double w = static_cast<double>(count) / n;
            const double miss = 1.0 - std::pow(w, 4);
            if (miss <= 0.0) {
                budget = trial + 1;
            } else {
                const double need = std::ceil(std::log(1.0 - cfg.ransac_confidence) / std::log(miss));
                if (std::isfinite(need)) budget = std::min<long>(cfg.ransac_max_iters, static_cast<long>(need));
            }
        }
    }
    if (!best) throw EstimationFailure("RANSAC: every sample was degenerate");

    RansacResult out;
    out.homography = *best;
    out.inliers = best_mask;
    out.inlier_count = best_count;
    out.iterations = trial;
    out.sample_model_error = mean_transfer_error(*best, matches, best_mask);
    out.mean_error = out.sample_model_error;
    if (best_count >= 4) {
        std::vector<Point2> pa, pb;
        for (int k = 0; k < n; ++k) {
            if (!best_mask[k]) continue;
            pa.push_back(matches[k].a);
            pb.push_back(matches[k].b);
        }
        if (const auto refit = fit_homography_dlt(pa, pb)) {
            const double e = mean_transfer_error(*refit, matches, best_mask);
            if (e <= out.mean_error) {
                out.homography = *refit;
                out.mean_error = e;
            }
        }
    }
    return out;
}

}  // namespace uavloc::fine
