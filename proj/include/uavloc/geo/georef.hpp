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
#include <numbers>

#include <nlohmann/json.hpp>

#include "uavloc/core/error.hpp"
#include "uavloc/core/geometry.hpp"

namespace uavloc::geo {

/// Meters per degree of latitude in the local equirectangular model.
inline constexpr double kMetersPerDegree = 111320.0;

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;
    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Affine pixel -> (lat, lon) transform of an image: pixel (0, 0) sits at
/// the origin, x grows east and y grows south.
struct GeoRef {
    double origin_lat = 0.0;
    double origin_lon = 0.0;
    double meters_per_pixel_x = 1.0;
    double meters_per_pixel_y = 1.0;

    void validate() const {
        if (!(meters_per_pixel_x > 0.0) || !(meters_per_pixel_y > 0.0)) {
            throw ContractViolation("GeoRef: meters per pixel must be positive");
        }
        if (!(std::abs(origin_lat) <= 90.0) || !(std::abs(origin_lon) <= 180.0)) {
            throw ContractViolation("GeoRef: origin out of range");
        }
    }

    friend bool operator==(const GeoRef&, const GeoRef&) = default;
};

inline void to_json(nlohmann::json& j, const GeoRef& g) {
    j = {{"origin_lat", g.origin_lat},
         {"origin_lon", g.origin_lon},
         {"meters_per_pixel_x", g.meters_per_pixel_x},
         {"meters_per_pixel_y", g.meters_per_pixel_y}};
}

inline void from_json(const nlohmann::json& j, GeoRef& g) {
    try {
        g.origin_lat = j.at("origin_lat").get<double>();
        g.origin_lon = j.at("origin_lon").get<double>();
        g.meters_per_pixel_x = j.at("meters_per_pixel_x").get<double>();
        g.meters_per_pixel_y = j.at("meters_per_pixel_y").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("georef: ") + e.what());
    }
    g.validate();
}

namespace detail {

inline double meters_per_degree_lon(double lat_deg) {
    return kMetersPerDegree * std::cos(lat_deg * std::numbers::pi / 180.0);
}

inline void check_latitude(const GeoRef& ref) {
    ref.validate();
    if (std::abs(ref.origin_lat) >= 89.9) throw UnsupportedLatitude("local geo model unsupported at |lat| >= 89.9");
}

}  // namespace detail

inline GeoPoint pixel_to_geo(const GeoRef& ref, const Point2& p) {
    detail::check_latitude(ref);
    return {ref.origin_lat - p.y * ref.meters_per_pixel_y / kMetersPerDegree,
            ref.origin_lon + p.x * ref.meters_per_pixel_x / detail::meters_per_degree_lon(ref.origin_lat)};
}

inline Point2 geo_to_pixel(const GeoRef& ref, const GeoPoint& g) {
    detail::check_latitude(ref);
    return {(g.lon - ref.origin_lon) * detail::meters_per_degree_lon(ref.origin_lat) / ref.meters_per_pixel_x,
            (ref.origin_lat - g.lat) * kMetersPerDegree / ref.meters_per_pixel_y};
}

/// GeoRef of a sub-image whose pixel (0, 0) is `offset` in `parent`. The
/// longitude scale keeps the parent's reference latitude so both describe
/// the same pixel lattice.
inline GeoRef sub_georef(const GeoRef& parent, const Point2& offset) {
    const GeoPoint o = pixel_to_geo(parent, offset);
    GeoRef out = parent;
    out.origin_lat = o.lat;
    out.origin_lon = o.lon;
    out.meters_per_pixel_x =
        parent.meters_per_pixel_x * detail::meters_per_degree_lon(o.lat) / detail::meters_per_degree_lon(parent.origin_lat);
    return out;
}

/// Equirectangular ground distance in meters. Longitude is scaled at the
/// mean latitude of the two points so the distance is symmetric.
inline double localization_error(const GeoPoint& est, const GeoPoint& gt) {
    const double dlat = (est.lat - gt.lat) * kMetersPerDegree;
    const double dlon = (est.lon - gt.lon) * detail::meters_per_degree_lon(0.5 * (est.lat + gt.lat));
    return std::hypot(dlat, dlon);
}

}  // namespace uavloc::geo
