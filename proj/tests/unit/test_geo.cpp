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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "uavloc/geo/georef.hpp"
#include "uavloc/geo/metrics.hpp"

using namespace uavloc;
using namespace uavloc::geo;

namespace {
const GeoRef kChangsha{28.2, 112.9, 0.5, 0.5};
}

TEST(GeoRef, OriginMapsToOrigin) {
    const auto g = pixel_to_geo(kChangsha, {0, 0});
    EXPECT_EQ(g.lat, 28.2);
    EXPECT_EQ(g.lon, 112.9);
}

TEST(GeoRef, OneDegreeSouthAtEquator) {
    const GeoRef ref{0.0, 0.0, 1.0, 1.0};
    const auto g = pixel_to_geo(ref, {0, 111320});
    EXPECT_NEAR(g.lat, -1.0, 1e-12);
    EXPECT_NEAR(g.lon, 0.0, 1e-12);
}

TEST(GeoRef, EastIsPositiveLongitudeScaledByCosine) {
    const GeoRef ref{60.0, 10.0, 1.0, 1.0};
    const auto g = pixel_to_geo(ref, {55660, 0});  // half a degree of equatorial arc
    EXPECT_NEAR(g.lon, 11.0, 1e-9);               // cos 60 = 0.5
}

TEST(GeoRef, RoundTripWithinMicroPixel) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> lat(-59.9, 59.9), lon(-179.0, 179.0), px(-5000, 5000), gsd(0.1, 5.0);
    for (int n = 0; n < 2000; ++n) {
        const GeoRef ref{lat(rng), lon(rng), gsd(rng), gsd(rng)};
        const Point2 p{px(rng), px(rng)};
        const Point2 q = geo_to_pixel(ref, pixel_to_geo(ref, p));
        ASSERT_NEAR(q.x, p.x, 1e-6);
        ASSERT_NEAR(q.y, p.y, 1e-6);
    }
}

TEST(GeoRef, PolarLatitudeIsUnsupported) {
    EXPECT_THROW(pixel_to_geo(GeoRef{89.9, 0, 1, 1}, {0, 0}), UnsupportedLatitude);
    EXPECT_THROW(geo_to_pixel(GeoRef{-89.95, 0, 1, 1}, {0, 0}), UnsupportedLatitude);
    EXPECT_NO_THROW(pixel_to_geo(GeoRef{89.89, 0, 1, 1}, {0, 0}));
}

TEST(GeoRef, InvalidScaleIsRejected) {
    EXPECT_THROW(pixel_to_geo(GeoRef{0, 0, 0.0, 1}, {0, 0}), ContractViolation);
    EXPECT_THROW(pixel_to_geo(GeoRef{0, 0, 1, -1}, {0, 0}), ContractViolation);
}

TEST(GeoRef, JsonRoundTripAndMalformedInput) {
    nlohmann::json j = kChangsha;
    EXPECT_EQ(j.get<GeoRef>(), kChangsha);
    EXPECT_THROW((nlohmann::json{{"origin_lat", 1}}.get<GeoRef>()), FormatError);
}

TEST(GeoRef, SubGeorefDescribesTheSameLattice) {
    const Point2 offset{768, 1024};
    const GeoRef sub = sub_georef(kChangsha, offset);
    for (const Point2 p : {Point2{0, 0}, Point2{511, 0}, Point2{0, 511}, Point2{256.5, 300.25}}) {
        const auto a = pixel_to_geo(sub, p);
        const auto b = pixel_to_geo(kChangsha, {p.x + offset.x, p.y + offset.y});
        EXPECT_NEAR(a.lat, b.lat, 1e-12);
        EXPECT_NEAR(a.lon, b.lon, 1e-12);
    }
}

TEST(LocalizationError, IdenticalPointsGiveZero) {
    EXPECT_EQ(localization_error({28.2, 112.9}, {28.2, 112.9}), 0.0);
}

TEST(LocalizationError, MilliDegreeOfLatitudeAtEquator) {
    EXPECT_NEAR(localization_error({0.001, 0.0}, {0.0, 0.0}), 111.32, 0.01);
}

TEST(LocalizationError, IsSymmetric) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> lat(-60, 60), lon(-170, 170), d(-0.01, 0.01);
    for (int n = 0; n < 500; ++n) {
        const GeoPoint a{lat(rng), lon(rng)};
        const GeoPoint b{a.lat + d(rng), a.lon + d(rng)};
        EXPECT_EQ(localization_error(a, b), localization_error(b, a));
    }
}

TEST(LocalizationError, MatchesPixelDistanceOnTheLocalGrid) {
    const auto a = pixel_to_geo(kChangsha, {100, 100});
    const auto b = pixel_to_geo(kChangsha, {130, 140});  // 50 px = 25 m
    EXPECT_NEAR(localization_error(a, b), 25.0, 1e-3);
}

TEST(Trajectory, HandListedErrors) {
    const auto ev = evaluate_trajectory({10, 20, 30});
    EXPECT_NEAR(ev.success_rate, 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(ev.success_rate, 0.667, 5e-4);
    EXPECT_DOUBLE_EQ(ev.mle, 20.0);
    EXPECT_EQ(ev.drift_count(), 0u);
    EXPECT_FALSE(ev.all_drift);
}

TEST(Trajectory, AllDriftIsFlagged) {
    const auto ev = evaluate_trajectory({60, 70});
    EXPECT_EQ(ev.success_rate, 0.0);
    EXPECT_TRUE(ev.all_drift);
    EXPECT_TRUE(std::isnan(ev.mle));
    EXPECT_EQ(ev.drift_count(), 2u);
    EXPECT_TRUE(metrics_json(ev)["mle_m"].is_null());
}

TEST(Trajectory, BoundariesAreStrict) {
    const auto at25 = evaluate_trajectory({25.0});
    EXPECT_EQ(at25.success_rate, 0.0);
    const auto at50 = evaluate_trajectory({50.0});
    EXPECT_FALSE(at50.drift[0]);
    EXPECT_DOUBLE_EQ(at50.mle, 50.0);
    const auto above = evaluate_trajectory({std::nextafter(50.0, 100.0)});
    EXPECT_TRUE(above.drift[0]);
    const auto below = evaluate_trajectory({std::nextafter(25.0, 0.0)});
    EXPECT_EQ(below.success_rate, 1.0);
}

TEST(Trajectory, MissingEstimatesCountAsDrift) {
    const auto ev = evaluate_trajectory({10.0, std::numeric_limits<double>::infinity()});
    EXPECT_EQ(ev.success_rate, 0.5);
    EXPECT_TRUE(ev.drift[1]);
    EXPECT_DOUBLE_EQ(ev.mle, 10.0);
}

TEST(Trajectory, ContractViolations) {
    EXPECT_THROW(evaluate_trajectory({}), ContractViolation);
    EXPECT_THROW(evaluate_trajectory({1.0, -2.0}), ContractViolation);
    EXPECT_THROW(evaluate_trajectory({std::nan("")}), ContractViolation);
}

TEST(Trajectory, SuccessRateIsMonotoneInEachError) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> e(0, 80), bump(0, 40);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> errs(1 + rng() % 12);
        for (auto& v : errs) v = e(rng);
        const double before = evaluate_trajectory(errs).success_rate;
        errs[rng() % errs.size()] += bump(rng);
        EXPECT_LE(evaluate_trajectory(errs).success_rate, before);
    }
}

TEST(Trajectory, MleIsPermutationInvariant) {
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> e(0, 70);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> errs(2 + rng() % 20);
        for (auto& v : errs) v = e(rng);
        const auto a = evaluate_trajectory(errs);
        std::shuffle(errs.begin(), errs.end(), rng);
        const auto b = evaluate_trajectory(errs);
        EXPECT_EQ(a.all_drift, b.all_drift);
        if (!a.all_drift) EXPECT_NEAR(a.mle, b.mle, 1e-12);
        EXPECT_EQ(a.success_rate, b.success_rate);
    }
}

TEST(ResultsCsv, WriteAndReadBackErrors) {
    const auto path = std::filesystem::temp_directory_path() / "uavloc_results_test.csv";
    std::vector<ResultRow> rows{{"f000", {28.2, 112.9}, {28.2001, 112.9}, 11.132, false},
                                {"f001", {28.3, 112.9}, {28.2, 112.9}, 11132.0, true}};
    write_results_csv(path.string(), rows);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "frame_id,est_lat,est_lon,gt_lat,gt_lon,error_m,drift");
    const auto errors = read_errors_csv(path.string());
    ASSERT_EQ(errors.size(), 2u);
    EXPECT_NEAR(errors[0], 11.132, 1e-4);
    EXPECT_NEAR(errors[1], 11132.0, 1e-4);
}

TEST(ResultsCsv, PlainErrorListAndMalformedRows) {
    const auto path = std::filesystem::temp_directory_path() / "uavloc_errors_test.csv";
    {
        std::ofstream out(path);
        out << "10\n20\n30\n";
    }
    EXPECT_EQ(read_errors_csv(path.string()), (std::vector<double>{10, 20, 30}));
    {
        std::ofstream out(path);
        out << "frame_id,error_m\nf0,abc\n";
    }
    EXPECT_THROW(read_errors_csv(path.string()), FormatError);
}
