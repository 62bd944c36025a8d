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

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "support/test_support.hpp"
#include "uavloc/pipeline/synth.hpp"
#include "uavloc/sascm/coarse.hpp"
#include "uavloc/sascm/model_io.hpp"
#include "uavloc/sascm/training.hpp"
#include "uavloc/store/tensor_file.hpp"

namespace fs = std::filesystem;
using namespace uavloc;
using namespace uavloc::sascm;
namespace tu = uavloc::testing;

namespace {

DenseFeatureMap with_stride(const DenseFeatureMap& f, double stride) {
    std::vector<double> data(f.data().begin(), f.data().end());
    return DenseFeatureMap(f.height(), f.width(), f.channels(), std::move(data), stride,
                           static_cast<int>(f.width() * stride), static_cast<int>(f.height() * stride));
}

// fs(i, j) = fu(i - di, j - dj), zero where the source falls outside.
DenseFeatureMap shifted(const DenseFeatureMap& fu, int di, int dj) {
    std::vector<double> data(fu.data().size(), 0.0);
    const int c = fu.channels();
    for (int i = 0; i < fu.height(); ++i)
        for (int j = 0; j < fu.width(); ++j) {
            const int si = i - di, sj = j - dj;
            if (si < 0 || sj < 0 || si >= fu.height() || sj >= fu.width()) continue;
            const auto src = fu.cell(si, sj);
            std::copy(src.begin(), src.end(), data.begin() + (static_cast<std::size_t>(i) * fu.width() + j) * c);
        }
    return DenseFeatureMap(fu.height(), fu.width(), c, std::move(data), fu.stride(), fu.source_width(),
                           fu.source_height());
}

CellMatch match(int ui, int uj, int si, int sj, double score = 0.5) { return {{ui, uj}, {si, sj}, score}; }

}  // namespace

// ---- coarse matching ----

TEST(CoarseMatch, SelfMatchIsIdentity) {
    const auto f = tu::random_feature_map(7, 6, 32, 1);
    const auto m = coarse_match(f, f, Conv4DModel::identity());
    ASSERT_EQ(m.size(), 42u);
    for (const auto& x : m) EXPECT_EQ(x.uav, x.sat);
}

TEST(CoarseMatch, SelfMatchHoldsUnderConsensusPrior) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto f = tu::random_feature_map(6, 6, 32, 10 + seed);
        const auto m = coarse_match(f, f, Conv4DModel::consensus_prior());
        EXPECT_EQ(m.size(), 36u);
        for (const auto& x : m) EXPECT_EQ(x.uav, x.sat);
    }
}

TEST(CoarseMatch, TwoCellShiftIsRecovered) {
    const auto fu = tu::random_feature_map(9, 9, 32, 2);
    const auto fs = shifted(fu, 2, 2);
    const auto m = coarse_match(fu, fs, Conv4DModel::identity());
    int interior = 0;
    for (const auto& x : m) {
        if (x.uav.i <= 6 && x.uav.j <= 6) {
            EXPECT_EQ(x.sat.i, x.uav.i + 2);
            EXPECT_EQ(x.sat.j, x.uav.j + 2);
            ++interior;
        }
    }
    EXPECT_EQ(interior, 49);
}

TEST(CoarseMatch, IdenticalSatelliteCellsLeaveOneMatch) {
    const auto fu = tu::random_feature_map(5, 5, 8, 3);
    std::vector<double> flat(5 * 5 * 8);
    for (std::size_t q = 0; q < flat.size(); ++q) flat[q] = (q % 8) * 0.25 - 0.5;
    const DenseFeatureMap fs(5, 5, 8, flat, 1.0, 5, 5);
    for (const auto& model : {Conv4DModel::identity(), Conv4DModel::consensus_prior()}) {
        EXPECT_LE(coarse_match(fu, fs, model).size(), 1u);
    }
}

TEST(CoarseMatch, ThresholdAboveEveryScoreEmptiesTheSet) {
    const auto f = tu::random_feature_map(5, 5, 16, 4);
    CoarseMatchConfig cfg;
    cfg.score_threshold = 1.0;
    EXPECT_TRUE(coarse_match(f, tu::random_feature_map(5, 5, 16, 5), Conv4DModel::identity(), cfg).empty());
}

TEST(CoarseMatch, Deterministic) {
    const auto fu = tu::random_feature_map(6, 6, 16, 6);
    const auto fs = tu::random_feature_map(6, 6, 16, 7);
    const auto model = Conv4DModel::random(3);
    const auto a = coarse_match(fu, fs, model);
    const auto b = coarse_match(fu, fs, model);
    EXPECT_EQ(a, b);
    if (!a.empty()) EXPECT_EQ(center_region_correspondence(a, fu, fs), center_region_correspondence(b, fu, fs));
}

TEST(CoarseMatchConfig, Validation) {
    EXPECT_THROW(coarse_match({}, {}, {}, {.center_neighborhood = 2}), ConfigError);
    EXPECT_THROW((CoarseMatchConfig{3, -1, 0.0}.validate()), ConfigError);
    EXPECT_THROW((CoarseMatchConfig{3, 1, 1.5}.validate()), ConfigError);
}

// ---- centre region correspondence ----

TEST(CenterRegion, SelfMatchWithStride14) {
    const auto f = with_stride(tu::random_feature_map(16, 16, 8, 8), 14.0);
    CellMatchSet self;
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) self.push_back(match(i, j, i, j, 0.25));
    const auto r = center_region_correspondence(self, f, f);
    // centre cell (8, 8); block rows/cols 7..9; margin 1 on the satellite side
    EXPECT_EQ(r.uav_region, (PixelRect{98, 98, 140, 140}));
    EXPECT_EQ(r.sat_region, (PixelRect{84, 84, 154, 154}));
    EXPECT_EQ(r.contributing_matches, 9);
    EXPECT_DOUBLE_EQ(r.confidence, 0.25);
    const auto tight = center_region_correspondence(self, f, f, {3, 0, 0.0});
    EXPECT_EQ(tight.sat_region, tight.uav_region);
}

TEST(CenterRegion, SingleMatchIsOneCellPlusMargin) {
    const auto f = with_stride(tu::random_feature_map(16, 16, 4, 9), 14.0);
    const auto r = center_region_correspondence({match(8, 8, 3, 4, 0.7), match(0, 0, 9, 9)}, f, f);
    EXPECT_EQ(r.sat_region, (PixelRect{3 * 14, 2 * 14, 6 * 14, 5 * 14}));
    EXPECT_EQ(r.contributing_matches, 1);
    EXPECT_DOUBLE_EQ(r.confidence, 0.7);
}

TEST(CenterRegion, ShiftedMapOffsetsByTwoStrides) {
    const auto fu = with_stride(tu::random_feature_map(12, 12, 32, 10), 14.0);
    const auto fs = shifted(fu, 2, 2);
    const auto m = coarse_match(fu, fs, Conv4DModel::identity());
    const auto r = center_region_correspondence(m, fu, fs, {3, 0, 0.0});
    EXPECT_EQ(r.sat_region.x0 - r.uav_region.x0, 28);
    EXPECT_EQ(r.sat_region.y0 - r.uav_region.y0, 28);
    EXPECT_EQ(r.sat_region.width(), r.uav_region.width());
    EXPECT_EQ(r.sat_region.height(), r.uav_region.height());
}

TEST(CenterRegion, ClipsAtBorders) {
    const auto f = with_stride(tu::random_feature_map(5, 5, 4, 11), 14.0);
    const auto r = center_region_correspondence({match(2, 2, 0, 0)}, f, f, {3, 2, 0.0});
    EXPECT_EQ(r.sat_region, (PixelRect{0, 0, 3 * 14, 3 * 14}));
    const auto big = center_region_correspondence({match(2, 2, 4, 4)}, f, f, {9, 1, 0.0});
    EXPECT_EQ(big.uav_region, (PixelRect{0, 0, 70, 70}));
    EXPECT_EQ(big.sat_region, (PixelRect{42, 42, 70, 70}));
}

TEST(CenterRegion, RegionsAlwaysInsideImages) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<int> dim(1, 12), nb(0, 3), margin(0, 3);
        const int hu = dim(rng), wu = dim(rng), hs = dim(rng), ws = dim(rng);
        const double stride = 7.0 + trial % 9;
        const auto fu = with_stride(tu::random_feature_map(hu, wu, 2, trial), stride);
        const auto fs = with_stride(tu::random_feature_map(hs, ws, 2, trial + 1000), stride);
        CellMatchSet ms;
        for (int k = 0; k < 6; ++k) {
            ms.push_back(match(std::uniform_int_distribution<int>(0, hu - 1)(rng),
                               std::uniform_int_distribution<int>(0, wu - 1)(rng),
                               std::uniform_int_distribution<int>(0, hs - 1)(rng),
                               std::uniform_int_distribution<int>(0, ws - 1)(rng)));
        }
        ms.push_back(match(hu / 2, wu / 2, hs - 1, ws - 1));
        const CoarseMatchConfig cfg{2 * nb(rng) + 1, margin(rng), 0.0};
        const auto r = center_region_correspondence(ms, fu, fs, cfg);
        EXPECT_TRUE(r.uav_region.inside(fu.source_width(), fu.source_height())) << r;
        EXPECT_TRUE(r.sat_region.inside(fs.source_width(), fs.source_height())) << r;
        EXPECT_FALSE(r.sat_region.empty());
    }
}

TEST(CenterRegion, NoCentreMatchFails) {
    const auto f = tu::random_feature_map(9, 9, 4, 13);
    EXPECT_THROW(center_region_correspondence({}, f, f), CoarseMatchFailure);
    EXPECT_THROW(center_region_correspondence({match(0, 0, 4, 4)}, f, f), CoarseMatchFailure);
    EXPECT_THROW(center_region_correspondence({match(4, 4, 20, 0)}, f, f), ContractViolation);
}

// ---- model persistence ----

TEST(ModelIO, RoundTripIsExactForFloatWeights) {
    auto model = Conv4DModel::random(14);
    for (auto& bank : model.layers) {
        for (auto& w : bank.weights) w = static_cast<float>(w);
        for (std::size_t q = 0; q < bank.biases.size(); ++q) bank.biases[q] = static_cast<float>(0.01 * q - 0.03);
    }
    const fs::path dir = fs::temp_directory_path() / "uavloc_model_io";
    fs::remove_all(dir);
    save_model(model, dir);
    EXPECT_EQ(load_model(dir), model);
    fs::remove_all(dir);
}

TEST(ModelIO, RejectsMissingOrMisshapenBanks) {
    const fs::path dir = fs::temp_directory_path() / "uavloc_model_bad";
    fs::remove_all(dir);
    EXPECT_THROW(load_model(dir), IoError);
    save_model(Conv4DModel::identity(), dir);
    const std::vector<float> w(16 * 81, 0.0f);
    const std::uint32_t dims[] = {16, 1, 3, 3, 3, 3};
    store::write_tensor(bank_path(dir, 1).string(), w, dims, {{"bias", std::vector<float>(16)}});
    EXPECT_THROW(load_model(dir), FormatError);
    fs::remove_all(dir);
}

// ---- training ----

class Training : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = fs::temp_directory_path() / "uavloc_training_ds";
        fs::remove_all(dir_);
        synth::SynthConfig cfg;
        cfg.frames = 8;
        cfg.seed = 5;
        synth::synth_dataset(cfg, dir_);
    }
    static void TearDownTestSuite() { fs::remove_all(dir_); }

    static store::DatasetManifest manifest(std::size_t frames) {
        auto m = store::load_manifest(dir_ / "manifest.json");
        m.frames.resize(frames);
        return m;
    }

    static PairBuildConfig small(std::uint64_t seed, int negatives = 1) {
        PairBuildConfig c;
        c.seed = seed;
        c.negatives_per_positive = negatives;
        c.features = {5, 14};
        return c;
    }

    static inline fs::path dir_;
};

TEST_F(Training, PairCountsAndLabels) {
    const auto set = build_training_pairs(manifest(5), small(1, 1));
    ASSERT_EQ(set.pairs.size(), 10u);
    int positives = 0;
    for (const auto& p : set.pairs) positives += p.label == 1;
    EXPECT_EQ(positives, 5);
    const auto three = build_training_pairs(manifest(2), small(1, 3));
    EXPECT_EQ(three.pairs.size(), 8u);
}

TEST_F(Training, NegativesLieTwoPatchWidthsAway) {
    const auto cfg = small(2, 4);
    const auto set = build_training_pairs(manifest(8), cfg);
    for (const auto& o : set.origins) {
        const Point2 c = o.patch.center();
        const double d = std::hypot(c.x - o.frame_center.x, c.y - o.frame_center.y);
        if (o.label == -1) {
            EXPECT_GT(d, 2.0 * cfg.patch_size);
        } else {
            EXPECT_LT(d, 1.0);
        }
        EXPECT_TRUE(o.patch.inside(2048, 2048));
    }
}

TEST_F(Training, SameSeedSamePairs) {
    const auto a = build_training_pairs(manifest(3), small(9, 2));
    const auto b = build_training_pairs(manifest(3), small(9, 2));
    const auto c = build_training_pairs(manifest(3), small(10, 2));
    ASSERT_EQ(a.origins.size(), b.origins.size());
    bool differs = false;
    for (std::size_t k = 0; k < a.origins.size(); ++k) {
        EXPECT_EQ(a.origins[k].patch, b.origins[k].patch);
        EXPECT_EQ(a.pairs[k].sat_features.data(), b.pairs[k].sat_features.data());
        differs = differs || !(a.origins[k].patch == c.origins[k].patch);
    }
    EXPECT_TRUE(differs);
}

TEST_F(Training, ManifestWithoutGeoFieldsIsFormatError) {
    auto j = store::manifest_to_json(manifest(2));
    j["frames"][0].erase("gt_lat");
    EXPECT_THROW(store::manifest_from_json(j, dir_), FormatError);
    auto m = manifest(2);
    m.frames[1].ground_truth.lat = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(build_training_pairs(m, small(0)), FormatError);
}

TEST_F(Training, ZeroLearningRateIsExactNoOp) {
    const auto set = build_training_pairs(manifest(2), small(3));
    const auto model = Conv4DModel::random(4);
    const auto r = train_epoch(set.pairs, model, 0.0, 1);
    EXPECT_EQ(r.model, model);
    EXPECT_TRUE(std::isfinite(r.mean_loss));
}

TEST_F(Training, SecondEpochLossNotAboveFirstInMostSeeds) {
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto set = build_training_pairs(manifest(4), small(seed));
        ASSERT_EQ(set.pairs.size(), 8u);
        const auto e1 = train_epoch(set.pairs, Conv4DModel::random(seed), kDefaultLearningRate, seed);
        const auto e2 = train_epoch(set.pairs, e1.model, kDefaultLearningRate, seed + 100);
        wins += e2.mean_loss <= e1.mean_loss;
    }
    EXPECT_GE(wins, 2);
}

TEST(TrainEpoch, RejectsEmptyPairsAndBadRates) {
    EXPECT_THROW(train_epoch({}, Conv4DModel::identity(), 0.1, 0), ContractViolation);
    const std::vector<TrainingPair> one{TrainingPair(tu::random_feature_map(3, 3, 4, 1), tu::random_feature_map(3, 3, 4, 2), 1)};
    EXPECT_THROW(train_epoch(one, Conv4DModel::identity(), -1.0, 0), ConfigError);
    EXPECT_THROW(train_epoch(one, Conv4DModel::identity(), std::nan(""), 0), ConfigError);
}

TEST(TrainEpoch, NonFiniteLossAborts) {
    const std::vector<TrainingPair> one{TrainingPair(tu::random_feature_map(3, 3, 4, 1), tu::random_feature_map(3, 3, 4, 2), 1)};
    auto model = Conv4DModel::identity();
    model.layers[0].biases[0] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(train_epoch(one, model, 0.1, 0), NumericalError);
}
