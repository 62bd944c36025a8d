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

#include <chrono>
#include <cmath>
#include <random>
#include <set>

#include "support/test_support.hpp"
#include "uavloc/tensor/assignment.hpp"
#include "uavloc/tensor/conv4d.hpp"
#include "uavloc/tensor/correlation.hpp"
#include "uavloc/tensor/loss.hpp"

namespace uavloc {
namespace {

DenseFeatureMap one_cell(std::vector<double> v) {
    const int c = static_cast<int>(v.size());
    return DenseFeatureMap(1, 1, c, std::move(v), 1.0, 1, 1);
}

TEST(FeatureMap, RejectsInconsistentShapes) {
    EXPECT_THROW(DenseFeatureMap(2, 2, 3, std::vector<double>(11), 1.0, 2, 2), DimensionError);
    EXPECT_THROW(DenseFeatureMap(2, 2, 1, std::vector<double>(4), 0.5, 2, 2), ContractViolation);
    EXPECT_THROW(DenseFeatureMap(4, 4, 1, std::vector<double>(16), 14.0, 20, 20), ContractViolation);
    EXPECT_THROW(DenseFeatureMap(1, 1, 1, {std::nan("")}, 1.0, 1, 1), ContractViolation);
}

TEST(CosineCorrelation, HandExamples) {
    EXPECT_DOUBLE_EQ(cosine_correlation(one_cell({3, 4}), one_cell({3, 4}))(0, 0, 0, 0), 1.0);
    EXPECT_DOUBLE_EQ(cosine_correlation(one_cell({1, 0}), one_cell({0, 1}))(0, 0, 0, 0), 0.0);
    EXPECT_NEAR(cosine_correlation(one_cell({1, 0}), one_cell({1, 1}))(0, 0, 0, 0), 0.70710678, 1e-6);
    EXPECT_DOUBLE_EQ(cosine_correlation(one_cell({1, 0}), one_cell({-1, 0}))(0, 0, 0, 0), 0.0);
    EXPECT_DOUBLE_EQ(cosine_correlation(one_cell({0, 0}), one_cell({1, 0}))(0, 0, 0, 0), 0.0);
}

TEST(CosineCorrelation, ChannelMismatchThrows) {
    EXPECT_THROW(cosine_correlation(one_cell({1, 0}), one_cell({1, 0, 0})), DimensionError);
}

TEST(CosineCorrelation, BoundedOnRandomInputs) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = cosine_correlation(testing::random_feature_map(3, 4, 5, seed),
                                          testing::random_feature_map(4, 2, 5, seed + 100));
        EXPECT_EQ(s.dims(), (Tensor4D::Dims{3, 4, 4, 2}));
        for (double v : s.data()) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(SoftMutualNN, ZeroTensorStaysZero) {
    const Tensor4D z({2, 3, 2, 3});
    EXPECT_EQ(soft_mutual_nn(z), z);
}

TEST(SoftMutualNN, HandComputedExample) {
    Tensor4D t({1, 2, 1, 2});
    t(0, 0, 0, 0) = 0.8;
    t(0, 0, 0, 1) = 0.4;
    t(0, 1, 0, 0) = 0.2;
    t(0, 1, 0, 1) = 0.6;
    const auto s = soft_mutual_nn(t);
    EXPECT_DOUBLE_EQ(s(0, 0, 0, 0), 0.8);
    EXPECT_NEAR(s(0, 0, 0, 1), 0.4 * (0.4 / 0.6) * (0.4 / 0.8), 1e-15);
    EXPECT_NEAR(s(0, 0, 0, 1), 0.1333333333333, 1e-12);
    EXPECT_NEAR(s(0, 1, 0, 0), 0.0166666666667, 1e-12);
    EXPECT_DOUBLE_EQ(s(0, 1, 0, 1), 0.6);
}

TEST(SoftMutualNN, NegativeEntryIsContractViolation) {
    Tensor4D t({1, 1, 1, 2});
    t(0, 0, 0, 1) = -0.1;
    EXPECT_THROW(soft_mutual_nn(t), ContractViolation);
}

TEST(SoftMutualNN, ContractiveAndPreservesMutualMaxima) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto t = testing::random_tensor({3, 2, 2, 3}, 1, seed);
        const auto s = soft_mutual_nn(t);
        const auto ref = testing::naive_soft_mnn(t);
        const auto m = slice_maxima(t);
        const auto& d = t.dims();
        for (int i = 0; i < d[0]; ++i)
            for (int j = 0; j < d[1]; ++j)
                for (int k = 0; k < d[2]; ++k)
                    for (int l = 0; l < d[3]; ++l) {
                        const double v = t(i, j, k, l);
                        EXPECT_NEAR(s(i, j, k, l), ref(i, j, k, l), 1e-15);
                        EXPECT_GE(s(i, j, k, l), 0.0);
                        EXPECT_LE(s(i, j, k, l), v);
                        const bool mutual = v == m.over_uav[k * d[3] + l] && v == m.over_sat[i * d[1] + j];
                        if (mutual) {
                            EXPECT_EQ(s(i, j, k, l), v);
                        } else {
                            EXPECT_LT(s(i, j, k, l), v);
                        }
                    }
    }
}

TEST(Conv4D, IdentityKernelReproducesInput) {
    Conv4DBank bank(1, 1);
    bank.weight(0, 0, Conv4DBank::tap(1, 1, 1, 1)) = 1.0;
    const auto x = testing::random_tensor({3, 4, 5, 2}, 1, 7);
    EXPECT_EQ(conv4d_forward(x, bank), x);
}

TEST(Conv4D, AllOnesKernelOnInteriorOneHot) {
    Conv4DBank bank(1, 1);
    std::fill(bank.weights.begin(), bank.weights.end(), 1.0);
    Tensor4D x({5, 5, 5, 5});
    x(2, 2, 2, 2) = 1.0;
    const auto y = conv4d_forward(x, bank);
    int ones = 0;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            for (int k = 0; k < 5; ++k)
                for (int l = 0; l < 5; ++l) {
                    const bool inside = std::abs(i - 2) <= 1 && std::abs(j - 2) <= 1 && std::abs(k - 2) <= 1 &&
                                        std::abs(l - 2) <= 1;
                    EXPECT_EQ(y(i, j, k, l), inside ? 1.0 : 0.0);
                    ones += y(i, j, k, l) == 1.0;
                }
    EXPECT_EQ(ones, 81);
}

TEST(Conv4D, MatchesDirectSummation) {
    auto model = Conv4DModel::random(3);
    for (auto& b : model.layers[1].biases) b = 0.05;
    const auto x = testing::random_tensor({3, 4, 2, 3}, 16, 11, -1.0, 1.0);
    const auto fast = conv4d_forward(x, model.layers[1]);
    const auto slow = testing::naive_conv4d(x, model.layers[1]);
    ASSERT_EQ(fast.size(), slow.size());
    for (std::size_t q = 0; q < fast.size(); ++q) EXPECT_NEAR(fast.data()[q], slow.data()[q], 1e-12);
}

TEST(Conv4D, Linearity) {
    const auto model = Conv4DModel::random(5);
    const auto& bank = model.layers[0];  // zero bias
    const auto a = testing::random_tensor({4, 4, 4, 4}, 1, 1, -1.0, 1.0);
    const auto b = testing::random_tensor({4, 4, 4, 4}, 1, 2, -1.0, 1.0);
    const double alpha = 0.7, beta = -1.3;
    Tensor4D mix(a.dims());
    for (std::size_t q = 0; q < mix.size(); ++q) mix.data()[q] = alpha * a.data()[q] + beta * b.data()[q];
    const auto ym = conv4d_forward(mix, bank);
    const auto ya = conv4d_forward(a, bank);
    const auto yb = conv4d_forward(b, bank);
    for (std::size_t q = 0; q < ym.size(); ++q) {
        EXPECT_NEAR(ym.data()[q], alpha * ya.data()[q] + beta * yb.data()[q], 1e-6);
    }
}

TEST(Conv4D, TranslationEquivariantInInterior) {
    const auto model = Conv4DModel::random(9);
    const auto& bank = model.layers[0];
    const auto x = testing::random_tensor({6, 4, 6, 4}, 1, 4);
    Tensor4D shifted(x.dims());
    for (int i = 1; i < 6; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 1; k < 6; ++k)
                for (int l = 0; l < 4; ++l) shifted(i, j, k, l) = x(i - 1, j, k - 1, l);
    const auto y = conv4d_forward(x, bank);
    const auto ys = conv4d_forward(shifted, bank);
    // Outputs whose receptive field stays clear of the borders and of the
    // zero row introduced by the shift.
    for (int i = 2; i < 5; ++i)
        for (int j = 1; j < 3; ++j)
            for (int k = 2; k < 5; ++k)
                for (int l = 1; l < 3; ++l) EXPECT_NEAR(ys(i, j, k, l), y(i - 1, j, k - 1, l), 1e-12);
}

TEST(Conv4D, ChannelMismatchThrows) {
    const Conv4DBank bank(16, 16);
    EXPECT_THROW(conv4d_forward(Tensor4D({2, 2, 2, 2}, 1), bank), DimensionError);
}

TEST(Conv4DModel, ChannelChainAndInitBounds) {
    const auto m = Conv4DModel::random(1);
    EXPECT_EQ(m.layers[0].in_channels, 1);
    EXPECT_EQ(m.layers[0].out_channels, 16);
    EXPECT_EQ(m.layers[1].in_channels, 16);
    EXPECT_EQ(m.layers[1].out_channels, 16);
    EXPECT_EQ(m.layers[2].in_channels, 16);
    EXPECT_EQ(m.layers[2].out_channels, 1);
    for (const auto& bank : m.layers) {
        const double a = 1.0 / std::sqrt(bank.in_channels * 81.0);
        for (double w : bank.weights) EXPECT_LE(std::abs(w), a);
        for (double b : bank.biases) EXPECT_EQ(b, 0.0);
    }
    EXPECT_EQ(Conv4DModel::random(1), m);
    EXPECT_NE(Conv4DModel::random(2), m);
}

TEST(NeighborhoodConsensus, ZeroInputZeroBias) {
    const Tensor4D z({3, 3, 3, 3});
    EXPECT_EQ(neighborhood_consensus(z, Conv4DModel::random(4)), z);
}

TEST(NeighborhoodConsensus, ZeroInputWithBiases) {
    auto model = Conv4DModel::identity();
    model.layers[0].biases[0] = 0.25;
    model.layers[2].biases[0] = -0.1;
    const auto m = neighborhood_consensus(Tensor4D({2, 2, 2, 2}), model);
    // Each pass: relu(relu(relu(0.25)) - 0.1) = 0.15; two passes summed.
    for (double v : m.data()) EXPECT_NEAR(v, 0.3, 1e-15);
}

TEST(NeighborhoodConsensus, IdentityModelDoubles) {
    const auto fu = testing::random_feature_map(3, 3, 4, 21);
    const auto s = soft_mutual_nn(cosine_correlation(fu, fu));
    const auto m = neighborhood_consensus(s, Conv4DModel::identity());
    for (std::size_t q = 0; q < m.size(); ++q) EXPECT_DOUBLE_EQ(m.data()[q], 2.0 * s.data()[q]);
}

TEST(NeighborhoodConsensus, SourceExchangeSymmetry) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto model = Conv4DModel::random(seed + 50);
        const auto fu = testing::random_feature_map(4, 3, 6, seed);
        const auto fs = testing::random_feature_map(3, 4, 6, seed + 1000);
        const auto m = neighborhood_consensus(soft_mutual_nn(cosine_correlation(fu, fs)), model);
        const auto swapped =
            transpose_sides(neighborhood_consensus(soft_mutual_nn(cosine_correlation(fs, fu)), model));
        ASSERT_EQ(m.dims(), swapped.dims());
        for (std::size_t q = 0; q < m.size(); ++q) {
            EXPECT_NEAR(m.data()[q], swapped.data()[q], 1e-6);
            EXPECT_GE(m.data()[q], 0.0);
        }
    }
}

TEST(DualSoftmax, UniformOnConstantInput) {
    const Tensor4D c({2, 2, 3, 3}, 1, 0.7);
    const auto p = dual_softmax(c);
    for (double v : p.prob_u.data()) EXPECT_NEAR(v, 0.25, 1e-15);
    for (double v : p.prob_s.data()) EXPECT_NEAR(v, 1.0 / 9.0, 1e-15);
}

TEST(DualSoftmax, LargeGapWinner) {
    Tensor4D t({2, 2, 1, 1});
    t(0, 0, 0, 0) = 10.0;
    const auto p = dual_softmax(t);
    EXPECT_GE(p.prob_u(0, 0, 0, 0), 0.9996);
    EXPECT_NEAR(p.prob_u(0, 0, 0, 0), std::exp(10.0) / (std::exp(10.0) + 3.0), 1e-15);
}

TEST(DualSoftmax, NormalizationOnRandomInputs) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto t = testing::random_tensor({3, 4, 2, 5}, 1, seed, -50.0, 800.0);
        const auto p = dual_softmax(t);
        const auto& d = t.dims();
        for (int k = 0; k < d[2]; ++k)
            for (int l = 0; l < d[3]; ++l) {
                double s = 0.0;
                for (int i = 0; i < d[0]; ++i)
                    for (int j = 0; j < d[1]; ++j) s += p.prob_u(i, j, k, l);
                EXPECT_NEAR(s, 1.0, 1e-5);
            }
        for (int i = 0; i < d[0]; ++i)
            for (int j = 0; j < d[1]; ++j) {
                double s = 0.0;
                for (int k = 0; k < d[2]; ++k)
                    for (int l = 0; l < d[3]; ++l) s += p.prob_s(i, j, k, l);
                EXPECT_NEAR(s, 1.0, 1e-5);
            }
        for (double v : p.prob_u.data()) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(HardAssign, SelfMatchingIsIdentity) {
    const auto f = testing::random_feature_map(3, 4, 8, 5);
    const auto p = dual_softmax(cosine_correlation(f, f));
    const auto matches = hard_assign(p);
    ASSERT_EQ(matches.size(), 12u);
    for (const auto& m : matches) EXPECT_EQ(m.uav, m.sat);
}

TEST(HardAssign, UniformTieBreak) {
    const auto p = dual_softmax(Tensor4D({2, 2, 2, 2}));
    const auto matches = hard_assign(p);
    ASSERT_EQ(matches.size(), 1u);
    EXPECT_EQ(matches[0].uav, (CellIndex{0, 0}));
    EXPECT_EQ(matches[0].sat, (CellIndex{0, 0}));
    EXPECT_NEAR(matches[0].score, 0.0625, 1e-15);
}

TEST(HardAssign, ThresholdAboveMaxIsEmpty) {
    const auto f = testing::random_feature_map(3, 3, 4, 8);
    const auto p = dual_softmax(cosine_correlation(f, f));
    EXPECT_TRUE(hard_assign(p, 1.01).empty());
}

TEST(HardAssign, InjectiveBothWays) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = dual_softmax(testing::random_tensor({4, 3, 3, 4}, 1, seed, 0.0, 3.0));
        const auto matches = hard_assign(p);
        std::set<std::pair<int, int>> u, s;
        for (const auto& m : matches) {
            EXPECT_TRUE(u.insert({m.uav.i, m.uav.j}).second);
            EXPECT_TRUE(s.insert({m.sat.i, m.sat.j}).second);
            EXPECT_GE(m.score, 0.0);
            EXPECT_LE(m.score, 1.0);
        }
    }
}

TEST(WeakSupervisionLoss, PerfectOneHot) {
    AssignmentProbabilities p{Tensor4D({1, 2, 1, 2}), Tensor4D({1, 2, 1, 2})};
    for (int j = 0; j < 2; ++j) {
        p.prob_u(0, j, 0, j) = 1.0;
        p.prob_s(0, j, 0, j) = 1.0;
    }
    EXPECT_DOUBLE_EQ(weak_supervision_loss(p, 1).value, -2.0);
    EXPECT_DOUBLE_EQ(weak_supervision_loss(p, -1).value, 2.0);
}

TEST(WeakSupervisionLoss, UniformSingleMatch) {
    const auto p = dual_softmax(Tensor4D({2, 2, 2, 2}));
    const auto loss = weak_supervision_loss(p, 1);
    EXPECT_DOUBLE_EQ(loss.value, -0.5);
    EXPECT_FALSE(loss.empty_assignment);
}

TEST(WeakSupervisionLoss, EmptyAssignmentFlagged) {
    const auto p = dual_softmax(Tensor4D({2, 2, 2, 2}));
    const auto loss = weak_supervision_loss(p, CellMatchSet{}, 1);
    EXPECT_EQ(loss.value, 0.0);
    EXPECT_TRUE(loss.empty_assignment);
}

TEST(LossGradients, DeadNetworkHasZeroWeightGradients) {
    const TrainingPair pair(DenseFeatureMap(3, 3, 4), DenseFeatureMap(3, 3, 4), 1);
    const auto g = loss_gradients(pair, Conv4DModel::random(2));
    for (const auto& layer : g.layers)
        for (double v : layer.weights) EXPECT_EQ(v, 0.0);
}

TEST(LossGradients, FullCoordinateCheckOnSmallInput) {
    // Every parameter, 2x2x2x2 tensor (the full 4^4 sweep lives in the
    // acceptance suite, sampled).
    const TrainingPair pair(testing::random_feature_map(2, 2, 5, 1), testing::random_feature_map(2, 2, 5, 2), 1);
    auto model = Conv4DModel::random(17);
    const auto rep = testing::check_gradients(pair, model);
    EXPECT_LT(rep.max_relative_error, 1e-4);
    EXPECT_GT(rep.checked, model.parameter_count() * 9 / 10);
}

TEST(LossGradients, UnusedWeightHasZeroGradient) {
    // With a 1x1 grid on each side only the centre tap of every kernel ever
    // reads inside the padded volume.
    const TrainingPair pair(testing::random_feature_map(1, 1, 4, 3), testing::random_feature_map(1, 1, 4, 4), -1);
    const auto g = loss_gradients(pair, Conv4DModel::random(6));
    const int center = Conv4DBank::tap(1, 1, 1, 1);
    for (int n = 0; n < 3; ++n) {
        const auto& bank = Conv4DModel::random(6).layers[n];
        for (int o = 0; o < bank.out_channels; ++o)
            for (int c = 0; c < bank.in_channels; ++c)
                for (int t = 0; t < kConvTaps; ++t) {
                    if (t == center) continue;
                    EXPECT_EQ(g.layers[n].weights[bank.weight_index(o, c, t)], 0.0);
                }
    }
}

}  // namespace
}  // namespace uavloc
