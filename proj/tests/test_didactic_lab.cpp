#include <gtest/gtest.h>

#include <sstream>

#include "pars/didactic_lab.hpp"

using namespace pars;

namespace {

RegressionTask small_task() {
    RegressionTask t;
    t.hidden_dims = {32, 32};
    t.samples = 256;
    t.batch_size = 64;
    t.lr = 1e-3;
    return t;
}

}  // namespace

TEST(ConeTarget, Examples) {
    RegressionTask t;
    EXPECT_EQ(cone_target(t, Vector::Zero(2)), 0.0);
    t.c_reward = 100.0;
    EXPECT_DOUBLE_EQ(cone_target(t, (Vector(2) << 0.3, 0.4).finished()), 50.0);
    EXPECT_TRUE(std::isnan(cone_target(t, (Vector(2) << 0.6, 0.0).finished())));
}

TEST(ConeDataset, PointsInsideDiscWithExactTargets) {
    RegressionTask t;
    t.c_reward = 7.0;
    const LabeledPoints d = make_cone_dataset(t, 3);
    ASSERT_EQ(d.x.cols(), t.samples);
    for (Eigen::Index k = 0; k < d.x.cols(); ++k) {
        ASSERT_LE(d.x.col(k).norm(), 0.5);
        EXPECT_NEAR(d.y[k], 7.0 * d.x.col(k).norm(), 1e-14);
    }
}

TEST(ConeDataset, TwoConeHasGapBetweenDiscs) {
    RegressionTask t;
    const LabeledPoints d = make_two_cone_dataset(t, 3);
    t.kind = ConeKind::TwoCone;
    int left = 0;
    for (Eigen::Index k = 0; k < d.x.cols(); ++k) {
        const Vector x = d.x.col(k);
        EXPECT_GE(std::abs(x[0]), t.two_cone_offset - t.two_cone_radius);
        EXPECT_EQ(region_of(t, x), Region::ID);
        EXPECT_NEAR(d.y[k], cone_target(t, x), 1e-14);
        left += x[0] < 0;
    }
    EXPECT_EQ(left, t.samples / 2);
    EXPECT_EQ(region_of(t, Vector::Zero(2)), Region::OodIn);
    EXPECT_EQ(region_of(t, (Vector(2) << 0.0, 0.9).finished()), Region::OodOut);
}

TEST(FitRegressor, ZeroStepsGivesInitialization) {
    const RegressionTask t = small_task();
    EXPECT_EQ(fit_regressor(t, 0, 4), mlp_init(t.spec(), derive_seed(4, "init")));
}

TEST(FitRegressor, DeterministicPerSeed) {
    const RegressionTask t = small_task();
    EXPECT_EQ(fit_regressor(t, 30, 4), fit_regressor(t, 30, 4));
}

TEST(FitRegressor, LayerNormFitConverges) {
    RegressionTask t = small_task();
    t.use_ln = true;
    const LabeledPoints d = make_cone_points(t, 1);
    const MlpParams p = fit_regressor(t, d, 2000, 1);
    EXPECT_LT(training_mse(p, d) / (t.c_reward * t.c_reward), 1e-3);
}

TEST(FitRegressor, PenaltyPullsFarPredictionsTowardTarget) {
    RegressionTask t = small_task();
    t.use_ln = true;
    const LabeledPoints d = make_cone_points(t, 2);
    RegressionTask with = t;
    with.use_pa = true;
    with.pa_weight = 1.0;
    const Matrix far = Matrix::Constant(2, 1, 7.0);
    const double plain = std::abs(forward_batch(fit_regressor(t, d, 800, 2), far)(0, 0));
    const double pulled = std::abs(forward_batch(fit_regressor(with, d, 800, 2), far)(0, 0));
    EXPECT_LT(pulled, plain);
}

TEST(RegionStats, ZeroNetworkGivesZeros) {
    RegressionTask t = small_task();
    t.c_reward = 100.0;
    MlpParams p = mlp_init(t.spec(), 0);
    p.layers.back().weight.setZero();
    p.layers.back().bias.setZero();
    const RegionStats s = region_stats(p, t, 21);
    EXPECT_EQ(s.id_max, 0.0);
    EXPECT_EQ(s.id_mean, 0.0);
    EXPECT_EQ(s.ood_out_max, 0.0);
    EXPECT_EQ(s.ood_out_mean, 0.0);
    EXPECT_EQ(s.id_count + s.ood_out_count, 21 * 21);
}

TEST(RegionStats, RadiusPartitionCountsMatchBruteForce) {
    RegressionTask t = small_task();
    t.grid_extent = 5.0;
    const int res = 31;
    long inside = 0;
    for (int i = 0; i < res; ++i)
        for (int j = 0; j < res; ++j) {
            const double x = -5.0 + 10.0 * j / (res - 1), y = -5.0 + 10.0 * i / (res - 1);
            inside += x * x + y * y <= 0.25;
        }
    const RegionStats s = region_stats(mlp_init(t.spec(), 0), t, res);
    EXPECT_EQ(s.id_count, inside);
    EXPECT_EQ(s.ood_out_count, res * res - inside);
}

TEST(RegionStats, ScaleNormalizedIdStatsAgreeAcrossRewardScales) {
    RegressionTask t = small_task();
    t.use_ln = true;
    RegressionTask big = t;
    big.c_reward = 100.0;
    big.lr = 3e-3;
    const RegionStats a = region_stats(fit_regressor(t, 2000, 5), t, 41);
    const RegionStats b = region_stats(fit_regressor(big, 2000, 5), big, 41);
    EXPECT_NEAR(b.id_mean / a.id_mean, 1.0, 0.1);
}

TEST(ActivationSweep, OneEntryPerActivationAndSingletonMatchesDirectFit) {
    const RegressionTask t = small_task();
    const auto sweep = activation_sweep(t, {Activation::ReLU, Activation::GELU, Activation::None}, 20, 6, 11);
    EXPECT_EQ(sweep.size(), 3u);
    const auto single = activation_sweep(t, {Activation::ReLU}, 20, 6, 11);
    const RegionStats direct = region_stats(fit_regressor(t, 20, 6), t, 11);
    EXPECT_EQ(single.at(Activation::ReLU).ood_out_mean, direct.ood_out_mean);
    EXPECT_EQ(single.at(Activation::ReLU).id_max, direct.id_max);
}

TEST(DidacticCsv, GridHasOneRowPerPoint) {
    const RegressionTask t = small_task();
    std::ostringstream os;
    write_prediction_grid_csv(os, mlp_init(t.spec(), 0), t, 5);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "x0,x1,prediction,region");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 25);
}
