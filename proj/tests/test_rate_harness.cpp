#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "rot/rate_harness.hpp"

namespace rot {
namespace {

TEST(FitLogLog, RecoversExactPowerLaws) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> slope(-1.0, 2.0), logc(-5.0, 5.0), lo(-6.0, -3.0), span(0.5, 3.0);
    std::uniform_int_distribution<int> count(3, 20);
    for (int trial = 0; trial < 1000; ++trial) {
        const double s = slope(rng), c = std::exp(logc(rng));
        const double a = lo(rng);
        const auto eps = log_spaced(std::pow(10.0, a + span(rng)), std::pow(10.0, a), count(rng));
        std::vector<double> vals;
        for (double e : eps) vals.push_back(c * std::pow(e, s));
        const auto fit = fit_loglog(eps, vals, s, 1e-9);
        ASSERT_NEAR(fit.slope, s, 1e-9) << "trial " << trial;
        ASSERT_NEAR(std::exp(fit.intercept), c, 1e-7 * c);
        ASSERT_NEAR(fit.r_squared, 1.0, 1e-9);
        ASSERT_TRUE(fit.pass);
    }
}

TEST(FitLogLog, NeedsThreePairs) {
    EXPECT_THROW(fit_loglog({1e-2, 1e-3}, {1.0, 2.0}, 0.0, 1.0), InvalidArgument);
    EXPECT_THROW(fit_loglog({1e-2, 1e-3, 1e-4}, {1.0, 2.0}, 0.0, 1.0), InvalidArgument);
}

TEST(FitLogLog, NonPositiveValueNamesEpsilon) {
    try {
        fit_loglog({1e-2, 1e-3, 1e-4}, {1.0, 0.0, 2.0}, 0.0, 1.0);
        FAIL() << "expected InvalidArgument";
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("epsilon = 0.001"), std::string::npos) << e.what();
    }
}

TEST(FitLogLog, SidednessAndThreshold) {
    const std::vector<double> eps{1e-2, 1e-3, 1e-4};
    std::vector<double> vals;
    for (double e : eps) vals.push_back(e);  // slope 1
    EXPECT_TRUE(fit_loglog(eps, vals, 2.0 / 3.0, 0.1, Sidedness::at_least).pass);
    EXPECT_FALSE(fit_loglog(eps, vals, 2.0 / 3.0, 0.1, Sidedness::two_sided).pass);
    EXPECT_TRUE(slope_passes(0.30, 1.0 / 3.0, 0.05, Sidedness::two_sided));
    EXPECT_FALSE(slope_passes(0.28, 1.0 / 3.0, 0.05, Sidedness::two_sided));
    EXPECT_FALSE(slope_passes(0.5, 2.0 / 3.0, 0.1, Sidedness::at_least));
}

TEST(LogSpaced, EndpointsAndRatio) {
    const auto e = log_spaced(1e-2, 1e-4, 7);
    ASSERT_EQ(e.size(), 7u);
    EXPECT_EQ(e.front(), 1e-2);
    EXPECT_EQ(e.back(), 1e-4);
    for (std::size_t k = 1; k < e.size(); ++k) EXPECT_NEAR(e[k] / e[k - 1], std::pow(10.0, -1.0 / 3.0), 1e-12);
}

TEST(Median, OddAndEven) {
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
    EXPECT_TRUE(std::isnan(median({})));
}

TEST(Monotonicity, RelativeSlack) {
    EXPECT_TRUE(nonincreasing_in_decreasing_epsilon({3.0, 2.0, 2.01}, 0.01));
    EXPECT_FALSE(nonincreasing_in_decreasing_epsilon({3.0, 2.0, 2.1}, 0.01));
}

TEST(SweepConfig, Validation) {
    SweepConfig cfg;
    cfg.epsilon_list = {1e-2, 1e-3};
    EXPECT_THROW(cfg.validate(), InvalidArgument);
    cfg.epsilon_list = {1e-2, 1e-2, 1e-3};
    EXPECT_THROW(cfg.validate(), InvalidArgument);
    cfg.epsilon_list = {1e-2, 1e-3, 1e-4};
    EXPECT_NO_THROW(cfg.validate());
    cfg.p = 2.5;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
    cfg.p = 2.0;
    cfg.instance = InstanceKind::custom;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(ResolutionRule, RequiredResolution) {
    SweepConfig cfg;
    cfg.d = 1;
    cfg.p = 2.0;
    // h <= eps^{1/3} / 8
    EXPECT_EQ(required_resolution(cfg, 1e-3), 80);
    EXPECT_EQ(required_resolution(cfg, 1e-6), 800);
    cfg.min_resolution = 100;
    EXPECT_EQ(required_resolution(cfg, 1e-3), 100);
    cfg.radius_scale = 0.5;
    cfg.min_resolution = 16;
    EXPECT_EQ(required_resolution(cfg, 1e-3), 160);
}

TEST(ResolutionRule, CoarseOverrideIsRefused) {
    SweepConfig cfg;
    cfg.resolution_override = 32;
    EXPECT_THROW(make_instance(cfg, 1e-3), InvalidArgument);
    cfg.resolution_override = 128;
    EXPECT_EQ(make_instance(cfg, 1e-3).resolution, 128);
}

TEST(ResolutionRule, PointBudget) {
    SweepConfig cfg;
    cfg.d = 2;
    cfg.max_points = 1000;
    EXPECT_THROW(make_instance(cfg, 1e-4), InvalidArgument);
}

TEST(TransferPotential, ReproducesAffineFunctionsOnBox) {
    const auto dom = Domain::unit_box(2);
    const auto coarse = uniform_grid_measure(dom, 8), fine = uniform_grid_measure(dom, 13);
    std::vector<double> v;
    for (std::size_t i = 0; i < coarse.size(); ++i) v.push_back(1.0 + 2.0 * coarse.point(i)[0] - coarse.point(i)[1]);
    const auto out = transfer_potential(coarse, v, fine);
    for (std::size_t i = 0; i < fine.size(); ++i) {
        const auto x = fine.point(i);
        const bool inside = x[0] >= 1.0 / 16 && x[0] <= 15.0 / 16 && x[1] >= 1.0 / 16 && x[1] <= 15.0 / 16;
        if (inside) {
            EXPECT_NEAR(out[i], 1.0 + 2.0 * x[0] - x[1], 1e-13);
        }
    }
}

TEST(TransferPotential, PeriodicWrap) {
    const auto dom = Domain::torus(1);
    const auto coarse = uniform_grid_measure(dom, 4), fine = uniform_grid_measure(dom, 8);
    const std::vector<double> v{0.0, 1.0, 2.0, 3.0};
    const auto out = transfer_potential(coarse, v, fine);
    EXPECT_NEAR(out[7], 1.5, 1e-15);  // x = 7/8, halfway between x = 3/4 and x = 0
    EXPECT_NEAR(out[1], 0.5, 1e-15);
}

TEST(Sweep, TorusSelfSparsityAndFriends) {
    SweepConfig cfg;
    cfg.d = 1;
    cfg.p = 2.0;
    cfg.epsilon_list = log_spaced(1e-2, 1e-3, 4);
    const auto data = run_sweep(cfg, Quantities::all());
    ASSERT_EQ(data.points.size(), 4u);
    const auto sp = fit_sparsity(data);
    EXPECT_TRUE(sp.pass) << sp.slope;
    EXPECT_NEAR(sp.slope, 1.0 / 3.0, 0.05);
    EXPECT_TRUE(fit_max_xi(data).pass);
    EXPECT_TRUE(fit_volume(data).pass);
    const auto mr = fit_map_rate(data);
    EXPECT_TRUE(mr.degenerate);
    EXPECT_TRUE(mr.pass);
    const auto gap = fit_gap(data);
    EXPECT_TRUE(gap.pass) << gap.slope;
    EXPECT_TRUE(check_strong_convexity(data).pass);
    const auto sw = check_ratio_sandwich(data);
    EXPECT_TRUE(sw.pass);
    EXPECT_EQ(sw.epsilon0_proxy, 1e-2);
    for (const auto& pt : data.points) {
        EXPECT_LE(pt.residual, 1e-10);
        ASSERT_TRUE(pt.oracle);
        EXPECT_NEAR(pt.max_xi / (2.0 * pt.oracle->c_eps), 1.0, 0.05);
    }
}

TEST(Sweep, PerturbedTorusMapRate) {
    SweepConfig cfg;
    cfg.d = 1;
    cfg.p = 2.0;
    cfg.instance = InstanceKind::torus_perturbed;
    cfg.perturbation = 0.5;
    cfg.epsilon_list = log_spaced(1e-2, 1e-3, 4);
    const auto fit = sweep_map_rate(cfg);
    EXPECT_FALSE(fit.degenerate);
    EXPECT_TRUE(fit.pass) << fit.slope;
    for (double v : fit.values) EXPECT_GT(v, 0.0);
}

TEST(Sweep, CustomInstanceWithoutReferenceIsFlagged) {
    const auto dom = Domain::torus(1);
    const auto meas = uniform_grid_measure(dom, 128);
    SweepConfig cfg;
    cfg.instance = InstanceKind::custom;
    cfg.custom = CustomInstance{meas, meas, CostKernel::for_domain(dom), std::nullopt, std::nullopt};
    cfg.epsilon_list = {1e-2, 5e-3, 2.5e-3};
    Quantities q;
    q.map_rate = true;
    const auto data = run_sweep(cfg, q);
    EXPECT_TRUE(data.reference_extrapolated);
    ASSERT_FALSE(data.warnings.empty());
    q = {};
    q.gap = true;
    EXPECT_THROW(run_sweep(cfg, q), InvalidArgument);
}

TEST(Sweep, CustomInstanceMustBeResolved) {
    const auto dom = Domain::torus(1);
    const auto meas = uniform_grid_measure(dom, 16);
    SweepConfig cfg;
    cfg.instance = InstanceKind::custom;
    cfg.custom = CustomInstance{meas, meas, CostKernel::for_domain(dom), identity_map(), 0.0};
    cfg.epsilon_list = {1e-2, 1e-3, 1e-4};
    EXPECT_THROW(sweep_sparsity(cfg), InvalidArgument);
}

}  // namespace
}  // namespace rot
