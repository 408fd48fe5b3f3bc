#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "rot/dual_solver.hpp"
#include "rot/plan.hpp"
#include "rot/torus_oracle.hpp"

namespace rot {
namespace {

/// lambda = mu = uniform on {0, 1/2} in T^1.
RotProblem two_point_problem(double eps, double p = 2.0) {
    const auto dom = Domain::torus(1);
    DiscreteMeasure m(dom, {0.0, 0.5}, {0.5, 0.5});
    return {m, m, CostKernel::for_domain(dom), SolverParams(eps, p)};
}

RotProblem single_atom_problem(double eps, double p) {
    const auto dom = Domain::torus(1);
    DiscreteMeasure m(dom, {0.3}, {1.0});
    return {m, m, CostKernel::for_domain(dom), SolverParams(eps, p)};
}

RotProblem torus_grid_problem(int d, int m, double eps, double p) {
    const auto dom = Domain::torus(d);
    auto meas = uniform_grid_measure(dom, m);
    return {meas, meas, CostKernel::for_domain(dom), SolverParams(eps, p)};
}

TEST(SolverParams, DerivedQuantities) {
    for (double p : {1.2, 1.5, 1.8, 2.0}) {
        for (double eps : {1e-4, 1e-2, 0.5}) {
            const SolverParams prm(eps, p);
            EXPECT_NEAR(prm.q(), p / (p - 1.0), 1e-14);
            EXPECT_GE(prm.q(), 2.0);
            const double kappa = std::pow(eps, prm.q() - 1) * std::pow(prm.q(), prm.q() - 1);
            EXPECT_NEAR(prm.kappa() / kappa, 1.0, 1e-14);
        }
    }
    EXPECT_THROW(SolverParams(0.0, 2.0), InvalidArgument);
    EXPECT_THROW(SolverParams(1e-3, 1.0), InvalidArgument);
    EXPECT_THROW(SolverParams(1e-3, 3.0), InvalidArgument);
}

TEST(PositivePower, ZeroExponentConvention) {
    EXPECT_EQ(positive_power(0.0, 0.0), 1.0);
    EXPECT_EQ(positive_power(-1e-300, 0.0), 0.0);
    EXPECT_EQ(positive_power(2.0, 0.0), 1.0);
    EXPECT_EQ(positive_power(-2.0, 1.5), 0.0);
    EXPECT_DOUBLE_EQ(positive_power(4.0, 1.5), 8.0);
}

TEST(UpdateRow, SingleAtomQuadratic) {
    const double eps = 0.01;
    const SolverParams prm(eps, 2.0);
    const DiscreteMeasure mu(Domain::torus(1), {0.2}, {1.0});
    const std::vector<double> g{0.0}, c{0.0};
    EXPECT_NEAR(update_f_row(g, mu, c, prm), 2.0 * eps, 1e-16);
    EXPECT_NEAR(prm.kappa(), 2.0 * eps, 1e-17);
}

TEST(UpdateRow, SingleAtomCubic) {
    const SolverParams prm(0.01, 1.5);  // q = 3
    const DiscreteMeasure mu(Domain::torus(1), {0.2}, {1.0});
    const std::vector<double> g{0.0}, c{0.0};
    EXPECT_NEAR(update_f_row(g, mu, c, prm), std::sqrt(prm.kappa()), 1e-15);
}

TEST(UpdateRow, TwoPointRowDiagonalOnly) {
    // true T^1 costs from x = 0 to {0, 1/2}: 0 and 0.125
    const double eps = 0.01;
    const SolverParams prm(eps, 2.0);
    const DiscreteMeasure mu(Domain::torus(1), {0.0, 0.5}, {0.5, 0.5});
    const std::vector<double> g{2 * eps, 2 * eps}, c{0.0, 0.125};
    EXPECT_NEAR(update_f_row(g, mu, c, prm), 2 * eps, 1e-15);
}

TEST(UpdateRow, LiteralRowWithSmallerEpsilon) {
    // with costs (0, 0.03125) the off-diagonal term stays inactive only for eps < 1/128
    const double eps = 0.005;
    const SolverParams prm(eps, 2.0);
    const DiscreteMeasure mu(Domain::torus(1), {0.0, 0.5}, {0.5, 0.5});
    const std::vector<double> g{2 * eps, 2 * eps}, c{0.0, 0.03125};
    EXPECT_NEAR(update_f_row(g, mu, c, prm), 2 * eps, 1e-15);
}

TEST(UpdateRow, RejectsEmptyInput) {
    const SolverParams prm(0.01, 2.0);
    EXPECT_THROW(solve_row({}, {}, {}, prm), InvalidArgument);
}

TEST(UpdateRow, MonotoneScalarSolveProperty) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        const double p = trial % 3 == 0 ? 2.0 : 1.1 + 0.9 * u(rng);
        const double eps = std::pow(10.0, -4.0 + 3.0 * u(rng));
        const SolverParams prm(eps, p);
        const std::size_t n = 1 + trial % 40;
        std::vector<double> g(n), c(n), w(n);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            g[j] = 0.1 * (u(rng) - 0.5);
            c[j] = 0.5 * u(rng);
            w[j] = 0.1 + u(rng);
            total += w[j];
        }
        for (double& v : w) v /= total;
        const double t = solve_row(g, c, w, prm).value;
        const auto phi = [&](double s) { return detail::row_value(s, g, c, w, prm.q()); };
        EXPECT_NEAR(phi(t), prm.kappa(), 1e-12 * prm.kappa()) << "trial " << trial;
        EXPECT_LE(phi(t - 1e-6), phi(t));
        EXPECT_LE(phi(t), phi(t + 1e-6));
    }
}

TEST(Residual, ZeroPotentialsGiveMinusKappa) {
    const auto pb = two_point_problem(0.01);
    // shift the points off the diagonal so that every cost is positive
    const auto dom = Domain::torus(1);
    DiscreteMeasure l(dom, {0.0, 0.5}, {0.5, 0.5}), m(dom, {0.25, 0.75}, {0.5, 0.5});
    const RotProblem shifted(l, m, CostKernel::for_domain(dom), pb.params);
    DualPotentials zero{{0.0, 0.0}, {0.0, 0.0}};
    const auto [rf, rg] = schrodinger_residual(zero, shifted);
    for (double r : rf) EXPECT_EQ(r, -shifted.params.kappa());
    for (double r : rg) EXPECT_EQ(r, -shifted.params.kappa());
    EXPECT_EQ(dual_objective(zero, shifted), 0.0);
}

TEST(SolveDual, TwoPointFixture) {
    const double eps = 0.01;
    const auto pb = two_point_problem(eps);
    auto sol = solve_dual(pb);
    EXPECT_TRUE(sol.report.converged);
    EXPECT_NEAR(integrate(sol.duals.f, pb.lambda), 0.0, 1e-15);
    apply_gauge(sol.duals, pb.lambda, pb.mu, Gauge::symmetric);
    for (double v : sol.duals.f) EXPECT_NEAR(v, 2 * eps, 1e-12);
    for (double v : sol.duals.g) EXPECT_NEAR(v, 2 * eps, 1e-12);
    const auto [rf, rg] = schrodinger_residual(sol.duals, pb);
    EXPECT_LE(sup_norm(rf), 1e-14 * pb.params.kappa());
    EXPECT_LE(sup_norm(rg), 1e-14 * pb.params.kappa());
    EXPECT_NEAR(dual_objective(sol.duals, pb), 2 * eps, 1e-15);
    // primal = eps * sum h_2(rho) / 4 = eps * (3 + 3 - 1 - 1) / 4
    EXPECT_NEAR(sol.report.primal, eps, 1e-15);
    EXPECT_NEAR(sol.report.gap, 0.0, 1e-15);
}

TEST(SolveDual, SingleAtom) {
    for (double p : {1.5, 2.0}) {
        const double eps = 0.02;
        const auto pb = single_atom_problem(eps, p);
        const double total = std::pow(pb.params.kappa(), 1.0 / (pb.params.q() - 1.0));
        SolveOptions opts;
        opts.gauge = Gauge::none;
        auto sol = solve_dual(pb, opts);
        EXPECT_NEAR(sol.duals.f[0] + sol.duals.g[0], total, 1e-15);
        apply_gauge(sol.duals, pb.lambda, pb.mu, Gauge::mean_zero_f);
        EXPECT_EQ(sol.duals.f[0], 0.0);
        EXPECT_NEAR(sol.duals.g[0], total, 1e-15);
        if (p == 2.0) {
            EXPECT_NEAR(dual_objective(sol.duals, pb), eps, 1e-15);
        }
        EXPECT_NEAR(sol.report.primal, 0.0, 1e-15);  // rho = 1, zero cost
        EXPECT_NEAR(sol.report.gap, 0.0, 1e-14);
    }
}

TEST(SolveDual, TorusGridMatchesOracleConstant) {
    const double eps = 1e-3;
    const auto pb = torus_grid_problem(1, 512, eps, 2.0);
    SolveOptions opts;
    opts.gauge = Gauge::symmetric;
    const auto sol = solve_dual(pb, opts);
    const double c = c_eps_closed_form(1, 2.0, eps);
    for (double v : sol.duals.f) EXPECT_NEAR(v, c, 1e-4);
    EXPECT_LE(sol.report.final_residual_rel, 1e-10);
}

TEST(SolveDual, NonConvergenceCarriesTrace) {
    // perturbed marginals need more than one sweep
    const auto dom = Domain::torus(1);
    const std::vector<int> res{64};
    auto lam = density_grid_measure(dom, res, [](std::span<const double> x) { return 1.0 + 0.5 * std::cos(6.28318 * x[0]); });
    auto mu = uniform_grid_measure(dom, res);
    SolverParams prm(1e-2, 2.0);
    prm.max_outer_iters = 1;
    const RotProblem pb(lam, mu, CostKernel::for_domain(dom), prm);
    try {
        solve_dual(pb);
        FAIL() << "expected NonConvergence";
    } catch (const NonConvergence& e) {
        EXPECT_EQ(e.residual_trace().size(), 1u);
        EXPECT_GT(e.residual_trace()[0], 1e-10);
    }
}

TEST(SolveDual, GaugeInvarianceOfInit) {
    const auto dom = Domain::torus(1);
    const std::vector<int> res{48};
    auto lam = density_grid_measure(dom, res, [](std::span<const double> x) { return 1.0 + 0.3 * std::sin(6.28318 * x[0]); });
    auto mu = uniform_grid_measure(dom, res);
    const RotProblem pb(lam, mu, CostKernel::for_domain(dom), SolverParams(2e-2, 2.0));
    const auto base = solve_dual(pb);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        const double a = u(rng);
        SolveOptions opts;
        opts.init = DualPotentials{std::vector<double>(lam.size(), a), std::vector<double>(mu.size(), -a)};
        const auto shifted = solve_dual(pb, opts);
        for (std::size_t i = 0; i < lam.size(); ++i) EXPECT_NEAR(shifted.duals.f[i], base.duals.f[i], 1e-10);
        for (std::size_t j = 0; j < mu.size(); ++j) EXPECT_NEAR(shifted.duals.g[j], base.duals.g[j], 1e-10);
    }
}

TEST(GaugeProperties, ConstantShiftLeavesEverythingInvariant) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> size(2, 6);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto dom = Domain::torus(1);
        auto random_measure = [&](int n) {
            std::vector<double> coords, w;
            for (int k = 0; k < n; ++k) {
                coords.push_back((k + 0.8 * u(rng)) / n);
                w.push_back(1.0 / n);
            }
            return DiscreteMeasure(dom, coords, w);
        };
        const auto lam = random_measure(size(rng));
        const auto mu = random_measure(size(rng));
        const double p = trial % 2 == 0 ? 2.0 : 1.2 + 0.8 * u(rng);
        // eps large enough for a connected support graph on these small clouds
        const RotProblem pb(lam, mu, CostKernel::for_domain(dom), SolverParams(0.1 + 0.4 * u(rng), p));
        const auto base = solve_dual(pb);
        const double a = 2.0 * u(rng) - 1.0;
        SolveOptions opts;
        opts.init = base.duals;
        for (double& v : opts.init->f) v += a;
        for (double& v : opts.init->g) v -= a;
        // the shifted pair already solves the system; gauge fixing returns the same representative
        const auto shifted = solve_dual(pb, opts);
        for (std::size_t i = 0; i < lam.size(); ++i) ASSERT_NEAR(shifted.duals.f[i], base.duals.f[i], 1e-9);
        for (std::size_t j = 0; j < mu.size(); ++j) ASSERT_NEAR(shifted.duals.g[j], base.duals.g[j], 1e-9);
        const auto [rf, rg] = schrodinger_residual(*opts.init, pb);
        ASSERT_LE(std::max(sup_norm(rf), sup_norm(rg)), 1e-9 * pb.params.kappa());
        ASSERT_NEAR(dual_objective(*opts.init, pb), base.report.dual, 1e-12);
        const auto rho0 = density(base.duals, pb), rho1 = density(*opts.init, pb);
        for (std::size_t k = 0; k < rho0.rho.size(); ++k) ASSERT_NEAR(rho1.rho[k], rho0.rho[k], 1e-9 * (1 + rho0.rho[k]));
    }
}

TEST(SolveDual, GeneralInstanceConvergesWithSmallGap) {
    const auto dom = Domain::unit_box(1);
    const std::vector<int> res{40};
    auto lam = density_grid_measure(dom, res, [](std::span<const double> x) { return 1.0 + x[0]; });
    auto mu = uniform_grid_measure(dom, res);
    for (double p : {1.5, 2.0}) {
        const RotProblem pb(lam, mu, CostKernel::for_domain(dom), SolverParams(5e-3, p));
        const auto sol = solve_dual(pb);
        EXPECT_LE(sol.report.final_residual_rel, 1e-10);
        EXPECT_GE(sol.report.gap, -1e-9);
        EXPECT_LE(sol.report.gap, 1e-6 * (1 + std::abs(sol.report.dual)));
        EXPECT_GT(sol.report.min_normalizer, 0.0);
    }
}

TEST(SolveDual, DeterministicAcrossThreadCounts) {
    const auto dom = Domain::unit_box(1);
    const std::vector<int> res{32};
    auto lam = density_grid_measure(dom, res, [](std::span<const double> x) { return 2.0 - x[0]; });
    auto mu = uniform_grid_measure(dom, res);
    SolverParams one(1e-2, 2.0), four(1e-2, 2.0);
    four.threads = 4;
    const auto a = solve_dual(RotProblem(lam, mu, CostKernel::for_domain(dom), one));
    const auto b = solve_dual(RotProblem(lam, mu, CostKernel::for_domain(dom), four));
    EXPECT_EQ(a.duals.f, b.duals.f);
    EXPECT_EQ(a.duals.g, b.duals.g);
}

TEST(SolveDual, OnTheFlyCostsMatchCachedCosts) {
    const auto dom = Domain::torus(2);
    auto meas = uniform_grid_measure(dom, 12);
    SolverParams cached(2e-2, 1.5), streamed(2e-2, 1.5);
    streamed.cost_cache_limit = 0;
    const auto a = solve_dual(RotProblem(meas, meas, CostKernel::for_domain(dom), cached));
    const auto b = solve_dual(RotProblem(meas, meas, CostKernel::for_domain(dom), streamed));
    EXPECT_EQ(a.duals.f, b.duals.f);
}

}  // namespace
}  // namespace rot
