#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "rot/measures.hpp"

namespace rot {
namespace {

TEST(Cost, IdenticalPointsCostNothing) {
    const auto dom = Domain::unit_box(2);
    const std::vector<double> x{0.3, 0.7};
    EXPECT_EQ(cost(x, x, CostKernel::for_domain(dom)), 0.0);
}

TEST(Cost, TorusWrapsAroundShortestWay) {
    const auto dom = Domain::torus(1);
    const std::vector<double> x{0.1}, y{0.9};
    EXPECT_NEAR(cost(x, y, CostKernel::for_domain(dom)), 0.02, 1e-15);
}

TEST(Cost, EuclideanThreeFourFive) {
    const auto dom = Domain::box({-5, -5}, {5, 5});
    const std::vector<double> x{0, 0}, y{3, 4};
    EXPECT_DOUBLE_EQ(cost(x, y, CostKernel::for_domain(dom)), 12.5);
}

TEST(Cost, DimensionMismatchThrows) {
    const auto dom = Domain::unit_box(2);
    const std::vector<double> x{0.1, 0.2}, y{0.1};
    EXPECT_THROW(cost(x, y, CostKernel::for_domain(dom)), InvalidArgument);
}

TEST(CostKernel, TorusKernelNeedsTorus) {
    EXPECT_THROW(CostKernel(CostKind::torus_squared_geodesic, Domain::unit_box(1)), InvalidArgument);
    EXPECT_NO_THROW(CostKernel(CostKind::squared_euclidean, Domain::torus(1)));
}

TEST(Domain, RejectsBadBounds) {
    EXPECT_THROW(Domain::box({0.0}, {0.0}), InvalidArgument);
    EXPECT_THROW(Domain::box({0.0, 1.0}, {1.0}), InvalidArgument);
    EXPECT_THROW(Domain::torus(0), InvalidArgument);
}

TEST(UniformGrid, TorusOneDimensional) {
    const auto m = uniform_grid_measure(Domain::torus(1), 4);
    ASSERT_EQ(m.size(), 4u);
    const double expected[] = {0.0, 0.25, 0.5, 0.75};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_DOUBLE_EQ(m.point(i)[0], expected[i]);
        EXPECT_DOUBLE_EQ(m.weight(i), 0.25);
    }
    EXPECT_DOUBLE_EQ(*m.cell_volume(), 0.25);
    EXPECT_DOUBLE_EQ(m.spacing(), 0.25);
}

TEST(UniformGrid, TorusTwoDimensional) {
    const auto m = uniform_grid_measure(Domain::torus(2), 3);
    ASSERT_EQ(m.size(), 9u);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(m.weight(i), 1.0 / 9.0);
    // last axis fastest
    EXPECT_DOUBLE_EQ(m.point(1)[0], 0.0);
    EXPECT_NEAR(m.point(1)[1], 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(m.point(3)[0], 1.0 / 3.0, 1e-15);
}

TEST(UniformGrid, BoxIsCellCentred) {
    const auto m = uniform_grid_measure(Domain::unit_box(1), 2);
    ASSERT_EQ(m.size(), 2u);
    EXPECT_DOUBLE_EQ(m.point(0)[0], 0.25);
    EXPECT_DOUBLE_EQ(m.point(1)[0], 0.75);
    EXPECT_DOUBLE_EQ(m.weight(0), 0.5);
}

TEST(UniformGrid, ResolutionBelowTwoRejected) {
    EXPECT_THROW(uniform_grid_measure(Domain::torus(1), 1), InvalidArgument);
}

TEST(DiscreteMeasure, ValidatesWeightsAndSupport) {
    const auto dom = Domain::torus(1);
    EXPECT_THROW(DiscreteMeasure(dom, {0.1, 0.2}, {0.5, 0.4}), InvalidArgument);   // sum != 1
    EXPECT_THROW(DiscreteMeasure(dom, {0.1, 0.2}, {1.0, 0.0}), InvalidArgument);   // zero weight
    EXPECT_THROW(DiscreteMeasure(dom, {0.1, 1.0}, {0.5, 0.5}), InvalidArgument);   // 1.0 not in [0,1)
    EXPECT_NO_THROW(DiscreteMeasure(dom, {0.1, 0.2}, {0.5, 0.5}));
}

TEST(DensityGrid, WeightsFollowDensity) {
    const std::vector<int> res{8};
    const auto m = density_grid_measure(Domain::torus(1), res, [](std::span<const double> x) { return 1.0 + x[0]; });
    EXPECT_NEAR(m.weight(4) / m.weight(0), 1.5, 1e-14);
}

TEST(EntropyHp, KnownValues) {
    for (double p : {1.1, 1.5, 2.0}) EXPECT_DOUBLE_EQ(h_p(1.0, p), 0.0);
    EXPECT_DOUBLE_EQ(h_p(3.0, 2.0), 8.0);
    EXPECT_NEAR(h_p(4.0, 1.5), 14.0, 1e-13);
    EXPECT_DOUBLE_EQ(h_p(0.0, 2.0), -1.0);
}

TEST(EntropyHp, RejectsOutOfRangeP) {
    EXPECT_THROW(h_p(1.0, 1.0), InvalidArgument);
    EXPECT_THROW(h_p(1.0, 2.5), InvalidArgument);
}

// ---- properties over random samples ----

TEST(CostProperties, SymmetryAndShiftInvarianceOnTorus) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int d = 1; d <= 3; ++d) {
        const auto kernel = CostKernel::for_domain(Domain::torus(d));
        for (int trial = 0; trial < 500; ++trial) {
            std::vector<double> x(d), y(d), xs(d), ys(d);
            for (int a = 0; a < d; ++a) {
                x[a] = u(rng);
                y[a] = u(rng);
                const double s = u(rng);
                xs[a] = x[a] + s;
                ys[a] = y[a] + s;
            }
            reduce_to_domain(xs, kernel.domain);
            reduce_to_domain(ys, kernel.domain);
            const double c = cost(x, y, kernel);
            EXPECT_EQ(c, cost(y, x, kernel));
            EXPECT_NEAR(cost(xs, ys, kernel), c, 1e-12);
            EXPECT_LE(c, 0.5 * d / 4.0 + 1e-15);
        }
    }
}

TEST(EntropyProperties, ConvexOnNonnegativeAxis) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uz(0.0, 10.0), ut(0.0, 1.0), up(1.0001, 2.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const double p = trial % 4 == 0 ? 2.0 : up(rng);
        const double z1 = uz(rng), z2 = uz(rng), t = ut(rng);
        const double lhs = h_p(t * z1 + (1 - t) * z2, p);
        const double rhs = t * h_p(z1, p) + (1 - t) * h_p(z2, p);
        EXPECT_LE(lhs, rhs + 1e-12);
    }
}

}  // namespace
}  // namespace rot
