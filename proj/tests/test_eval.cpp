#include <random>

#include <gtest/gtest.h>

#include "labrr/eval.hpp"
#include "oracles.hpp"

namespace labrr {
namespace {

TEST(RSquared, Examples) {
    const RealVector y{{0.0, 1.0, 2.0}};
    EXPECT_EQ(r_squared(y, y), 1.0);
    EXPECT_EQ(r_squared(y, RealVector::Constant(3, 1.0)), 0.0);
    EXPECT_DOUBLE_EQ(r_squared(y, RealVector{{0.0, 1.0, 1.0}}), 0.5);
}

TEST(RSquared, Errors) {
    EXPECT_THROW(r_squared(RealVector::Constant(4, 2.0), RealVector::Zero(4)), DegenerateLabels);
    EXPECT_THROW(r_squared(RealVector::Ones(1), RealVector::Ones(1)), InvalidArgument);
    EXPECT_THROW(r_squared(RealVector::Ones(3), RealVector::Ones(2)), DimensionMismatch);
}

TEST(RSquared, InvariantUnderSharedAffineMap) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const RealVector y = testing::uniform_vector(rng, 30, -1.0, 1.0);
        const RealVector p = y + 0.3 * testing::uniform_vector(rng, 30, -1.0, 1.0);
        const double a = 0.1 + trial;
        const double b = -5.0 + trial;
        const RealVector ya = (a * y.array() + b).matrix();
        const RealVector pa = (a * p.array() + b).matrix();
        EXPECT_NEAR(r_squared(ya, pa), r_squared(y, p), 1e-12);
    }
}

TEST(RSquared, ConsistentWithMse) {
    const RealVector y{{0.5, -0.2, 0.9, 0.1}};
    const RealVector p{{0.4, -0.1, 0.7, 0.3}};
    const double ss_tot = (y.array() - y.mean()).square().sum();
    EXPECT_NEAR(r_squared(y, p), 1.0 - mse(y, p) * 4 / ss_tot, 1e-15);
}

TEST(Project, Examples) {
    EXPECT_EQ(project(0.5, 1.0), 0.5);
    EXPECT_EQ(project(1.5, 1.0), 1.0);
    EXPECT_EQ(project(-3.0, 2.0), -2.0);
    EXPECT_THROW(project(0.0, 0.0), InvalidArgument);
}

TEST(Project, IdempotentAndMonotone) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int i = 0; i < 200; ++i) {
        const double a = u(rng);
        const double b = u(rng);
        const double m = 0.5 + std::abs(u(rng));
        EXPECT_EQ(project(project(a, m), m), project(a, m));
        if (a <= b) { EXPECT_LE(project(a, m), project(b, m)); }
    }
}

LabModel small_model() {
    return fit_lab(RealMatrix{{0.0}, {0.5}, {1.0}}, RealVector{{1.0, -1.0, 2.0}}, BandwidthSet::constant(3, 1, 2.0),
                   0.0);
}

TEST(SparsityR0, CountsNonzeroCoefficients) {
    LabModel m = small_model();
    EXPECT_EQ(sparsity_r0(m), 3);
    m.alpha(1) = 0.0;
    EXPECT_EQ(sparsity_r0(m), 2);
    m.alpha(0) = 1e-13;
    EXPECT_EQ(sparsity_r0(m), 1);
    m.alpha.setZero();
    EXPECT_EQ(sparsity_r0(m), 0);
    EXPECT_LE(sparsity_r0(m), m.n_support());
}

TEST(Evaluate, ReportFieldsAndClipping) {
    const LabModel m = small_model();
    const RealMatrix tx{{0.0}, {0.5}, {1.0}, {0.25}};
    const RealVector ty{{1.0, -1.0, 2.0, 0.0}};
    const EvalReport r = evaluate(m, tx, ty);
    EXPECT_EQ(r.n_test, 4);
    EXPECT_EQ(r.n_support, 3);
    EXPECT_EQ(r.r0, 3);
    const double ss_tot = (ty.array() - ty.mean()).square().sum();
    EXPECT_NEAR(r.r_squared, 1.0 - r.mse * 4 / ss_tot, 1e-14);

    const EvalReport clipped = evaluate(m, tx, ty, 1.0);
    const RealVector p = project(predict(m, tx), 1.0);
    EXPECT_NEAR(clipped.mse, mse(ty, p), 1e-15);
    EXPECT_GT(clipped.mse, r.mse);
}

}  // namespace
}  // namespace labrr
