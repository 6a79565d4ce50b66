#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "dcnet/numerics.hpp"

using namespace dcnet;

TEST(UnitNormalize, HandValues) {
    const Vec v = unit_normalize({3.0, 4.0});
    EXPECT_DOUBLE_EQ(v[0], 0.6);
    EXPECT_DOUBLE_EQ(v[1], 0.8);
}

TEST(UnitNormalize, ZeroVectorThrows) {
    EXPECT_THROW(unit_normalize({0.0, 0.0, 0.0}), degenerate_input_error);
}

TEST(Softmax, UniformAndTemperature) {
    const Vec u = softmax({0.0, 0.0}, 1.0);
    EXPECT_DOUBLE_EQ(u[0], 0.5);
    EXPECT_DOUBLE_EQ(u[1], 0.5);
    // p0 = e^2 / (1 + e^2) for logits (1,0) at temperature 0.5.
    const Vec p = softmax({1.0, 0.0}, 0.5);
    const double e2 = std::exp(2.0);
    EXPECT_NEAR(p[0], e2 / (1.0 + e2), 1e-15);
    EXPECT_NEAR(p[0] + p[1], 1.0, 1e-15);
}

TEST(Softmax, LargeLogitsStaySane) {
    const Vec p = softmax({1000.0, 999.0, -1000.0}, 1.0);
    EXPECT_TRUE(all_finite(p));
    EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-12);
    EXPECT_GT(p[0], p[1]);
}

TEST(Cholesky, HandFactorization) {
    Mat s(2, 2);
    s(0, 0) = 4.0;
    s(0, 1) = 2.0;
    s(1, 0) = 2.0;
    s(1, 1) = 3.0;
    CholeskyFactor chol(s);
    EXPECT_NEAR(chol.log_det(), std::log(8.0), 1e-14);
    // Sigma^{-1} = [[3,-2],[-2,4]]/8, so (1,1)' Sigma^{-1} (1,1) = 3/8.
    EXPECT_NEAR(chol.quad_form({1.0, 1.0}), 0.375, 1e-14);
}

TEST(Cholesky, RejectsBadMatrices) {
    Mat notpd(2, 2);
    notpd(0, 0) = 1.0;
    notpd(0, 1) = 2.0;
    notpd(1, 0) = 2.0;
    notpd(1, 1) = 1.0;
    EXPECT_THROW(CholeskyFactor{notpd}, invalid_covariance_error);
    Mat asym(2, 2);
    asym(0, 0) = 1.0;
    asym(0, 1) = 0.5;
    asym(1, 0) = 0.1;
    asym(1, 1) = 1.0;
    EXPECT_THROW(CholeskyFactor{asym}, invalid_covariance_error);
    Mat rect(2, 3);
    EXPECT_THROW(CholeskyFactor{rect}, invalid_covariance_error);
}

TEST(Mahalanobis, DiagonalHandValue) {
    Mat s(2, 2);
    s(0, 0) = 4.0;
    s(1, 1) = 1.0;
    CholeskyFactor chol(s);
    // (2,0) under diag(4,1): d^2 = 4/4 = 1.
    EXPECT_NEAR(mahalanobis_chol({2.0, 0.0}, {0.0, 0.0}, chol), 1.0, 1e-14);
}

TEST(Mahalanobis, CholeskyMatchesExplicitInverse) {
    RngStream rng(3, stream_id(0x7E57u, 0));
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t d = 2 + rng.uniform_index(5);
        Mat a(d, d);
        for (double& x : a.data) x = rng.normal();
        Mat s(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                double acc = 0.0;
                for (std::size_t l = 0; l < d; ++l) acc += a(l, i) * a(l, j);
                s(i, j) = acc + (i == j ? 0.5 : 0.0);
            }
        const Vec u = rng.normal_vec(d);
        const Vec v = rng.normal_vec(d);
        CholeskyFactor chol(s);
        const Mat inv = spd_inverse(s);
        EXPECT_NEAR(mahalanobis_chol(u, v, chol), mahalanobis(u, v, inv), 1e-9);
    }
}

TEST(SpdInverse, HandValue) {
    Mat s(2, 2);
    s(0, 0) = 4.0;
    s(0, 1) = 2.0;
    s(1, 0) = 2.0;
    s(1, 1) = 3.0;
    const Mat inv = spd_inverse(s);
    EXPECT_NEAR(inv(0, 0), 0.375, 1e-13);
    EXPECT_NEAR(inv(0, 1), -0.25, 1e-13);
    EXPECT_NEAR(inv(1, 0), -0.25, 1e-13);
    EXPECT_NEAR(inv(1, 1), 0.5, 1e-13);
}

TEST(Rng, DeterministicPerStream) {
    RngStream a(42, 7), b(42, 7), c(42, 8);
    bool any_diff = false;
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform();
        EXPECT_DOUBLE_EQ(x, b.uniform());
        if (x != c.uniform()) any_diff = true;
    }
    EXPECT_TRUE(any_diff);
}

TEST(Rng, UniformRangeAndIndexCoverage) {
    RngStream rng(1, 2);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
        seen.insert(rng.uniform_index(3));
    }
    EXPECT_EQ(seen.size(), 3u);
    EXPECT_THROW(rng.uniform_index(0), configuration_error);
}

TEST(Rng, NormalMoments) {
    RngStream rng(5, 11);
    double sum = 0.0, sumsq = 0.0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    EXPECT_NEAR(mean, 0.0, 0.02);
    EXPECT_NEAR(var, 1.0, 0.03);
}

TEST(Rng, ShuffleIsPermutation) {
    RngStream rng(9, 1);
    std::vector<std::size_t> v{0, 1, 2, 3, 4, 5, 6, 7};
    rng.shuffle(v);
    std::set<std::size_t> s(v.begin(), v.end());
    EXPECT_EQ(s.size(), 8u);
}

TEST(StreamId, OrderSensitive) {
    EXPECT_NE(stream_id(0xABCu, 1, 2), stream_id(0xABCu, 2, 1));
    EXPECT_NE(stream_id(0xABCu, 1, 2), stream_id(0xABDu, 1, 2));
    EXPECT_EQ(stream_id(0xABCu, 1, 2), stream_id(0xABCu, 1, 2));
}

TEST(GradCheck, QuadraticExact) {
    auto f = [](const Vec& x) {
        double s = 0.0;
        for (double v : x) s += v * v;
        return s;
    };
    const Vec x{0.3, -1.2, 2.0};
    Vec analytic(3);
    for (int i = 0; i < 3; ++i) analytic[i] = 2.0 * x[i];
    const auto rep = grad_check(f, x, analytic);
    EXPECT_LT(rep.max_relative_error, 1e-9);
}

TEST(GradCheck, DetectsWrongGradient) {
    auto f = [](const Vec& x) { return x[0] * x[0]; };
    const auto rep = grad_check(f, {1.0}, {2.02});  // 1% off
    EXPECT_GT(rep.max_relative_error, 1e-4);
}

TEST(Eigenvalues, HandValues) {
    Mat s(2, 2);
    s(0, 0) = 2.0;
    s(0, 1) = 1.0;
    s(1, 0) = 1.0;
    s(1, 1) = 2.0;
    const Vec eig = symmetric_eigenvalues(s);
    EXPECT_NEAR(eig[0], 1.0, 1e-12);
    EXPECT_NEAR(eig[1], 3.0, 1e-12);
    Mat d(3, 3);
    d(0, 0) = 3.0;
    d(1, 1) = 1.0;
    d(2, 2) = 2.0;
    const Vec ed = symmetric_eigenvalues(d);
    EXPECT_NEAR(ed[0], 1.0, 1e-12);
    EXPECT_NEAR(ed[1], 2.0, 1e-12);
    EXPECT_NEAR(ed[2], 3.0, 1e-12);
}

TEST(AllFinite, FlagsNanAndInf) {
    EXPECT_TRUE(all_finite({1.0, -2.0}));
    EXPECT_FALSE(all_finite({1.0, std::nan("")}));
    EXPECT_FALSE(all_finite({1.0, INFINITY}));
}
