#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mmorient/errors.hpp"
#include "mmorient/numerics.hpp"
#include "oracles.hpp"

using namespace mmorient;

TEST(Erf, OddAndZero) {
    EXPECT_EQ(mmorient::erf(0.0), 0.0);
    EXPECT_DOUBLE_EQ(mmorient::erf(-0.3), -mmorient::erf(0.3));
}

TEST(Erf, MatchesTaylorOracle) {
    EXPECT_NEAR(oracle::erf_taylor(1.0), 0.8427007929, 1e-10);
    EXPECT_NEAR(mmorient::erf(1.0), 0.8427007929, 1e-7);
    for (int i = -300; i <= 300; ++i) {
        const double x = i / 100.0;
        EXPECT_NEAR(mmorient::erf(x), oracle::erf_taylor(x), 1e-7) << "x=" << x;
        EXPECT_LE(std::abs(mmorient::erf(x)), 1.0);
    }
}

TEST(Gelu, Values) {
    EXPECT_EQ(gelu(0.0), 0.0);
    EXPECT_NEAR(gelu(10.0), 10.0, 1e-6);
    const double oracle_gelu1 = 0.5 * (1.0 + oracle::erf_taylor(1.0 / std::sqrt(2.0)));
    EXPECT_NEAR(oracle_gelu1, 0.8413447461, 1e-9);
    EXPECT_NEAR(gelu(1.0), 0.8413447461, 1e-6);
    EXPECT_NEAR(gelu(-40.0), 0.0, 1e-12);
}

TEST(Gelu, MonotoneOnGrid) {
    double prev = gelu(-8.0);
    // Exact GELU has its minimum at x ≈ -0.7517; it is non-decreasing from there on.
    for (int i = 1; i <= 10000; ++i) {
        const double x = -8.0 + 16.0 * i / 10000.0;
        const double y = gelu(x);
        if (x > -0.7517) {
            EXPECT_GE(y, prev - 1e-15) << "x=" << x;
        }
        EXPECT_GE(y, -0.17);
        prev = y;
    }
}

TEST(Gelu, DerivativeMatchesCentralDifference) {
    for (double x : {-3.0, -1.0, -0.2, 0.0, 0.5, 2.0, 4.0}) {
        const double h = 1e-6;
        EXPECT_NEAR(gelu_derivative(x), (gelu(x + h) - gelu(x - h)) / (2 * h), 1e-8);
    }
}

TEST(Softmax, Examples) {
    const auto u = softmax(std::vector<double>{2.5, 2.5, 2.5});
    for (double p : u) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
    EXPECT_EQ(softmax(std::vector<double>{-7.0})[0], 1.0);
    const auto p = softmax(std::vector<double>{0.0, std::log(2.0)});
    EXPECT_NEAR(p[0], 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(p[1], 2.0 / 3.0, 1e-12);
    EXPECT_THROW(softmax(std::vector<double>{}), std::invalid_argument);
}

TEST(Softmax, LargeLogitsStayFinite) {
    const auto p = softmax(std::vector<double>{1000.0, 999.0, -1000.0});
    EXPECT_TRUE(all_finite(p));
    EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-12);
}

TEST(Softmax, SumsToOneProperty) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> len(1, 256);
    std::normal_distribution<double> val(0.0, 10.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> v(static_cast<std::size_t>(len(rng)));
        for (auto& x : v) x = val(rng);
        double sum = 0.0;
        for (double p : softmax(v)) {
            EXPECT_GT(p, 0.0 - 1e-300);
            sum += p;
        }
        ASSERT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(L2Normalize, Rows) {
    const auto n = l2_normalize_rows(Matrix::from_rows({{3, 4}, {1, 0}, {0, 0}}));
    EXPECT_NEAR(n(0, 0), 0.6, 1e-15);
    EXPECT_NEAR(n(0, 1), 0.8, 1e-15);
    EXPECT_EQ(n(1, 0), 1.0);
    EXPECT_EQ(n(1, 1), 0.0);
    EXPECT_EQ(n(2, 0), 0.0);
    EXPECT_EQ(n(2, 1), 0.0);
}

TEST(CosineSimilarity, Examples) {
    const auto s = cosine_similarity_matrix(
        l2_normalize_rows(Matrix::from_rows({{1, 0}, {1, 1}, {0, 1}, {2, 0}})));
    EXPECT_NEAR(s(0, 1), 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(s(0, 2), 0.0, 1e-15);
    EXPECT_NEAR(s(0, 3), 1.0, 1e-15);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(s(i, i), 1.0, 1e-12);
}

TEST(CosineSimilarity, BitwiseSymmetricAndBounded) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = oracle::random_matrix(17, 9, rng);
        const auto s = cosine_similarity_matrix(l2_normalize_rows(x));
        for (std::size_t i = 0; i < s.rows(); ++i) {
            for (std::size_t j = 0; j < s.cols(); ++j) {
                ASSERT_EQ(std::bit_cast<std::uint64_t>(s(i, j)), std::bit_cast<std::uint64_t>(s(j, i)));
                ASSERT_LE(std::abs(s(i, j)), 1.0 + 1e-12);
            }
        }
    }
}

TEST(CosineSimilarity, ThreadCountDoesNotChangeBits) {
    std::mt19937_64 rng(8);
    const auto n = l2_normalize_rows(oracle::random_matrix(64, 16, rng));
    set_max_threads(1);
    const auto a = cosine_similarity_matrix(n);
    set_max_threads(4);
    const auto b = cosine_similarity_matrix(n);
    set_max_threads(1);
    EXPECT_TRUE(bitwise_equal(a, b));
}

TEST(FiniteDiff, ConstantAndLinear) {
    const std::vector<double> theta = {0.3, -1.2, 4.0};
    const auto zero = finite_diff_gradient([](std::span<const double>) { return 7.0; }, theta, 1e-5);
    for (double g : zero) EXPECT_EQ(g, 0.0);
    const std::vector<double> a = {2.0, -3.0, 0.5};
    const auto lin = finite_diff_gradient([&](std::span<const double> t) { return dot(a, t); },
                                          theta, 1e-5);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(lin[i], a[i], 1e-9);
}

TEST(FiniteDiff, Square) {
    const auto g = finite_diff_gradient([](std::span<const double> t) { return t[0] * t[0]; },
                                        std::vector<double>{3.0}, 1e-5);
    EXPECT_NEAR(g[0], 6.0, 1e-8);
}

TEST(FiniteDiff, RandomQuadratic) {
    std::mt19937_64 rng(3);
    const auto r = oracle::random_matrix(8, 8, rng);
    Matrix a(8, 8);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) a(i, j) = 0.5 * (r(i, j) + r(j, i));
    const auto theta = oracle::random_matrix(1, 8, rng);
    auto f = [&](std::span<const double> t) {
        double s = 0.0;
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 8; ++j) s += 0.5 * t[i] * a(i, j) * t[j];
        return s;
    };
    const auto g = finite_diff_gradient(f, theta.values(), 1e-5);
    for (std::size_t i = 0; i < 8; ++i) {
        double expected = 0.0;
        for (std::size_t j = 0; j < 8; ++j) expected += a(i, j) * theta(0, j);
        EXPECT_LE(relative_error(g[i], expected, 1e-12), 1e-6);
    }
}

TEST(FiniteDiff, NonFiniteLossIsAnError) {
    auto f = [](std::span<const double> t) { return t[0] > 0 ? INFINITY : 0.0; };
    EXPECT_THROW(finite_diff_gradient(f, std::vector<double>{0.0}, 1e-5), NumericError);
}
