#include <gtest/gtest.h>

#include <numeric>

#include "hattn/matrix.hpp"
#include "hattn/params.hpp"
#include "hattn/random.hpp"

using namespace hattn;

TEST(DeriveParams, SixteenTokensRankTwo) {
    const auto p = derive_params(16, 8, 2, Mode::banded);
    EXPECT_EQ(p.levels, 3u);
    EXPECT_EQ(p.blocks_per_level, (std::vector<std::size_t>{8, 4, 2}));
    EXPECT_TRUE(p.masked());
}

TEST(DeriveParams, MinimalHierarchy) {
    const auto p = derive_params(4, 1, 2, Mode::hodlr);
    EXPECT_EQ(p.levels, 1u);
    EXPECT_EQ(p.blocks_per_level, (std::vector<std::size_t>{2}));
    EXPECT_FALSE(p.masked());
}

TEST(DeriveParams, RejectsInvalidLengths) {
    EXPECT_THROW(derive_params(24, 8, 2, Mode::banded), InvalidLength);
    // L = N_r gives M = 0.
    EXPECT_THROW(derive_params(8, 8, 8, Mode::hodlr), InvalidLength);
    EXPECT_THROW(derive_params(20, 8, 3, Mode::hodlr), InvalidLength);
    EXPECT_THROW(derive_params(0, 8, 2, Mode::hodlr), InvalidArgument);
    EXPECT_THROW(derive_params(16, 0, 2, Mode::hodlr), InvalidArgument);
    EXPECT_THROW(derive_params(16, 8, 0, Mode::hodlr), InvalidArgument);
}

TEST(DeriveParams, OddRankNeedsOverlapInBandedMode) {
    EXPECT_THROW(derive_params(12, 4, 3, Mode::banded, false), InvalidRank);
    EXPECT_NO_THROW(derive_params(12, 4, 3, Mode::banded, true));
    EXPECT_NO_THROW(derive_params(12, 4, 3, Mode::hodlr, false));
}

TEST(DeriveParams, BlockCountsHalveAndSumBelowTwiceLevelZero) {
    for (std::size_t rank : {1, 2, 3, 4, 8, 16})
        for (std::size_t m = 1; m <= 10; ++m) {
            const std::size_t len = rank << m;
            const auto p = derive_params(len, 4, rank, Mode::hodlr);
            ASSERT_EQ(p.levels, m);
            ASSERT_EQ(p.blocks_per_level.front(), len / rank);
            ASSERT_EQ(p.blocks_per_level.back(), 2u);
            for (std::size_t l = 1; l < p.levels; ++l)
                ASSERT_EQ(p.blocks_per_level[l] * 2, p.blocks_per_level[l - 1]);
            const auto total = std::accumulate(p.blocks_per_level.begin(), p.blocks_per_level.end(), std::size_t{0});
            ASSERT_EQ(total, 2 * p.blocks_per_level[0] - 2);
            // Pure: same inputs, same result.
            ASSERT_EQ(p, derive_params(len, 4, rank, Mode::hodlr));
        }
}

TEST(DeriveParams, NextValidLength) {
    EXPECT_EQ(next_valid_length(1000, 16), 1024u);
    EXPECT_EQ(next_valid_length(1024, 16), 1024u);
    EXPECT_EQ(next_valid_length(3, 16), 32u);
    EXPECT_EQ(next_valid_length(24, 2), 32u);
}

TEST(GaussianMatrix, Deterministic) {
    EXPECT_EQ(gaussian_matrix<float>(2, 2, 7), gaussian_matrix<float>(2, 2, 7));
    EXPECT_EQ(gaussian_matrix<double>(5, 3, 7), gaussian_matrix<double>(5, 3, 7));
    EXPECT_NE(gaussian_matrix<double>(5, 3, 7), gaussian_matrix<double>(5, 3, 8));
}

// Frozen from an independent Python implementation of mt19937_64 and the
// polar method.
TEST(GaussianMatrix, MatchesFrozenSequence) {
    const auto m = gaussian_matrix<double>(2, 2, 7);
    EXPECT_EQ(m(0, 0), -0.9725628776518745);
    EXPECT_EQ(m(0, 1), 0.8726951669354742);
    EXPECT_EQ(m(1, 0), 1.4551781605998848);
    EXPECT_EQ(m(1, 1), 0.5473099926485518);

    const auto f = gaussian_matrix<float>(2, 2, 7);
    EXPECT_EQ(std::bit_cast<std::uint32_t>(f(0, 0)), 3212376545u);
    EXPECT_EQ(std::bit_cast<std::uint32_t>(f(0, 1)), 1063217395u);
    EXPECT_EQ(std::bit_cast<std::uint32_t>(f(1, 0)), 1069171527u);
    EXPECT_EQ(std::bit_cast<std::uint32_t>(f(1, 1)), 1057758338u);
}

TEST(GaussianMatrix, SampleMomentsOfLargeDraw) {
    const auto m = gaussian_matrix<double>(1024, 64, 1);
    double mean = 0.0;
    for (double x : m.values())
        mean += x;
    mean /= static_cast<double>(m.size());
    // Independent reference: 0.002467238247562388.
    EXPECT_NEAR(mean, 0.002467238247562388, 1e-12);
    EXPECT_GE(mean, -0.1);
    EXPECT_LE(mean, 0.1);
    double var = 0.0;
    for (double x : m.values())
        var += (x - mean) * (x - mean);
    var /= static_cast<double>(m.size() - 1);
    EXPECT_NEAR(var, 1.0, 0.03);
}

TEST(GaussianMatrix, RejectsEmptyShape) {
    EXPECT_THROW(gaussian_matrix<float>(0, 4, 1), InvalidArgument);
    EXPECT_THROW(gaussian_matrix<float>(4, 0, 1), InvalidArgument);
}

TEST(Matrix, ConstructionChecksShapeAndFiniteness) {
    EXPECT_THROW(Matrix<double>(2, 2, std::vector<double>{1, 2, 3}), ShapeMismatch);
    EXPECT_THROW(Matrix<double>(1, 2, std::vector<double>{1, std::nan("")}), NonFiniteValue);
    EXPECT_THROW(Matrix<float>(1, 1, std::vector<float>{std::numeric_limits<float>::infinity()}), NonFiniteValue);
    const Matrix<double> m(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
    EXPECT_EQ(m.rows(), 2u);
    EXPECT_EQ(m.cols(), 3u);
    EXPECT_EQ(m(1, 0), 4.0);
    EXPECT_EQ(m.row(1)[2], 6.0);
    EXPECT_EQ(transpose(m)(2, 1), 6.0);
}

TEST(Matrix, RelativeFrobeniusDistance) {
    const Matrix<double> a(1, 2, std::vector<double>{3, 4});
    const Matrix<double> b(1, 2, std::vector<double>{3, 5});
    EXPECT_DOUBLE_EQ(relative_frobenius_distance(b, a), 1.0 / 5.0);
    EXPECT_DOUBLE_EQ(relative_frobenius_distance(a, a), 0.0);
    EXPECT_DOUBLE_EQ(relative_frobenius_distance(a, Matrix<double>::zeros(1, 2)), 5.0);
}
