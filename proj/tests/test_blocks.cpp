#include <gtest/gtest.h>

#include <cmath>

#include "hattn/blocks.hpp"
#include "hattn/random.hpp"

using namespace hattn;

namespace {

// Level-l coarse rows computed straight from the fine rows.
Matrix<double> mean_rows(const Matrix<double>& x, std::size_t level) {
    const std::size_t w = std::size_t{1} << level;
    Matrix<double> out(x.rows() / w, x.cols());
    for (std::size_t j = 0; j < out.rows(); ++j)
        for (std::size_t c = 0; c < x.cols(); ++c) {
            double s = 0;
            for (std::size_t i = j * w; i < (j + 1) * w; ++i)
                s += x(i, c);
            out(j, c) = s / static_cast<double>(w);
        }
    return out;
}

// Dense level-l similarity Q~ K~^T / sqrt(d).
Matrix<double> dense_similarity(const Matrix<double>& q, const Matrix<double>& k, std::size_t level) {
    const auto qc = mean_rows(q, level);
    const auto kc = mean_rows(k, level);
    auto s = matmul(qc, transpose(kc));
    for (double& x : s.values())
        x /= std::sqrt(static_cast<double>(q.cols()));
    return s;
}

LevelStack<double> stack_for(const Matrix<double>& q, const Matrix<double>& k, const HierarchyParams& p) {
    return build_level_stack(q, k, q, p);
}

} // namespace

TEST(BlockLayout, PositionsPerMode) {
    EXPECT_EQ(block_position(Mode::banded, BlockKind::super, 3).row, 3u);
    EXPECT_EQ(block_position(Mode::banded, BlockKind::super, 3).col, 4u);
    EXPECT_EQ(block_position(Mode::banded, BlockKind::sub, 3).row, 4u);
    EXPECT_EQ(block_position(Mode::banded, BlockKind::sub, 3).col, 3u);
    EXPECT_EQ(block_position(Mode::hodlr, BlockKind::super, 3).row, 6u);
    EXPECT_EQ(block_position(Mode::hodlr, BlockKind::super, 3).col, 7u);
    EXPECT_EQ(block_position(Mode::hodlr, BlockKind::sub, 3).row, 7u);
    EXPECT_EQ(block_position(Mode::hodlr, BlockKind::sub, 3).col, 6u);
}

TEST(BlockLayout, QuadrantMask) {
    // rank 4: halves are {0,1} and {2,3}.
    EXPECT_TRUE(quadrant_masked(BlockKind::super, 1, 2, 1, 4));
    EXPECT_FALSE(quadrant_masked(BlockKind::super, 1, 1, 2, 4));
    EXPECT_TRUE(quadrant_masked(BlockKind::sub, 1, 1, 2, 4));
    EXPECT_FALSE(quadrant_masked(BlockKind::sub, 1, 2, 1, 4));
    EXPECT_FALSE(quadrant_masked(BlockKind::super, 0, 2, 1, 4));
    EXPECT_FALSE(quadrant_masked(BlockKind::diag, 2, 2, 1, 4));
}

TEST(SimilarityBands, ZeroQueriesGiveZeroBandsAndZeroShift) {
    const auto p = derive_params(32, 4, 4, Mode::banded);
    const auto zero = Matrix<double>::zeros(32, 4);
    const auto raw = compute_similarity_bands(stack_for(zero, gaussian_matrix<double>(32, 4, 1), p), p);
    EXPECT_EQ(raw.shift, 0.0);
    raw.blocks.for_each_block([](std::size_t, BlockKind, BlockPos, std::span<const double> b) {
        for (double x : b)
            EXPECT_EQ(x, 0.0);
    });
}

TEST(SimilarityBands, MinimalHierarchyCoversDenseSimilarity) {
    for (Mode mode : {Mode::hodlr, Mode::banded}) {
        const auto p = derive_params(4, 3, 2, mode);
        const auto q = gaussian_matrix<double>(4, 3, 1);
        const auto k = gaussian_matrix<double>(4, 3, 2);
        const auto raw = compute_similarity_bands(stack_for(q, k, p), p);
        const auto s = dense_similarity(q, k, 0);
        std::size_t visited = 0;
        raw.blocks.for_each_block([&](std::size_t, BlockKind, BlockPos pos, std::span<const double> b) {
            for (std::size_t r = 0; r < 2; ++r)
                for (std::size_t c = 0; c < 2; ++c)
                    EXPECT_NEAR(b[r * 2 + c], s(pos.row * 2 + r, pos.col * 2 + c), 1e-14);
            ++visited;
        });
        EXPECT_EQ(visited, 4u);
    }
}

TEST(SimilarityBands, BlockCounts) {
    const auto banded = derive_params(16, 4, 2, Mode::banded);
    const auto x = gaussian_matrix<double>(16, 4, 3);
    EXPECT_EQ(compute_similarity_bands(stack_for(x, x, banded), banded).blocks.block_count(), 30u);
    EXPECT_EQ(stored_entry_count(banded), 30u * 4);

    const auto hodlr = derive_params(16, 4, 2, Mode::hodlr);
    EXPECT_EQ(compute_similarity_bands(stack_for(x, x, hodlr), hodlr).blocks.block_count(), 22u);
    EXPECT_EQ(stored_entry_count(hodlr), 22u * 4);
}

TEST(SimilarityBands, ShiftIsTrueMaximum) {
    const auto p = derive_params(64, 8, 4, Mode::banded);
    const auto q = gaussian_matrix<double>(64, 8, 4);
    const auto k = gaussian_matrix<double>(64, 8, 5);
    const auto raw = compute_similarity_bands(stack_for(q, k, p), p);
    double m = -1e300;
    raw.blocks.for_each_block([&](std::size_t, BlockKind, BlockPos, std::span<const double> b) {
        for (double x : b)
            m = std::max(m, x);
    });
    EXPECT_EQ(raw.shift, m);
    // Negative maxima are kept as is.
    auto neg = q;
    for (std::size_t i = 0; i < 64; ++i)
        for (std::size_t c = 0; c < 8; ++c) {
            neg(i, c) = 1.0;
        }
    const auto kneg = Matrix<double>(64, 8, -1.0);
    EXPECT_LT(compute_similarity_bands(stack_for(neg, kneg, p), p).shift, 0.0);
}

TEST(ExponentiateBands, ZeroBandsBecomeOnes) {
    const auto p = derive_params(16, 2, 2, Mode::hodlr);
    const auto zero = Matrix<double>::zeros(16, 2);
    const auto bands = exponentiate_bands(compute_similarity_bands(stack_for(zero, zero, p), p), 0.0);
    bands.blocks.for_each_block([](std::size_t, BlockKind, BlockPos, std::span<const double> b) {
        for (double x : b)
            EXPECT_EQ(x, 1.0);
    });
}

TEST(ExponentiateBands, EntriesInUnitIntervalWithExactMaximumOne) {
    for (Mode mode : {Mode::hodlr, Mode::banded})
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto p = derive_params(128, 16, 8, mode);
            const auto q = gaussian_matrix<float>(128, 16, seed);
            const auto k = gaussian_matrix<float>(128, 16, seed + 100);
            const auto bands = exponentiate_bands(compute_similarity_bands(build_level_stack(q, k, q, p), p));
            float m = 0.0f;
            bands.blocks.for_each_block([&](std::size_t, BlockKind, BlockPos, std::span<const float> b) {
                for (float x : b) {
                    ASSERT_GT(x, 0.0f);
                    ASSERT_LE(x, 1.0f);
                    m = std::max(m, x);
                }
            });
            EXPECT_EQ(m, 1.0f);
            EXPECT_LE(bands.stored_entries, 5u * 128 * 8);
        }
}

TEST(ExponentiateBands, MatchesDenseSimilarityAtRetainedPositions) {
    for (Mode mode : {Mode::hodlr, Mode::banded}) {
        const auto p = derive_params(32, 4, 2, mode);
        const auto q = gaussian_matrix<double>(32, 4, 11);
        const auto k = gaussian_matrix<double>(32, 4, 12);
        const auto bands = exponentiate_bands(compute_similarity_bands(stack_for(q, k, p), p));
        std::vector<Matrix<double>> dense;
        for (std::size_t l = 0; l < p.levels; ++l)
            dense.push_back(dense_similarity(q, k, l));
        bands.blocks.for_each_block([&](std::size_t level, BlockKind, BlockPos pos, std::span<const double> b) {
            for (std::size_t r = 0; r < 2; ++r)
                for (std::size_t c = 0; c < 2; ++c)
                    EXPECT_NEAR(b[r * 2 + c], std::exp(dense[level](pos.row * 2 + r, pos.col * 2 + c) - bands.shift),
                                1e-13);
        });
    }
}

TEST(StoredEntries, WithinFiveLRankForAllShapes) {
    for (Mode mode : {Mode::hodlr, Mode::banded})
        for (std::size_t rank : {2, 4, 8, 16})
            for (std::size_t m = 1; m <= 12; ++m) {
                const std::size_t len = rank << m;
                const auto p = derive_params(len, 1, rank, mode);
                ASSERT_LE(stored_entry_count(p), 5 * len * rank);
            }
}

TEST(Coverage, HodlrTilesOnce) {
    for (std::size_t rank : {1, 2, 3, 4})
        for (std::size_t len = 2 * rank; len <= 64; len *= 2) {
            const auto grid = coverage_grid(derive_params(len, 1, rank, Mode::hodlr));
            for (auto c : grid)
                ASSERT_EQ(c, 1u) << "L=" << len << " N_r=" << rank;
        }
}

TEST(Coverage, BandedMaskedTilesOnce) {
    for (std::size_t rank : {2, 4, 8})
        for (std::size_t len = 2 * rank; len <= 64; len *= 2) {
            const auto grid = coverage_grid(derive_params(len, 1, rank, Mode::banded, false));
            for (auto c : grid)
                ASSERT_EQ(c, 1u) << "L=" << len << " N_r=" << rank;
        }
}

TEST(Coverage, BandedUnmaskedCountsNestedQuadrants) {
    for (std::size_t rank : {2, 4, 8})
        for (std::size_t len = 2 * rank; len <= 64; len *= 2) {
            const auto p = derive_params(len, 1, rank, Mode::banded, true);
            const auto grid = coverage_grid(p);
            const auto depth = masked_quadrant_depth(p);
            std::uint32_t deepest = 0;
            for (std::size_t i = 0; i < grid.size(); ++i) {
                ASSERT_EQ(grid[i], 1 + depth[i]);
                deepest = std::max(deepest, depth[i]);
            }
            // Quadrants nest one inside the other, so the overlap depth is
            // bounded by the number of coarse levels.
            EXPECT_EQ(deepest, p.levels - 1) << "L=" << len << " N_r=" << rank;
        }
}

TEST(Coverage, TwoLevelOverlapIsExactlyDouble) {
    // With two levels only a single quadrant can cover an entry.
    const auto p = derive_params(16, 1, 4, Mode::banded, true);
    const auto grid = coverage_grid(p);
    const auto depth = masked_quadrant_depth(p);
    std::size_t doubled = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        ASSERT_EQ(grid[i], depth[i] ? 2u : 1u);
        doubled += depth[i];
    }
    // One super and one sub block at level 1, each with a 2x2 quadrant of 2x2 footprints.
    EXPECT_EQ(doubled, 2u * 16);
}
