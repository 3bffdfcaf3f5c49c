#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "hattn/hierarchy.hpp"
#include "hattn/matrix.hpp"
#include "hattn/params.hpp"

namespace hattn {

enum class BlockKind { diag, super, sub };

// Number of super (or sub) diagonal blocks kept at a level with nb blocks per row.
constexpr std::size_t offdiag_count(Mode mode, std::size_t nb) noexcept {
    return mode == Mode::banded ? nb - 1 : nb / 2;
}

// Block-row / block-column of the idx-th block of a band, in the block
// grid of its own level.
struct BlockPos {
    std::size_t row;
    std::size_t col;
};

constexpr BlockPos block_position(Mode mode, BlockKind kind, std::size_t idx) noexcept {
    switch (kind) {
    case BlockKind::diag:
        return {idx, idx};
    case BlockKind::super:
        return mode == Mode::banded ? BlockPos{idx, idx + 1} : BlockPos{2 * idx, 2 * idx + 1};
    case BlockKind::sub:
        return mode == Mode::banded ? BlockPos{idx + 1, idx} : BlockPos{2 * idx + 1, 2 * idx};
    }
    return {0, 0};
}

// Quadrant masking for coarse banded blocks. In the super block (j, j+1) at
// level l >= 1 the bottom-left quadrant is exactly the level-(l-1) super block
// (2j+1, 2j+2), so it is dropped; symmetrically the top-right quadrant of the
// sub block (j+1, j). Within-block indices r (row) and s (col) run over [0, rank).
constexpr bool quadrant_masked(BlockKind kind, std::size_t level, std::size_t r, std::size_t s,
                               std::size_t rank) noexcept {
    if (level == 0 || kind == BlockKind::diag)
        return false;
    const std::size_t h = rank / 2;
    return kind == BlockKind::super ? (r >= h && s < h) : (r < h && s >= h);
}

// Retained N_r x N_r blocks of every level, stored contiguously per band:
// diag holds the N_b(0) level-0 diagonal blocks, super[l] / sub[l] hold the
// level-l off-diagonal blocks in index order. Each block is row-major.
template <Real T>
struct BandBlocks {
    Mode mode = Mode::banded;
    std::size_t rank = 0;
    std::vector<T> diag;
    std::vector<std::vector<T>> super;
    std::vector<std::vector<T>> sub;

    std::size_t levels() const noexcept { return super.size(); }
    std::size_t block_size() const noexcept { return rank * rank; }

    std::size_t block_count() const noexcept {
        std::size_t n = diag.size();
        for (std::size_t l = 0; l < super.size(); ++l)
            n += super[l].size() + sub[l].size();
        return n / block_size();
    }

    // fn(level, kind, BlockPos, span<T> block) for every stored block.
    template <typename Fn>
    void for_each_block(Fn&& fn) {
        visit(*this, fn);
    }
    template <typename Fn>
    void for_each_block(Fn&& fn) const {
        visit(*this, fn);
    }

  private:
    template <typename Self, typename Fn>
    static void visit(Self& self, Fn& fn) {
        const std::size_t bs = self.block_size();
        for (std::size_t i = 0; i * bs < self.diag.size(); ++i)
            fn(std::size_t{0}, BlockKind::diag, block_position(self.mode, BlockKind::diag, i),
               std::span(self.diag.data() + i * bs, bs));
        for (std::size_t l = 0; l < self.super.size(); ++l) {
            for (std::size_t i = 0; i * bs < self.super[l].size(); ++i)
                fn(l, BlockKind::super, block_position(self.mode, BlockKind::super, i),
                   std::span(self.super[l].data() + i * bs, bs));
            for (std::size_t i = 0; i * bs < self.sub[l].size(); ++i)
                fn(l, BlockKind::sub, block_position(self.mode, BlockKind::sub, i),
                   std::span(self.sub[l].data() + i * bs, bs));
        }
    }
};

// Raw scaled similarities of the retained blocks and their global maximum.
template <Real T>
struct SimilarityBands {
    BandBlocks<T> blocks;
    T shift = T(0);
};

// Exponentiated blocks exp(S - shift); every entry lies in (0, 1] when the
// shift is the true maximum.
template <Real T>
struct BlockBand {
    BandBlocks<T> blocks;
    T shift = T(0);
    std::size_t stored_entries = 0;

    Mode mode() const noexcept { return blocks.mode; }
    std::size_t rank() const noexcept { return blocks.rank; }
    std::size_t levels() const noexcept { return blocks.levels(); }
};

namespace detail {

template <Real T>
T dot(std::span<const T> a, std::span<const T> b) noexcept {
    // Four fixed partial sums; the order is part of the result.
    T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    const std::size_t n = a.size();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i)
        s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

template <Real T>
void fill_similarity_block(const Matrix<T>& q, const Matrix<T>& k, BlockPos pos, std::size_t rank, T scale,
                           std::span<T> out) {
    for (std::size_t r = 0; r < rank; ++r) {
        auto qr = q.row(pos.row * rank + r);
        for (std::size_t s = 0; s < rank; ++s)
            out[r * rank + s] = dot<T>(qr, k.row(pos.col * rank + s)) * scale;
    }
}

} // namespace detail

// Empty band layout (zero-filled blocks) for the given parameters.
template <Real T>
BandBlocks<T> make_band_layout(const HierarchyParams& params) {
    BandBlocks<T> b;
    b.mode = params.mode;
    b.rank = params.rank;
    const std::size_t bs = params.rank * params.rank;
    b.diag.assign(params.blocks_per_level[0] * bs, T(0));
    b.super.resize(params.levels);
    b.sub.resize(params.levels);
    for (std::size_t l = 0; l < params.levels; ++l) {
        const std::size_t n = offdiag_count(params.mode, params.blocks_per_level[l]);
        b.super[l].assign(n * bs, T(0));
        b.sub[l].assign(n * bs, T(0));
    }
    return b;
}

// Scaled similarities Q~(l) K~(l)^T / sqrt(d) on every retained block, plus the
// true maximum over all computed entries (masked quadrants included).
template <Real T>
SimilarityBands<T> compute_similarity_bands(const LevelStack<T>& stack, const HierarchyParams& params) {
    if (stack.levels() != params.levels)
        throw ShapeMismatch("level stack depth does not match the hierarchy");
    for (std::size_t l = 0; l < params.levels; ++l) {
        const auto& q = stack.q_levels[l];
        const auto& k = stack.k_levels[l];
        if (q.rows() != params.rows_at(l) || k.rows() != params.rows_at(l) || q.cols() != params.embed_dim ||
            k.cols() != params.embed_dim)
            throw ShapeMismatch("level " + std::to_string(l) + " of the stack has the wrong shape");
    }

    SimilarityBands<T> out;
    out.blocks = make_band_layout<T>(params);
    const T scale = T(1) / std::sqrt(static_cast<T>(params.embed_dim));
    T cmax = -std::numeric_limits<T>::infinity();
    out.blocks.for_each_block([&](std::size_t level, BlockKind, BlockPos pos, std::span<T> blk) {
        detail::fill_similarity_block(stack.q_levels[level], stack.k_levels[level], pos, params.rank, scale, blk);
        for (T x : blk)
            cmax = std::max(cmax, x);
    });
    if (!std::isfinite(cmax))
        throw NonFiniteValue("similarity blocks contain a non-finite value");
    out.shift = cmax;
    return out;
}

// exp(S - shift) on every stored entry.
template <Real T>
BlockBand<T> exponentiate_bands(const SimilarityBands<T>& raw, T shift) {
    BlockBand<T> out;
    out.blocks = raw.blocks;
    out.shift = shift;
    out.blocks.for_each_block([&](std::size_t, BlockKind, BlockPos, std::span<T> blk) {
        for (T& x : blk)
            x = std::exp(x - shift);
    });
    out.stored_entries = out.blocks.block_count() * out.blocks.block_size();
    out.blocks.for_each_block([](std::size_t, BlockKind, BlockPos, std::span<T> blk) {
        for (T x : blk)
            if (!std::isfinite(x))
                throw NonFiniteValue("exponentiated block overflowed; shift too small");
    });
    return out;
}

template <Real T>
BlockBand<T> exponentiate_bands(const SimilarityBands<T>& raw) {
    return exponentiate_bands(raw, raw.shift);
}

// Total stored entries for a parameter set, without building anything.
inline std::size_t stored_entry_count(const HierarchyParams& params) {
    std::size_t blocks = params.blocks_per_level[0];
    for (std::size_t nb : params.blocks_per_level)
        blocks += 2 * offdiag_count(params.mode, nb);
    return blocks * params.rank * params.rank;
}

// Paints how many times each entry of the L x L matrix is covered by the
// fine-grid footprint of a retained block entry. O(L^2) memory; small L only.
// Quadrants are skipped exactly when params.masked().
inline std::vector<std::uint32_t> coverage_grid(const HierarchyParams& params) {
    const bool honor_mask = params.masked();
    const std::size_t n = params.seq_len;
    const std::size_t rank = params.rank;
    std::vector<std::uint32_t> grid(n * n, 0);
    auto layout = make_band_layout<float>(params);
    layout.for_each_block([&](std::size_t level, BlockKind kind, BlockPos pos, std::span<float>) {
        const std::size_t w = std::size_t{1} << level;
        for (std::size_t r = 0; r < rank; ++r)
            for (std::size_t s = 0; s < rank; ++s) {
                if (honor_mask && quadrant_masked(kind, level, r, s, rank))
                    continue;
                const std::size_t row0 = (pos.row * rank + r) * w;
                const std::size_t col0 = (pos.col * rank + s) * w;
                for (std::size_t i = row0; i < row0 + w; ++i)
                    for (std::size_t j = col0; j < col0 + w; ++j)
                        ++grid[i * n + j];
            }
    });
    return grid;
}


// Number of masked quadrants (over all coarse banded blocks) whose fine
// footprint contains each entry. Zero everywhere in hodlr mode. Without
// masking, an entry is covered exactly 1 + depth times; nested quadrants make
// the depth exceed 1 once there are three or more levels.
inline std::vector<std::uint32_t> masked_quadrant_depth(const HierarchyParams& params) {
    const std::size_t n = params.seq_len;
    const std::size_t rank = params.rank;
    std::vector<std::uint32_t> grid(n * n, 0);
    if (params.mode != Mode::banded)
        return grid;
    auto layout = make_band_layout<float>(params);
    layout.for_each_block([&](std::size_t level, BlockKind kind, BlockPos pos, std::span<float>) {
        const std::size_t w = std::size_t{1} << level;
        for (std::size_t r = 0; r < rank; ++r)
            for (std::size_t s = 0; s < rank; ++s) {
                if (!quadrant_masked(kind, level, r, s, rank))
                    continue;
                const std::size_t row0 = (pos.row * rank + r) * w;
                const std::size_t col0 = (pos.col * rank + s) * w;
                for (std::size_t i = row0; i < row0 + w; ++i)
                    for (std::size_t j = col0; j < col0 + w; ++j)
                        ++grid[i * n + j];
            }
    });
    return grid;
}

} // namespace hattn
