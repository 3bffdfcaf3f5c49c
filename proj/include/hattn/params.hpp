#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hattn/errors.hpp"

namespace hattn {

// Which off-diagonal blocks are retained at each level.
//   hodlr:  sibling pairs only (2i, 2i+1); coverage of the full matrix is
//           disjoint by construction.
//   banded: every adjacent pair (j, j+1); coarse blocks overlap the finer
//           band and need masking unless allow_overlap is set.
enum class Mode { hodlr, banded };

inline std::string_view to_string(Mode m) { return m == Mode::hodlr ? "hodlr" : "banded"; }

inline std::optional<Mode> parse_mode(std::string_view s) {
    if (s == "hodlr")
        return Mode::hodlr;
    if (s == "banded")
        return Mode::banded;
    return std::nullopt;
}

struct HierarchyParams {
    std::size_t seq_len = 0;
    std::size_t embed_dim = 0;
    std::size_t rank = 0;
    Mode mode = Mode::banded;
    bool allow_overlap = false;
    std::size_t levels = 0;
    std::vector<std::size_t> blocks_per_level;

    // Quadrant masking is active for coarse banded blocks unless overlap is allowed.
    bool masked() const noexcept { return mode == Mode::banded && !allow_overlap; }

    std::size_t rows_at(std::size_t level) const noexcept { return seq_len >> level; }

    friend bool operator==(const HierarchyParams&, const HierarchyParams&) = default;
};

// Validates (L, d, N_r) and derives the level count M and per-level block
// counts: N_b(0) = L / N_r, N_b(l+1) = N_b(l) / 2, M = log2(N_b(0)) >= 1.
inline HierarchyParams derive_params(std::size_t seq_len, std::size_t embed_dim, std::size_t rank,
                                     Mode mode, bool allow_overlap = false) {
    if (seq_len == 0 || embed_dim == 0 || rank == 0)
        throw InvalidArgument("seq_len, embed_dim and rank must all be positive");

    const auto invalid = [&] {
        return InvalidLength("sequence length " + std::to_string(seq_len) + " is not rank (" +
                             std::to_string(rank) + ") times 2^M with M >= 1");
    };
    if (seq_len % rank != 0)
        throw invalid();
    const std::size_t nb0 = seq_len / rank;
    if (nb0 < 2 || (nb0 & (nb0 - 1)) != 0)
        throw invalid();
    if (mode == Mode::banded && !allow_overlap && rank % 2 != 0)
        throw InvalidRank("banded mode without overlap needs an even rank, got " + std::to_string(rank));

    HierarchyParams p;
    p.seq_len = seq_len;
    p.embed_dim = embed_dim;
    p.rank = rank;
    p.mode = mode;
    p.allow_overlap = allow_overlap;
    for (std::size_t nb = nb0; nb >= 2; nb /= 2)
        p.blocks_per_level.push_back(nb);
    p.levels = p.blocks_per_level.size();
    return p;
}

// Smallest valid sequence length >= seq_len for the given rank.
inline std::size_t next_valid_length(std::size_t seq_len, std::size_t rank) {
    if (rank == 0)
        throw InvalidArgument("rank must be positive");
    std::size_t len = 2 * rank;
    while (len < seq_len)
        len *= 2;
    return len;
}

} // namespace hattn
