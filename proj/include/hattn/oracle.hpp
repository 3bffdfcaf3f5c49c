#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "hattn/apply.hpp"
#include "hattn/blocks.hpp"
#include "hattn/hierarchy.hpp"
#include "hattn/matrix.hpp"
#include "hattn/params.hpp"

// Brute-force O(L^2) references for the hierarchical path. Everything here is
// slow on purpose and refuses sequence lengths above max_length.
namespace hattn::oracle {

inline constexpr std::size_t max_length = 2048;

inline void guard_length(std::size_t n, const char* what) {
    if (n > max_length)
        throw OracleGuard(std::string(what) + ": length " + std::to_string(n) + " exceeds the oracle limit of " +
                          std::to_string(max_length));
}

// softmax(Q K^T / sqrt(d)) V with a per-row max shift.
template <Real T>
Matrix<T> dense_attention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v) {
    require_same_shape(q, k, "dense_attention query/key");
    if (v.rows() != q.rows())
        throw ShapeMismatch("dense_attention: value rows differ from query rows");
    guard_length(q.rows(), "dense_attention");

    const std::size_t n = q.rows();
    const T scale = T(1) / std::sqrt(static_cast<T>(q.cols()));
    Matrix<T> z(n, v.cols());
    std::vector<T> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        T wmax = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            T s = 0;
            for (std::size_t c = 0; c < q.cols(); ++c)
                s += q(i, c) * k(j, c);
            w[j] = s * scale;
            wmax = std::max(wmax, w[j]);
        }
        T total = 0;
        for (auto& x : w) {
            x = std::exp(x - wmax);
            total += x;
        }
        auto zi = z.row(i);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t c = 0; c < v.cols(); ++c)
                zi[c] += w[j] * v(j, c);
        for (auto& x : zi)
            x /= total;
    }
    return z;
}

// exp(Q K^T / sqrt(d) - shift), the exact operator the hierarchy approximates.
template <Real T>
Matrix<T> exact_attention_matrix(const Matrix<T>& q, const Matrix<T>& k, T shift) {
    require_same_shape(q, k, "exact_attention_matrix");
    guard_length(q.rows(), "exact_attention_matrix");
    const std::size_t n = q.rows();
    const T scale = T(1) / std::sqrt(static_cast<T>(q.cols()));
    Matrix<T> a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            T s = 0;
            for (std::size_t c = 0; c < q.cols(); ++c)
                s += q(i, c) * k(j, c);
            a(i, j) = std::exp(s * scale - shift);
        }
    return a;
}

// Expands every retained block over its 2^l x 2^l fine footprint (the
// T A~ T^T expansion) and places it in an explicit L x L matrix. Masked
// quadrants are left out; overlapping placements are summed.
template <Real T>
Matrix<T> assemble_dense_operator(const BlockBand<T>& bands, const HierarchyParams& params) {
    guard_length(params.seq_len, "assemble_dense_operator");
    if (bands.levels() != params.levels || bands.rank() != params.rank || bands.mode() != params.mode)
        throw ShapeMismatch("bands were not built for these hierarchy parameters");
    const std::size_t n = params.seq_len;
    const std::size_t rank = params.rank;
    Matrix<T> a(n, n);
    bands.blocks.for_each_block([&](std::size_t level, BlockKind kind, BlockPos pos, std::span<const T> blk) {
        const std::size_t w = std::size_t{1} << level;
        for (std::size_t r = 0; r < rank; ++r)
            for (std::size_t s = 0; s < rank; ++s) {
                if (params.masked() && quadrant_masked(kind, level, r, s, rank))
                    continue;
                const std::size_t row0 = (pos.row * rank + r) * w;
                const std::size_t col0 = (pos.col * rank + s) * w;
                for (std::size_t i = row0; i < row0 + w; ++i)
                    for (std::size_t j = col0; j < col0 + w; ++j)
                        a(i, j) += blk[r * rank + s];
            }
    });
    return a;
}

// Bands for (q, k) built exactly as the fast path builds them.
template <Real T>
BlockBand<T> reference_bands(const Matrix<T>& q, const Matrix<T>& k, const HierarchyParams& params) {
    const auto stack = build_level_stack(q, k, q, params);
    return exponentiate_bands(compute_similarity_bands(stack, params));
}

// diag(A* 1)^-1 A* V with A* the explicitly assembled hierarchical operator.
template <Real T>
Matrix<T> dense_reference_hattention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                                     const HierarchyParams& params) {
    require_input_shape(q, params, "query");
    require_input_shape(k, params, "key");
    if (v.rows() != params.seq_len)
        throw ShapeMismatch("value rows differ from the sequence length");
    const auto a = assemble_dense_operator(reference_bands(q, k, params), params);
    Matrix<T> z = matmul(a, v);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        T d = 0;
        for (T x : a.row(i))
            d += x;
        if (!(d > T(0)))
            throw DegeneratePartition("assembled operator has a non-positive row sum");
        for (T& x : z.row(i))
            x /= d;
    }
    return z;
}

template <Real T>
std::vector<double> singular_values(const Matrix<T>& a) {
    Eigen::MatrixXd m(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<double>(a(i, j));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    std::vector<double> out(s.data(), s.data() + s.size());
    for (double x : out)
        if (!std::isfinite(x))
            throw SvdFailure("singular value decomposition produced a non-finite value");
    return out;
}

// Smallest r with sum_{i > r} sigma_i < eps. This is the tail-sum criterion,
// not the usual sigma_r / sigma_1 ratio test.
template <Real T>
std::size_t numerical_rank(const Matrix<T>& a, double eps) {
    if (!(eps > 0.0))
        throw InvalidArgument("numerical_rank tolerance must be positive");
    const auto sigma = singular_values(a);
    // Suffix sums from the smallest value up.
    double tail = 0.0;
    std::size_t r = sigma.size();
    for (std::size_t i = sigma.size(); i-- > 0;) {
        tail += sigma[i];
        if (!(tail < eps))
            break;
        r = i;
    }
    return r;
}

// A_ij = exp(2 exp(-(i-j)^2) - 1): a symmetric Toeplitz matrix with a
// fast-decaying similarity, used to illustrate hierarchical low rank.
inline Matrix<double> toeplitz_matrix(std::size_t n) {
    Matrix<double> a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double d = static_cast<double>(i) - static_cast<double>(j);
            a(i, j) = std::exp(2.0 * std::exp(-d * d) - 1.0);
        }
    return a;
}

// Numerical ranks of a HODLR-style dyadic partition: the matrix is split in
// 2x2 blocks, the two off-diagonal blocks are leaves, and the diagonal halves
// recurse. Level 0 is the finest off-diagonal level; the diagonal blocks left
// after `levels` splits are dense leaves.
struct RankMap {
    std::size_t dim = 0;
    std::size_t levels = 0;
    std::vector<std::size_t> leaf_ranks;
    // upper[l][i] / lower[l][i]: block (2i, 2i+1) / (2i+1, 2i) of level l,
    // each of size block_dim(l).
    std::vector<std::vector<std::size_t>> upper;
    std::vector<std::vector<std::size_t>> lower;

    std::size_t leaf_dim() const noexcept { return dim >> levels; }
    std::size_t block_dim(std::size_t level) const noexcept { return dim >> (levels - level); }

    // Rank of the block containing entry (i, j).
    std::size_t rank_at(std::size_t i, std::size_t j) const {
        for (std::size_t l = levels; l-- > 0;) {
            const std::size_t b = block_dim(l);
            const std::size_t bi = i / b;
            const std::size_t bj = j / b;
            if (bi != bj)
                return bi < bj ? upper[l][bi / 2] : lower[l][bj / 2];
        }
        return leaf_ranks[i / leaf_dim()];
    }
};

template <Real T>
Matrix<T> sub_matrix(const Matrix<T>& a, std::size_t row0, std::size_t col0, std::size_t rows, std::size_t cols) {
    Matrix<T> out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            out(i, j) = a(row0 + i, col0 + j);
    return out;
}

template <Real T>
RankMap rank_map(const Matrix<T>& a, std::size_t levels, double eps) {
    if (a.rows() != a.cols())
        throw ShapeMismatch("rank_map needs a square matrix");
    if (levels == 0 || a.rows() % (std::size_t{1} << levels) != 0)
        throw InvalidArgument("matrix dimension must be divisible by 2^levels with levels >= 1");
    RankMap map;
    map.dim = a.rows();
    map.levels = levels;
    const std::size_t leaf = map.leaf_dim();
    for (std::size_t i = 0; i < (std::size_t{1} << levels); ++i)
        map.leaf_ranks.push_back(numerical_rank(sub_matrix(a, i * leaf, i * leaf, leaf, leaf), eps));
    for (std::size_t l = 0; l < levels; ++l) {
        const std::size_t b = map.block_dim(l);
        std::vector<std::size_t> up, lo;
        for (std::size_t i = 0; 2 * i * b < map.dim; ++i) {
            up.push_back(numerical_rank(sub_matrix(a, 2 * i * b, (2 * i + 1) * b, b, b), eps));
            lo.push_back(numerical_rank(sub_matrix(a, (2 * i + 1) * b, 2 * i * b, b, b), eps));
        }
        map.upper.push_back(std::move(up));
        map.lower.push_back(std::move(lo));
    }
    return map;
}

// Entries needed to store an m x n block of rank r: dense or as a U V^T
// factor pair, whichever is smaller.
constexpr std::size_t block_storage(std::size_t m, std::size_t n, std::size_t r) noexcept {
    return std::min(m * n, r * (m + n));
}

inline std::size_t storage_entries(const RankMap& map) {
    std::size_t total = 0;
    const std::size_t leaf = map.leaf_dim();
    for (std::size_t r : map.leaf_ranks)
        total += block_storage(leaf, leaf, r);
    for (std::size_t l = 0; l < map.levels; ++l) {
        const std::size_t b = map.block_dim(l);
        for (std::size_t r : map.upper[l])
            total += block_storage(b, b, r);
        for (std::size_t r : map.lower[l])
            total += block_storage(b, b, r);
    }
    return total;
}

inline double compression_rate(const RankMap& map) {
    return static_cast<double>(map.dim * map.dim) / static_cast<double>(storage_entries(map));
}

// Grid rendering with one cell per leaf-sized tile.
inline std::string render(const RankMap& map) {
    const std::size_t leaf = map.leaf_dim();
    const std::size_t cells = map.dim / leaf;
    const std::size_t half = cells / 2;
    std::ostringstream os;
    for (std::size_t ci = 0; ci < cells; ++ci) {
        if (ci == half && cells > 1) {
            for (std::size_t cj = 0; cj < cells; ++cj)
                os << (cj == half ? "+" : "") << "----";
            os << '\n';
        }
        for (std::size_t cj = 0; cj < cells; ++cj) {
            if (cj == half && cells > 1)
                os << '|';
            const std::string v = std::to_string(map.rank_at(ci * leaf, cj * leaf));
            os << std::string(4 - std::min<std::size_t>(4, v.size()), ' ') << v;
        }
        os << '\n';
    }
    return os.str();
}

} // namespace hattn::oracle
