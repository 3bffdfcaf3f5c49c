#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hattn/blocks.hpp"
#include "hattn/hierarchy.hpp"
#include "hattn/matrix.hpp"
#include "hattn/params.hpp"

namespace hattn {

// Deliberate faults for exercising the self-test harness.
enum class Sabotage { none, skip_correction };

struct ApplyOptions {
    // Replaces the global stabilization shift; nullopt uses the true maximum.
    std::optional<double> shift_override;
    Sabotage sabotage = Sabotage::none;
    // When set, apply_bands adds its multiply count here.
    std::uint64_t* multiply_counter = nullptr;
};

template <Real T>
struct AttentionResult {
    Matrix<T> z;
    std::vector<T> d_vec;
    std::size_t stored_entries = 0;
    // Blocks held per level: level 0 counts its diagonal too.
    std::vector<std::size_t> blocks_per_level;
};

// Y = A V through the nested interpolate-and-accumulate scheme:
//   Y = Y(0) + P(Y~(1) + P(Y~(2) + ... + P Y~(M-1))),
// where Y~(l) collects every level-l block times its V~(l) segment and P is
// row duplication. Masked quadrants of coarse banded blocks are skipped so that
// their fine footprint, already held by level l-1, is not counted twice.
template <Real T>
Matrix<T> apply_bands(const BlockBand<T>& bands, const std::vector<Matrix<T>>& v_levels,
                      const HierarchyParams& params, const ApplyOptions& options = {}) {
    if (bands.levels() != params.levels || bands.rank() != params.rank || bands.mode() != params.mode)
        throw ShapeMismatch("bands were not built for these hierarchy parameters");
    if (v_levels.size() != params.levels)
        throw ShapeMismatch("value stack depth does not match the hierarchy");
    const std::size_t cols = v_levels[0].cols();
    for (std::size_t l = 0; l < params.levels; ++l)
        if (v_levels[l].rows() != params.rows_at(l) || v_levels[l].cols() != cols)
            throw ShapeMismatch("value level " + std::to_string(l) + " has the wrong shape");

    const bool mask = params.masked() && options.sabotage != Sabotage::skip_correction;
    const std::size_t rank = params.rank;

    std::vector<Matrix<T>> acc;
    acc.reserve(params.levels);
    for (std::size_t l = 0; l < params.levels; ++l)
        acc.emplace_back(params.rows_at(l), cols);

    std::uint64_t mults = 0;
    bands.blocks.for_each_block([&](std::size_t level, BlockKind kind, BlockPos pos, std::span<const T> blk) {
        const Matrix<T>& v = v_levels[level];
        Matrix<T>& y = acc[level];
        const bool coarse_masked = mask && level > 0;
        for (std::size_t r = 0; r < rank; ++r) {
            T* yr = y.row(pos.row * rank + r).data();
            for (std::size_t s = 0; s < rank; ++s) {
                if (coarse_masked && quadrant_masked(kind, level, r, s, rank))
                    continue;
                const T a = blk[r * rank + s];
                const T* vs = v.row(pos.col * rank + s).data();
                for (std::size_t c = 0; c < cols; ++c)
                    yr[c] += a * vs[c];
                mults += cols;
            }
        }
    });

    for (std::size_t l = params.levels - 1; l >= 1; --l)
        add_interpolated(acc[l - 1], acc[l]);
    if (options.multiply_counter)
        *options.multiply_counter += mults;
    return std::move(acc[0]);
}

// D = A 1_L, evaluated with the same operator (and options) as apply_bands so
// that the normalization is exactly consistent with Y.
template <Real T>
std::vector<T> partition_vector(const BlockBand<T>& bands, const HierarchyParams& params,
                                const ApplyOptions& options = {}) {
    const auto ones = sum_levels(Matrix<T>::ones(params.seq_len, 1), params.levels);
    ApplyOptions uncounted = options;
    uncounted.multiply_counter = nullptr;
    const Matrix<T> d = apply_bands(bands, ones, params, uncounted);
    std::vector<T> out(d.values().begin(), d.values().end());
    for (std::size_t i = 0; i < out.size(); ++i)
        if (!(out[i] > T(0)) || !std::isfinite(out[i]))
            throw DegeneratePartition("partition entry " + std::to_string(i) + " is not a positive finite value");
    return out;
}

// Blocks held per level, level 0 including its diagonal.
inline std::vector<std::size_t> block_counts_per_level(const HierarchyParams& params) {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l < params.levels; ++l)
        out.push_back(2 * offdiag_count(params.mode, params.blocks_per_level[l]) +
                      (l == 0 ? params.blocks_per_level[0] : 0));
    return out;
}

// Bands for (q, k) with either the true or an overridden shift.
template <Real T>
BlockBand<T> build_bands(const LevelStack<T>& stack, const HierarchyParams& params,
                         const ApplyOptions& options = {}) {
    const auto raw = compute_similarity_bands(stack, params);
    const T shift = options.shift_override ? static_cast<T>(*options.shift_override) : raw.shift;
    return exponentiate_bands(raw, shift);
}

// Hierarchical attention Z = D^-1 A V. V may have any number of columns.
template <Real T>
AttentionResult<T> h_attention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                               const HierarchyParams& params, const ApplyOptions& options = {}) {
    const auto stack = build_level_stack(q, k, v, params);
    const auto bands = build_bands(stack, params, options);
    Matrix<T> z = apply_bands(bands, stack.v_levels, params, options);
    auto d = partition_vector(bands, params, options);
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (T& x : z.row(i))
            x /= d[i];
    require_finite(z, "attention output");
    return {std::move(z), std::move(d), bands.stored_entries, block_counts_per_level(params)};
}

// Worker count from HATTN_THREADS, or the machine's parallelism when unset.
inline std::size_t configured_threads() {
    if (const char* env = std::getenv("HATTN_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || n <= 0)
            throw InvalidArgument(std::string("HATTN_THREADS must be a positive integer, got '") + env + "'");
        return static_cast<std::size_t>(n);
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Runs h_attention on every head independently; heads are distributed over
// configured_threads() workers and written back by index.
template <Real T>
std::vector<AttentionResult<T>> h_attention_multihead(const std::vector<Matrix<T>>& q,
                                                      const std::vector<Matrix<T>>& k,
                                                      const std::vector<Matrix<T>>& v,
                                                      const HierarchyParams& params,
                                                      const ApplyOptions& options = {}) {
    if (q.size() != k.size() || q.size() != v.size() || q.empty())
        throw HeadShapeMismatch("query, key and value need the same positive number of heads");
    for (std::size_t h = 0; h < q.size(); ++h) {
        const bool ok = q[h].rows() == params.seq_len && k[h].rows() == params.seq_len &&
                        v[h].rows() == params.seq_len && q[h].cols() == params.embed_dim &&
                        k[h].cols() == params.embed_dim && v[h].cols() == v[0].cols();
        if (!ok)
            throw HeadShapeMismatch("head " + std::to_string(h) + " does not match the shared shape");
    }

    std::vector<std::optional<AttentionResult<T>>> slots(q.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t h = next++; h < q.size(); h = next++) {
            try {
                slots[h] = h_attention(q[h], k[h], v[h], params, options);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::min(configured_threads(), q.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < workers; ++t)
            pool.emplace_back(worker);
    }
    if (failure)
        std::rethrow_exception(failure);

    std::vector<AttentionResult<T>> out;
    out.reserve(slots.size());
    for (auto& s : slots)
        out.push_back(std::move(*s));
    return out;
}

} // namespace hattn
