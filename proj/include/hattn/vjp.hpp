#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "hattn/apply.hpp"

namespace hattn {

template <Real T>
struct AttentionGradients {
    Matrix<T> dq;
    Matrix<T> dk;
    Matrix<T> dv;
};

namespace detail {

// Adjoint of repeated coarsening: accumulates per-level gradients from the
// coarsest level down to level 0. Each coarse row's gradient is duplicated to
// its two children and scaled by child_weight (1/2 for averaging, 1 for sums).
template <Real T>
Matrix<T> fold_levels(std::vector<Matrix<T>> grads, T child_weight) {
    for (std::size_t l = grads.size() - 1; l >= 1; --l) {
        Matrix<T>& fine = grads[l - 1];
        const Matrix<T>& coarse = grads[l];
        for (std::size_t j = 0; j < coarse.rows(); ++j) {
            auto src = coarse.row(j);
            auto r0 = fine.row(2 * j);
            auto r1 = fine.row(2 * j + 1);
            for (std::size_t c = 0; c < coarse.cols(); ++c) {
                r0[c] += child_weight * src[c];
                r1[c] += child_weight * src[c];
            }
        }
    }
    return std::move(grads[0]);
}

} // namespace detail

// Vector-Jacobian product of Z = h_attention(q, k, v) against the cotangent G,
// i.e. the gradients of <G, Z> with respect to q, k and v, for the
// hierarchical forward map as implemented (masking included). The shift is a
// constant: Z does not depend on it.
//
// With Y = A V, D = A 1 and Z = D^-1 Y:
//   dY = D^-1 G,  dD_i = -<G_i, Z_i> / D_i,  dV = A^T dY,
//   dA_rs = <dY~_r, V~_s> + dD~_r 1~_s  on every unmasked block entry,
//   dS = dA * A,  dQ~_r += dS_rs K~_s / sqrt(d),  dK~_s += dS_rs Q~_r / sqrt(d),
// where ~ marks level-l quantities (cotangents coarsened by pairwise sums),
// and the per-level gradients are folded back through the coarsening adjoints.
template <Real T>
AttentionGradients<T> h_attention_vjp(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                                      const HierarchyParams& params, const Matrix<T>& cotangent,
                                      const ApplyOptions& options = {}) {
    const auto stack = build_level_stack(q, k, v, params);
    const auto bands = build_bands(stack, params, options);
    const Matrix<T> y = apply_bands(bands, stack.v_levels, params, options);
    const auto d = partition_vector(bands, params, options);
    require_same_shape(cotangent, v, "cotangent");

    const std::size_t n = params.seq_len;
    const std::size_t cols = v.cols();
    const std::size_t dim = params.embed_dim;
    const std::size_t rank = params.rank;
    const std::size_t levels = params.levels;

    Matrix<T> dy(n, cols);
    Matrix<T> dd(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        T gz = 0;
        for (std::size_t c = 0; c < cols; ++c) {
            dy(i, c) = cotangent(i, c) / d[i];
            gz += cotangent(i, c) * (y(i, c) / d[i]);
        }
        dd(i, 0) = -gz / d[i];
    }

    const auto dy_levels = sum_levels(dy, levels);
    const auto dd_levels = sum_levels(dd, levels);
    const auto one_levels = sum_levels(Matrix<T>::ones(n, 1), levels);

    std::vector<Matrix<T>> dq_levels, dk_levels, dv_levels;
    for (std::size_t l = 0; l < levels; ++l) {
        dq_levels.emplace_back(params.rows_at(l), dim);
        dk_levels.emplace_back(params.rows_at(l), dim);
        dv_levels.emplace_back(params.rows_at(l), cols);
    }

    const bool mask = params.masked() && options.sabotage != Sabotage::skip_correction;
    const T scale = T(1) / std::sqrt(static_cast<T>(dim));

    bands.blocks.for_each_block([&](std::size_t level, BlockKind kind, BlockPos pos, std::span<const T> blk) {
        const auto& qv = stack.q_levels[level];
        const auto& kv = stack.k_levels[level];
        const auto& vv = stack.v_levels[level];
        const auto& gy = dy_levels[level];
        const auto& gd = dd_levels[level];
        const auto& ones = one_levels[level];
        auto& gq = dq_levels[level];
        auto& gk = dk_levels[level];
        auto& gv = dv_levels[level];
        for (std::size_t r = 0; r < rank; ++r) {
            const std::size_t row = pos.row * rank + r;
            for (std::size_t s = 0; s < rank; ++s) {
                if (mask && level > 0 && quadrant_masked(kind, level, r, s, rank))
                    continue;
                const std::size_t col = pos.col * rank + s;
                const T a = blk[r * rank + s];

                T ga = gd(row, 0) * ones(col, 0);
                auto gyr = gy.row(row);
                auto vs = vv.row(col);
                auto gvs = gv.row(col);
                for (std::size_t c = 0; c < cols; ++c) {
                    ga += gyr[c] * vs[c];
                    gvs[c] += a * gyr[c];
                }

                const T gs = ga * a * scale;
                auto qr = qv.row(row);
                auto ks = kv.row(col);
                auto gqr = gq.row(row);
                auto gks = gk.row(col);
                for (std::size_t c = 0; c < dim; ++c) {
                    gqr[c] += gs * ks[c];
                    gks[c] += gs * qr[c];
                }
            }
        }
    });

    return {detail::fold_levels(std::move(dq_levels), T(0.5)), detail::fold_levels(std::move(dk_levels), T(0.5)),
            detail::fold_levels(std::move(dv_levels), T(1))};
}

} // namespace hattn
