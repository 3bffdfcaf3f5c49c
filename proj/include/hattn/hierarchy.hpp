#pragma once

#include <cstddef>
#include <vector>

#include "hattn/matrix.hpp"
#include "hattn/params.hpp"

namespace hattn {

namespace detail {

template <Real T, typename Combine>
Matrix<T> pairwise_rows(const Matrix<T>& x, Combine combine, const char* what) {
    if (x.rows() < 2 || x.rows() % 2 != 0)
        throw OddRows(std::string(what) + ": need an even row count >= 2, got " + std::to_string(x.rows()));
    Matrix<T> out(x.rows() / 2, x.cols());
    for (std::size_t j = 0; j < out.rows(); ++j) {
        auto even = x.row(2 * j);
        auto odd = x.row(2 * j + 1);
        auto dst = out.row(j);
        for (std::size_t c = 0; c < x.cols(); ++c)
            dst[c] = combine(even[c], odd[c]);
    }
    return out;
}

} // namespace detail

// Restriction with averaging: row j = (x[2j] + x[2j+1]) / 2.
template <Real T>
Matrix<T> coarsen_avg(const Matrix<T>& x) {
    return detail::pairwise_rows(x, [](T a, T b) { return (a + b) * T(0.5); }, "coarsen_avg");
}

// Restriction without averaging: row j = x[2j] + x[2j+1].
template <Real T>
Matrix<T> coarsen_sum(const Matrix<T>& x) {
    return detail::pairwise_rows(x, [](T a, T b) { return a + b; }, "coarsen_sum");
}

// Piecewise-constant prolongation: rows 2j and 2j+1 of the result equal y[j].
template <Real T>
Matrix<T> interpolate(const Matrix<T>& y) {
    Matrix<T> out(2 * y.rows(), y.cols());
    for (std::size_t j = 0; j < y.rows(); ++j) {
        auto src = y.row(j);
        std::copy(src.begin(), src.end(), out.row(2 * j).begin());
        std::copy(src.begin(), src.end(), out.row(2 * j + 1).begin());
    }
    return out;
}

// Adds interpolate(coarse) into fine in place.
template <Real T>
void add_interpolated(Matrix<T>& fine, const Matrix<T>& coarse) {
    if (fine.rows() != 2 * coarse.rows() || fine.cols() != coarse.cols())
        throw ShapeMismatch("add_interpolated: fine grid must have twice the coarse rows");
    for (std::size_t j = 0; j < coarse.rows(); ++j) {
        auto src = coarse.row(j);
        auto r0 = fine.row(2 * j);
        auto r1 = fine.row(2 * j + 1);
        for (std::size_t c = 0; c < coarse.cols(); ++c) {
            r0[c] += src[c];
            r1[c] += src[c];
        }
    }
}

// Repeated coarsening of a single matrix, levels 0..levels-1. Level 0 is the
// input itself.
template <Real T, typename Step>
std::vector<Matrix<T>> coarsen_chain(const Matrix<T>& x, std::size_t levels, Step step) {
    std::vector<Matrix<T>> out;
    out.reserve(levels);
    out.push_back(x);
    for (std::size_t l = 1; l < levels; ++l)
        out.push_back(step(out.back()));
    return out;
}

template <Real T>
std::vector<Matrix<T>> sum_levels(const Matrix<T>& x, std::size_t levels) {
    return coarsen_chain(x, levels, [](const Matrix<T>& m) { return coarsen_sum(m); });
}

template <Real T>
std::vector<Matrix<T>> avg_levels(const Matrix<T>& x, std::size_t levels) {
    return coarsen_chain(x, levels, [](const Matrix<T>& m) { return coarsen_avg(m); });
}

// Coarsened queries, keys and values for levels 0..M-1. Level l has L/2^l rows.
template <Real T>
struct LevelStack {
    std::vector<Matrix<T>> q_levels;
    std::vector<Matrix<T>> k_levels;
    std::vector<Matrix<T>> v_levels;

    std::size_t levels() const noexcept { return q_levels.size(); }
};

template <Real T>
void require_input_shape(const Matrix<T>& m, const HierarchyParams& params, const char* what) {
    if (m.rows() != params.seq_len || m.cols() != params.embed_dim)
        throw ShapeMismatch(std::string(what) + " must be " + std::to_string(params.seq_len) + "x" +
                            std::to_string(params.embed_dim) + ", got " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()));
}

// Queries and keys are averaged, values are summed.
template <Real T>
LevelStack<T> build_level_stack(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                                const HierarchyParams& params) {
    require_input_shape(q, params, "query");
    require_input_shape(k, params, "key");
    if (v.rows() != params.seq_len)
        throw ShapeMismatch("value must have " + std::to_string(params.seq_len) + " rows");
    require_finite(q, "query");
    require_finite(k, "key");
    require_finite(v, "value");
    return {avg_levels(q, params.levels), avg_levels(k, params.levels), sum_levels(v, params.levels)};
}

} // namespace hattn
