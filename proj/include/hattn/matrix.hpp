#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "hattn/errors.hpp"

namespace hattn {

// Supported value precisions. A Matrix carries its precision in its type;
// operations never mix the two.
template <typename T>
concept Real = std::same_as<T, float> || std::same_as<T, double>;

enum class Precision { f32, f64 };

template <Real T>
constexpr Precision precision_of() {
    return std::is_same_v<T, float> ? Precision::f32 : Precision::f64;
}

// Dense row-major matrix. Shapes are always positive.
template <Real T>
class Matrix {
  public:
    using value_type = T;

    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
        : rows_(rows), cols_(cols) {
        check_shape(rows, cols);
        data_.assign(rows * cols, fill);
    }

    Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        check_shape(rows, cols);
        if (data_.size() != rows * cols)
            throw ShapeMismatch("matrix data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(rows) + "x" +
                                std::to_string(cols));
        if (!all_finite())
            throw NonFiniteValue("matrix constructed with a non-finite value");
    }

    static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }
    static Matrix ones(std::size_t rows, std::size_t cols) { return Matrix(rows, cols, T(1)); }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<T> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const T> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](T x) { return std::isfinite(x); });
    }

    template <Real U>
    Matrix<U> cast() const {
        std::vector<U> out(data_.size());
        std::transform(data_.begin(), data_.end(), out.begin(), [](T x) { return static_cast<U>(x); });
        return Matrix<U>(rows_, cols_, std::move(out));
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

  private:
    static void check_shape(std::size_t rows, std::size_t cols) {
        if (rows == 0 || cols == 0)
            throw InvalidArgument("matrix shape must be positive, got " + std::to_string(rows) + "x" +
                                  std::to_string(cols));
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

template <Real T>
void require_finite(const Matrix<T>& m, const char* what) {
    if (!m.all_finite())
        throw NonFiniteValue(std::string(what) + " contains a non-finite value");
}

template <Real T>
void require_same_shape(const Matrix<T>& a, const Matrix<T>& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeMismatch(std::string(what) + ": " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
}

template <Real T>
double frobenius_norm(const Matrix<T>& a) {
    double s = 0.0;
    for (T x : a.values())
        s += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(s);
}

// ||a - b||_F / ||b||_F, with b as the reference. Returns the absolute
// distance when the reference is exactly zero.
template <Real T, Real U>
double relative_frobenius_distance(const Matrix<T>& a, const Matrix<U>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeMismatch("relative_frobenius_distance: shape mismatch");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = static_cast<double>(a.values()[i]);
        const double y = static_cast<double>(b.values()[i]);
        num += (x - y) * (x - y);
        den += y * y;
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

template <Real T, Real U>
double max_abs_difference(const Matrix<T>& a, const Matrix<U>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeMismatch("max_abs_difference: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.values()[i]) - static_cast<double>(b.values()[i])));
    return m;
}

// Plain triple-loop product; used by oracles and tests, not by the fast path.
template <Real T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.cols() != b.rows())
        throw ShapeMismatch("matmul: inner dimensions differ");
    Matrix<T> c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const T aik = a(i, k);
            auto bk = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j)
                ci[j] += aik * bk[j];
        }
    }
    return c;
}

template <Real T>
Matrix<T> transpose(const Matrix<T>& a) {
    Matrix<T> t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            t(j, i) = a(i, j);
    return t;
}

} // namespace hattn
