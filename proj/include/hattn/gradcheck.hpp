#pragma once

#include <algorithm>
#include <cmath>

#include "hattn/apply.hpp"
#include "hattn/matrix.hpp"

namespace hattn {

// Central finite differences of a scalar function of one matrix argument.
template <Real T, typename F>
Matrix<T> finite_difference_gradient(F&& f, const Matrix<T>& x, double step) {
    Matrix<T> grad(x.rows(), x.cols());
    Matrix<T> probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T orig = probe.values()[i];
        probe.values()[i] = orig + static_cast<T>(step);
        const double up = f(probe);
        probe.values()[i] = orig - static_cast<T>(step);
        const double down = f(probe);
        probe.values()[i] = orig;
        grad.values()[i] = static_cast<T>((up - down) / (2.0 * step));
    }
    return grad;
}

// max |a - ref| / max |ref|, the infinity-norm relative error.
template <Real T>
double max_relative_error(const Matrix<T>& a, const Matrix<T>& ref) {
    double scale = 0.0;
    for (T x : ref.values())
        scale = std::max(scale, std::abs(static_cast<double>(x)));
    const double diff = max_abs_difference(a, ref);
    return scale > 0.0 ? diff / scale : diff;
}

// <G, h_attention(q, k, v).z>
template <Real T>
double attention_objective(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                           const HierarchyParams& params, const Matrix<T>& cotangent,
                           const ApplyOptions& options = {}) {
    const auto z = h_attention(q, k, v, params, options).z;
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
        s += static_cast<double>(cotangent.values()[i]) * static_cast<double>(z.values()[i]);
    return s;
}

} // namespace hattn
