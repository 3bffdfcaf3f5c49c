#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hattn/apply.hpp"
#include "hattn/random.hpp"

namespace hattn::bench {

// Unguarded O(L^2 d) softmax attention streamed one query row at a time.
// This is the quadratic timing baseline; use oracle::dense_attention for
// correctness checks.
template <Real T>
Matrix<T> dense_softmax_attention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v) {
    require_same_shape(q, k, "dense_softmax_attention");
    const std::size_t n = q.rows();
    const T scale = T(1) / std::sqrt(static_cast<T>(q.cols()));
    Matrix<T> z(n, v.cols());
    std::vector<T> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto qi = q.row(i);
        T wmax = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            w[j] = hattn::detail::dot<T>(qi, k.row(j)) * scale;
            wmax = std::max(wmax, w[j]);
        }
        T total = 0;
        for (auto& x : w) {
            x = std::exp(x - wmax);
            total += x;
        }
        T* zi = z.row(i).data();
        for (std::size_t j = 0; j < n; ++j) {
            const T wj = w[j];
            const T* vj = v.row(j).data();
            for (std::size_t c = 0; c < v.cols(); ++c)
                zi[c] += wj * vj[c];
        }
        const T inv = T(1) / total;
        for (std::size_t c = 0; c < v.cols(); ++c)
            zi[c] *= inv;
    }
    return z;
}

// Wall-clock median of `reps` runs after one warmup, in seconds.
template <typename Fn>
double median_seconds(Fn&& fn, std::size_t reps) {
    using clock = std::chrono::steady_clock;
    fn();
    std::vector<double> times;
    for (std::size_t r = 0; r < std::max<std::size_t>(reps, 1); ++r) {
        const auto t0 = clock::now();
        fn();
        times.push_back(std::chrono::duration<double>(clock::now() - t0).count());
    }
    std::sort(times.begin(), times.end());
    const std::size_t m = times.size() / 2;
    return times.size() % 2 ? times[m] : 0.5 * (times[m - 1] + times[m]);
}

struct BenchConfig {
    Mode mode = Mode::banded;
    bool allow_overlap = false;
    std::size_t rank = 16;
    std::size_t dim = 64;
    std::vector<std::size_t> lengths;
    std::uint64_t seed = 0;
    Precision dtype = Precision::f32;
    bool compare_dense = false;
    bool pad = false;
    std::size_t reps = 5;
    std::size_t dense_cap = 4096;
    std::size_t threads = 1;
};

struct BenchRecord {
    Mode mode = Mode::banded;
    std::size_t seq_len = 0;
    std::size_t requested_len = 0;
    std::size_t dim = 0;
    std::size_t rank = 0;
    Precision dtype = Precision::f32;
    std::size_t threads = 1;
    std::size_t reps = 0;
    double seconds_hier = 0.0;
    std::optional<double> seconds_dense;
    std::size_t stored_entries = 0;
    std::uint64_t seed = 0;

    bool padded() const noexcept { return seq_len != requested_len; }
};

namespace detail {

// Requested rows of standard-normal data, zero rows appended up to `rows`.
template <Real T>
Matrix<T> padded_gaussian(std::size_t requested, std::size_t rows, std::size_t cols, std::uint64_t seed) {
    const auto g = gaussian_matrix<T>(requested, cols, seed);
    Matrix<T> out(rows, cols);
    std::copy(g.values().begin(), g.values().end(), out.values().begin());
    return out;
}

template <Real T>
BenchRecord run_one(const BenchConfig& cfg, std::size_t requested) {
    const std::size_t len = cfg.pad ? next_valid_length(requested, cfg.rank) : requested;
    const auto params = derive_params(len, cfg.dim, cfg.rank, cfg.mode, cfg.allow_overlap);
    const auto q = padded_gaussian<T>(requested, len, cfg.dim, cfg.seed);
    const auto k = padded_gaussian<T>(requested, len, cfg.dim, cfg.seed + 1);
    const auto v = padded_gaussian<T>(requested, len, cfg.dim, cfg.seed + 2);

    BenchRecord rec;
    rec.mode = cfg.mode;
    rec.seq_len = len;
    rec.requested_len = requested;
    rec.dim = cfg.dim;
    rec.rank = cfg.rank;
    rec.dtype = cfg.dtype;
    rec.threads = cfg.threads;
    rec.reps = cfg.reps;
    rec.seed = cfg.seed;

    std::size_t stored = 0;
    rec.seconds_hier = median_seconds([&] { stored = h_attention(q, k, v, params).stored_entries; }, cfg.reps);
    rec.stored_entries = stored;
    if (cfg.compare_dense && len <= cfg.dense_cap)
        rec.seconds_dense = median_seconds([&] { (void)dense_softmax_attention(q, k, v); }, cfg.reps);
    return rec;
}

} // namespace detail

// One record per requested length. Without cfg.pad, invalid lengths throw
// InvalidLength.
inline std::vector<BenchRecord> run_bench(const BenchConfig& cfg) {
    std::vector<BenchRecord> out;
    for (std::size_t len : cfg.lengths)
        out.push_back(cfg.dtype == Precision::f32 ? detail::run_one<float>(cfg, len)
                                                  : detail::run_one<double>(cfg, len));
    return out;
}

// Least-squares slope of log2(y) against log2(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw InvalidArgument("loglog_slope needs at least two paired samples");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log2(x[i]);
        my += std::log2(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log2(x[i]) - mx;
        sxy += dx * (std::log2(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

// Floats use 9 significant digits throughout the CSV output.
inline std::string format_real(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

inline constexpr const char* csv_header =
    "mode,L,requested_L,padded,d,N_r,dtype,threads,reps,seconds_hier,seconds_dense,stored_entries,seed";

inline void write_csv(std::ostream& os, const std::vector<BenchRecord>& records) {
    os << csv_header << '\n';
    for (const auto& r : records) {
        os << to_string(r.mode) << ',' << r.seq_len << ',' << r.requested_len << ',' << (r.padded() ? 1 : 0) << ','
           << r.dim << ',' << r.rank << ',' << (r.dtype == Precision::f32 ? "f32" : "f64") << ',' << r.threads
           << ',' << r.reps << ',' << format_real(r.seconds_hier) << ','
           << (r.seconds_dense ? format_real(*r.seconds_dense) : std::string()) << ',' << r.stored_entries << ','
           << r.seed << '\n';
    }
}

} // namespace hattn::bench
