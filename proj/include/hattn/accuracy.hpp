#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "hattn/apply.hpp"
#include "hattn/bench.hpp"
#include "hattn/oracle.hpp"
#include "hattn/random.hpp"

namespace hattn::accuracy {

enum class InputKind { gaussian, smooth };
enum class ValueKind { gaussian, ones };

inline std::optional<InputKind> parse_input(std::string_view s) {
    if (s == "gaussian")
        return InputKind::gaussian;
    if (s == "smooth")
        return InputKind::smooth;
    return std::nullopt;
}

inline std::optional<ValueKind> parse_values(std::string_view s) {
    if (s == "gaussian")
        return ValueKind::gaussian;
    if (s == "ones")
        return ValueKind::ones;
    return std::nullopt;
}

// Rows (i / L) u with u = (1, ..., 1) / sqrt(d): a similarity that varies
// smoothly with position, the regime where coarse blocks approximate well.
inline Matrix<double> smooth_positions(std::size_t length, std::size_t dim) {
    Matrix<double> m(length, dim);
    const double unit = 1.0 / std::sqrt(static_cast<double>(dim));
    for (std::size_t i = 0; i < length; ++i)
        for (std::size_t c = 0; c < dim; ++c)
            m(i, c) = (static_cast<double>(i) / static_cast<double>(length)) * unit;
    return m;
}

struct AccuracyConfig {
    Mode mode = Mode::banded;
    bool allow_overlap = false;
    std::vector<std::size_t> ranks{2, 4, 8, 16};
    std::size_t length = 256;
    std::size_t dim = 16;
    std::uint64_t seed = 0;
    InputKind input = InputKind::gaussian;
    ValueKind values = ValueKind::gaussian;
    Precision dtype = Precision::f64;
};

struct AccuracyRecord {
    Mode mode = Mode::banded;
    std::size_t seq_len = 0;
    std::size_t dim = 0;
    std::size_t rank = 0;
    double rel_fro_error_z = 0.0;
    double rel_fro_error_a = 0.0;
};

namespace detail {

template <Real T>
double z_error(const Matrix<double>& q, const Matrix<double>& k, const Matrix<double>& v,
               const HierarchyParams& params, const Matrix<double>& exact) {
    const auto z = h_attention(q.cast<T>(), k.cast<T>(), v.cast<T>(), params).z;
    return relative_frobenius_distance(z, exact);
}

} // namespace detail

// One record per rank: h_attention against exact softmax attention, and the
// assembled hierarchical operator against exp(S - c) with the same shift c.
inline std::vector<AccuracyRecord> run_accuracy(const AccuracyConfig& cfg) {
    Matrix<double> q, k;
    if (cfg.input == InputKind::smooth) {
        q = smooth_positions(cfg.length, cfg.dim);
        k = q;
    } else {
        q = gaussian_matrix<double>(cfg.length, cfg.dim, cfg.seed);
        k = gaussian_matrix<double>(cfg.length, cfg.dim, cfg.seed + 1);
    }
    const Matrix<double> v = cfg.values == ValueKind::ones ? Matrix<double>::ones(cfg.length, cfg.dim)
                                                           : gaussian_matrix<double>(cfg.length, cfg.dim, cfg.seed + 2);
    const auto exact_z = oracle::dense_attention(q, k, v);

    std::vector<AccuracyRecord> out;
    for (std::size_t rank : cfg.ranks) {
        const auto params = derive_params(cfg.length, cfg.dim, rank, cfg.mode, cfg.allow_overlap);
        const auto bands = oracle::reference_bands(q, k, params);
        const auto assembled = oracle::assemble_dense_operator(bands, params);
        const auto exact_a = oracle::exact_attention_matrix(q, k, bands.shift);

        AccuracyRecord rec;
        rec.mode = cfg.mode;
        rec.seq_len = cfg.length;
        rec.dim = cfg.dim;
        rec.rank = rank;
        rec.rel_fro_error_a = relative_frobenius_distance(assembled, exact_a);
        rec.rel_fro_error_z = cfg.dtype == Precision::f32 ? detail::z_error<float>(q, k, v, params, exact_z)
                                                          : detail::z_error<double>(q, k, v, params, exact_z);
        out.push_back(rec);
    }
    return out;
}

inline constexpr const char* csv_header = "mode,L,d,N_r,rel_fro_error_Z,rel_fro_error_A";

inline void write_csv(std::ostream& os, const std::vector<AccuracyRecord>& records) {
    os << csv_header << '\n';
    for (const auto& r : records)
        os << to_string(r.mode) << ',' << r.seq_len << ',' << r.dim << ',' << r.rank << ','
           << bench::format_real(r.rel_fro_error_z) << ',' << bench::format_real(r.rel_fro_error_a) << '\n';
}

} // namespace hattn::accuracy
