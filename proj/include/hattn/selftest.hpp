#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hattn/apply.hpp"
#include "hattn/bench.hpp"
#include "hattn/gradcheck.hpp"
#include "hattn/oracle.hpp"
#include "hattn/random.hpp"
#include "hattn/vjp.hpp"

namespace hattn::selftest {

inline std::optional<Sabotage> parse_sabotage(std::string_view s) {
    if (s == "none" || s.empty())
        return Sabotage::none;
    if (s == "skip-correction")
        return Sabotage::skip_correction;
    return std::nullopt;
}

struct Options {
    bool quick = false;
    Sabotage sabotage = Sabotage::none;
};

struct CheckResult {
    std::string name;
    bool passed = true;
    std::string detail;
};

namespace detail {

struct Structure {
    Mode mode;
    bool allow_overlap;
};

inline constexpr Structure structures[] = {
    {Mode::hodlr, false},
    {Mode::banded, false},
    {Mode::banded, true},
};

inline std::string describe(const HierarchyParams& p) {
    std::ostringstream os;
    os << to_string(p.mode) << (p.allow_overlap ? "+overlap" : "") << " L=" << p.seq_len << " d=" << p.embed_dim
       << " N_r=" << p.rank;
    return os.str();
}

// Records the first failure and the worst value seen.
class Tracker {
  public:
    Tracker(std::string name, double limit) : name_(std::move(name)), limit_(limit) {}

    void observe(double value, const std::string& where) {
        ++count_;
        if (value > worst_)
            worst_ = value;
        if (!(value <= limit_) && failure_.empty())
            failure_ = where + ": " + bench::format_real(value) + " > " + bench::format_real(limit_);
    }

    CheckResult result() const {
        if (!failure_.empty())
            return {name_, false, failure_};
        return {name_, true, std::to_string(count_) + " cases, worst " + bench::format_real(worst_)};
    }

  private:
    std::string name_;
    double limit_;
    double worst_ = 0.0;
    std::size_t count_ = 0;
    std::string failure_;
};

inline CheckResult guarded(const std::string& name, const std::function<CheckResult()>& body) {
    try {
        return body();
    } catch (const std::exception& e) {
        return {name, false, std::string("exception: ") + e.what()};
    }
}

} // namespace detail

inline std::vector<CheckResult> run(const Options& opt) {
    using detail::Tracker;
    ApplyOptions fast;
    fast.sabotage = opt.sabotage;
    const std::vector<std::size_t> lengths = opt.quick ? std::vector<std::size_t>{16, 32, 64}
                                                       : std::vector<std::size_t>{32, 64, 128, 256};
    std::vector<CheckResult> out;

    out.push_back(detail::guarded("oracle-equivalence", [&] {
        Tracker t("oracle-equivalence", 1e-10);
        std::uint64_t seed = 100;
        for (const auto& s : detail::structures)
            for (std::size_t len : lengths)
                for (std::size_t rank : {2, 4, 8}) {
                    if (len < 2 * rank)
                        continue;
                    const auto p = derive_params(len, 4, rank, s.mode, s.allow_overlap);
                    const auto q = gaussian_matrix<double>(len, 4, seed++);
                    const auto k = gaussian_matrix<double>(len, 4, seed++);
                    const auto v = gaussian_matrix<double>(len, 4, seed++);
                    const auto z = h_attention(q, k, v, p, fast).z;
                    t.observe(relative_frobenius_distance(z, oracle::dense_reference_hattention(q, k, v, p)),
                              detail::describe(p));
                }
        return t.result();
    }));

    out.push_back(detail::guarded("normalization", [&] {
        Tracker t("normalization", 1e-5);
        std::uint64_t seed = 200;
        for (const auto& s : detail::structures)
            for (std::size_t len : lengths)
                for (std::size_t rank : {2, 4, 8}) {
                    if (len < 2 * rank)
                        continue;
                    const auto p = derive_params(len, 8, rank, s.mode, s.allow_overlap);
                    const auto q = gaussian_matrix<float>(len, 8, seed++);
                    const auto k = gaussian_matrix<float>(len, 8, seed++);
                    const auto z = h_attention(q, k, Matrix<float>::ones(len, 1), p, fast).z;
                    t.observe(max_abs_difference(z, Matrix<float>::ones(len, 1)), detail::describe(p));
                }
        return t.result();
    }));

    out.push_back(detail::guarded("shift-invariance", [&] {
        Tracker t("shift-invariance", 1e-5);
        std::uint64_t seed = 300;
        for (const auto& s : detail::structures)
            for (std::size_t len : lengths) {
                const auto p = derive_params(len, 8, 4, s.mode, s.allow_overlap);
                auto q = gaussian_matrix<float>(len, 8, seed++);
                auto k = gaussian_matrix<float>(len, 8, seed++);
                for (auto& x : q.values())
                    x *= 0.25f;
                for (auto& x : k.values())
                    x *= 0.25f;
                const auto v = gaussian_matrix<float>(len, 8, seed++);
                ApplyOptions unshifted = fast;
                unshifted.shift_override = 0.0;
                const auto z = h_attention(q, k, v, p, fast).z;
                const auto z0 = h_attention(q, k, v, p, unshifted).z;
                t.observe(relative_frobenius_distance(z, z0), detail::describe(p));
            }
        return t.result();
    }));

    out.push_back(detail::guarded("minimal-depth-exactness", [&] {
        Tracker t("minimal-depth-exactness", 1e-5);
        std::uint64_t seed = 400;
        for (const auto& s : detail::structures)
            for (std::size_t rank : {2, 4, 8, 16}) {
                const auto p = derive_params(2 * rank, 8, rank, s.mode, s.allow_overlap);
                const auto q = gaussian_matrix<float>(2 * rank, 8, seed++);
                const auto k = gaussian_matrix<float>(2 * rank, 8, seed++);
                const auto v = gaussian_matrix<float>(2 * rank, 8, seed++);
                const auto z = h_attention(q, k, v, p, fast).z;
                const auto ref = oracle::dense_attention(q.cast<double>(), k.cast<double>(), v.cast<double>());
                t.observe(relative_frobenius_distance(z, ref.cast<float>()), detail::describe(p));
            }
        return t.result();
    }));

    out.push_back(detail::guarded("vjp-finite-difference", [&] {
        Tracker t("vjp-finite-difference", 1e-5);
        std::uint64_t seed = 500;
        for (const auto& s : detail::structures)
            for (std::size_t rank : {2, 4}) {
                const auto p = derive_params(32, 4, rank, s.mode, s.allow_overlap);
                const auto q = gaussian_matrix<double>(32, 4, seed++);
                const auto k = gaussian_matrix<double>(32, 4, seed++);
                const auto v = gaussian_matrix<double>(32, 4, seed++);
                const auto g = gaussian_matrix<double>(32, 4, seed++);
                const auto grads = h_attention_vjp(q, k, v, p, g, fast);
                const auto fq = finite_difference_gradient(
                    [&](const Matrix<double>& x) { return attention_objective(x, k, v, p, g, fast); }, q, 1e-5);
                const auto fk = finite_difference_gradient(
                    [&](const Matrix<double>& x) { return attention_objective(q, x, v, p, g, fast); }, k, 1e-5);
                const auto fv = finite_difference_gradient(
                    [&](const Matrix<double>& x) { return attention_objective(q, k, x, p, g, fast); }, v, 1e-5);
                t.observe(max_relative_error(grads.dq, fq), detail::describe(p) + " dq");
                t.observe(max_relative_error(grads.dk, fk), detail::describe(p) + " dk");
                t.observe(max_relative_error(grads.dv, fv), detail::describe(p) + " dv");
            }
        return t.result();
    }));

    out.push_back(detail::guarded("vjp-value-transpose", [&] {
        Tracker t("vjp-value-transpose", 1e-10);
        std::uint64_t seed = 600;
        for (const auto& s : detail::structures)
            for (std::size_t len : lengths) {
                const auto p = derive_params(len, 4, 4, s.mode, s.allow_overlap);
                const auto q = gaussian_matrix<double>(len, 4, seed++);
                const auto k = gaussian_matrix<double>(len, 4, seed++);
                const auto v = gaussian_matrix<double>(len, 4, seed++);
                const auto g = gaussian_matrix<double>(len, 4, seed++);
                const auto dv = h_attention_vjp(q, k, v, p, g, fast).dv;
                const auto a = oracle::assemble_dense_operator(oracle::reference_bands(q, k, p), p);
                Matrix<double> scaled = g;
                for (std::size_t i = 0; i < len; ++i) {
                    double d = 0.0;
                    for (double x : a.row(i))
                        d += x;
                    for (double& x : scaled.row(i))
                        x /= d;
                }
                t.observe(relative_frobenius_distance(dv, matmul(transpose(a), scaled)), detail::describe(p));
            }
        return t.result();
    }));

    out.push_back(detail::guarded("storage-bound", [&] {
        Tracker t("storage-bound", 1.0);
        for (const auto& s : detail::structures)
            for (std::size_t len : lengths)
                for (std::size_t rank : {2, 4, 8}) {
                    if (len < 2 * rank)
                        continue;
                    const auto p = derive_params(len, 4, rank, s.mode, s.allow_overlap);
                    const auto q = gaussian_matrix<float>(len, 4, len + rank);
                    std::uint64_t mults = 0;
                    ApplyOptions counted = fast;
                    counted.multiply_counter = &mults;
                    const auto r = h_attention(q, q, q, p, counted);
                    const double bound = 5.0 * static_cast<double>(len * rank);
                    t.observe(static_cast<double>(r.stored_entries) / bound, detail::describe(p) + " entries");
                    t.observe(static_cast<double>(mults) / (1.5 * bound * 4.0), detail::describe(p) + " mults");
                }
        return t.result();
    }));

    out.push_back(detail::guarded("coverage", [&] {
        Tracker t("coverage", 0.0);
        for (const auto& s : detail::structures)
            for (std::size_t len : {8, 16, 32, 64})
                for (std::size_t rank : {2, 4}) {
                    if (len < 2 * rank)
                        continue;
                    const auto p = derive_params(len, 1, rank, s.mode, s.allow_overlap);
                    const auto grid = coverage_grid(p);
                    const auto depth = masked_quadrant_depth(p);
                    double bad = 0.0;
                    for (std::size_t i = 0; i < grid.size(); ++i) {
                        const std::uint32_t expected = p.masked() ? 1 : 1 + depth[i];
                        bad += grid[i] != expected ? 1.0 : 0.0;
                    }
                    t.observe(bad, detail::describe(p));
                }
        return t.result();
    }));

    out.push_back(detail::guarded("rank-map-golden", [&] {
        const auto a = oracle::toeplitz_matrix(16);
        const auto map = oracle::rank_map(a, 2, 1e-3);
        bool ok = oracle::numerical_rank(a, 1e-1) == 16 && oracle::storage_entries(map) == 192;
        for (auto r : map.leaf_ranks)
            ok = ok && r == 4;
        for (std::size_t l = 0; l < map.levels; ++l) {
            for (auto r : map.upper[l])
                ok = ok && r == 2;
            for (auto r : map.lower[l])
                ok = ok && r == 2;
        }
        return CheckResult{"rank-map-golden", ok, ok ? "matches" : "rank map deviates:\n" + oracle::render(map)};
    }));

    return out;
}

} // namespace hattn::selftest
