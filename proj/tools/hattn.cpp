// hattn: benchmarks, accuracy sweeps, the rank-map demonstration and the
// self-test suite for the hierarchical attention library.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hattn/accuracy.hpp"
#include "hattn/bench.hpp"
#include "hattn/oracle.hpp"
#include "hattn/selftest.hpp"

namespace {

using namespace hattn;

constexpr int exit_failure = 1;
constexpr int exit_usage = 2;

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw IOError("cannot open " + path + " for writing");
    return out;
}

struct BenchFlags {
    std::string mode = "banded";
    bool allow_overlap = false;
    std::size_t rank = 16;
    std::size_t dim = 64;
    std::vector<std::size_t> lengths;
    std::uint64_t seed = 0;
    std::string dtype = "f32";
    bool compare_dense = false;
    bool pad = false;
    std::size_t reps = 5;
    std::string out;
};

int run_bench(const BenchFlags& f) {
    bench::BenchConfig cfg;
    cfg.mode = *parse_mode(f.mode);
    cfg.allow_overlap = f.allow_overlap;
    cfg.rank = f.rank;
    cfg.dim = f.dim;
    cfg.lengths = f.lengths;
    cfg.seed = f.seed;
    cfg.dtype = f.dtype == "f64" ? Precision::f64 : Precision::f32;
    cfg.compare_dense = f.compare_dense;
    cfg.pad = f.pad;
    cfg.reps = f.reps;
    cfg.threads = configured_threads();

    for (std::size_t len : cfg.lengths) {
        if (!cfg.pad) {
            (void)derive_params(len, cfg.dim, cfg.rank, cfg.mode, cfg.allow_overlap);
        } else if (next_valid_length(len, cfg.rank) != len) {
            std::cerr << "warning: length " << len << " padded with zero tokens to "
                      << next_valid_length(len, cfg.rank) << "; results are approximate\n";
        }
    }

    const auto records = bench::run_bench(cfg);
    auto out = open_output(f.out);
    bench::write_csv(out, records);
    for (const auto& r : records)
        std::cout << to_string(r.mode) << " L=" << r.seq_len << " hier=" << bench::format_real(r.seconds_hier)
                  << "s" << (r.seconds_dense ? " dense=" + bench::format_real(*r.seconds_dense) + "s" : "")
                  << " stored=" << r.stored_entries << '\n';
    return 0;
}

struct AccuracyFlags {
    std::string mode = "banded";
    bool allow_overlap = false;
    std::vector<std::size_t> ranks{2, 4, 8, 16};
    std::size_t length = 256;
    std::size_t dim = 16;
    std::uint64_t seed = 0;
    std::string input = "gaussian";
    std::string values = "gaussian";
    std::string dtype = "f64";
    std::string out;
};

int run_accuracy(const AccuracyFlags& f) {
    accuracy::AccuracyConfig cfg;
    cfg.mode = *parse_mode(f.mode);
    cfg.allow_overlap = f.allow_overlap;
    cfg.ranks = f.ranks;
    cfg.length = f.length;
    cfg.dim = f.dim;
    cfg.seed = f.seed;
    cfg.input = *accuracy::parse_input(f.input);
    cfg.values = *accuracy::parse_values(f.values);
    cfg.dtype = f.dtype == "f32" ? Precision::f32 : Precision::f64;
    const auto records = accuracy::run_accuracy(cfg);
    auto out = open_output(f.out);
    accuracy::write_csv(out, records);
    accuracy::write_csv(std::cout, records);
    return 0;
}

// Without --eps: the golden check (ranks at 1e-3, full rank at 1e-1).
// With --eps: report the map and the full-matrix rank at that tolerance.
int run_rankmap(std::optional<double> eps) {
    const auto a = oracle::toeplitz_matrix(16);
    const double map_eps = eps.value_or(1e-3);
    const double full_eps = eps.value_or(1e-1);
    const auto map = oracle::rank_map(a, 2, map_eps);
    const auto full = oracle::numerical_rank(a, full_eps);

    std::cout << "rank map of the 16x16 Toeplitz matrix, eps " << bench::format_real(map_eps) << ":\n"
              << oracle::render(map) << "whole-matrix rank at eps " << bench::format_real(full_eps) << ": " << full
              << '\n'
              << "storage " << oracle::storage_entries(map) << " entries, compression "
              << bench::format_real(oracle::compression_rate(map)) << '\n';
    if (eps)
        return 0;

    bool ok = full == 16;
    for (auto r : map.leaf_ranks)
        ok = ok && r == 4;
    for (std::size_t l = 0; l < map.levels; ++l)
        for (std::size_t i = 0; i < map.upper[l].size(); ++i)
            ok = ok && map.upper[l][i] == 2 && map.lower[l][i] == 2;
    if (!ok) {
        std::cerr << "GoldenMismatch: expected diagonal ranks 4, off-diagonal ranks 2 and full rank 16\n";
        return exit_failure;
    }
    std::cout << "golden: OK\n";
    return 0;
}

int run_selftest(bool quick, const std::string& sabotage) {
    const auto mode = selftest::parse_sabotage(sabotage);
    if (!mode) {
        std::cerr << "unknown sabotage '" << sabotage << "'\n";
        return exit_usage;
    }
    bool ok = true;
    for (const auto& r : selftest::run({quick, *mode})) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        ok = ok && r.passed;
    }
    std::cout << (ok ? "selftest passed\n" : "selftest FAILED\n");
    return ok ? 0 : exit_failure;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical attention benchmarks and checks"};
    app.require_subcommand(1);

    const auto mode_check = CLI::IsMember({"hodlr", "banded"});
    const auto dtype_check = CLI::IsMember({"f32", "f64"});

    BenchFlags bf;
    auto* bench_cmd = app.add_subcommand("bench", "Time hierarchical (and optionally dense) attention");
    bench_cmd->add_option("--mode", bf.mode, "Block structure")->check(mode_check);
    bench_cmd->add_flag("--allow-overlap", bf.allow_overlap, "Keep overlapping coarse quadrants (banded)");
    bench_cmd->add_option("--nr", bf.rank, "Block rank N_r")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--dim", bf.dim, "Embedding size d")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--lengths", bf.lengths, "Sequence lengths")->delimiter(',')->required();
    bench_cmd->add_option("--seed", bf.seed, "Input seed");
    bench_cmd->add_option("--dtype", bf.dtype, "Precision")->check(dtype_check);
    bench_cmd->add_flag("--compare-dense", bf.compare_dense, "Also time dense attention (L <= 4096)");
    bench_cmd->add_flag("--pad", bf.pad, "Zero-pad invalid lengths to the next valid one");
    bench_cmd->add_option("--reps", bf.reps, "Timed repetitions per length (median reported)")
        ->check(CLI::PositiveNumber);
    bench_cmd->add_option("--out", bf.out, "CSV output path")->required();

    AccuracyFlags af;
    auto* acc_cmd = app.add_subcommand("accuracy", "Approximation error against dense references");
    acc_cmd->add_option("--mode", af.mode, "Block structure")->check(mode_check);
    acc_cmd->add_flag("--allow-overlap", af.allow_overlap, "Keep overlapping coarse quadrants (banded)");
    acc_cmd->add_option("--nr-list", af.ranks, "Ranks to sweep")->delimiter(',');
    acc_cmd->add_option("--length", af.length, "Sequence length")->check(CLI::PositiveNumber);
    acc_cmd->add_option("--dim", af.dim, "Embedding size d")->check(CLI::PositiveNumber);
    acc_cmd->add_option("--seed", af.seed, "Input seed");
    acc_cmd->add_option("--input", af.input, "Query/key generator")->check(CLI::IsMember({"gaussian", "smooth"}));
    acc_cmd->add_option("--values", af.values, "Value generator")->check(CLI::IsMember({"gaussian", "ones"}));
    acc_cmd->add_option("--dtype", af.dtype, "Precision of the hierarchical path")->check(dtype_check);
    acc_cmd->add_option("--out", af.out, "CSV output path")->required();

    std::optional<double> eps;
    auto* rank_cmd = app.add_subcommand("rankmap", "Numerical rank map of the 16x16 Toeplitz example");
    rank_cmd->add_option("--eps", eps, "Tail-sum tolerance (disables the golden check)")
        ->check(CLI::PositiveNumber);

    bool quick = false;
    std::string sabotage = "none";
    auto* self_cmd = app.add_subcommand("selftest", "Run the invariant suite");
    self_cmd->add_flag("--quick", quick, "Restrict to L <= 64");
    self_cmd->add_option("--sabotage", sabotage, "Inject a fault (skip-correction)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : exit_usage;
    }

    try {
        if (*bench_cmd)
            return run_bench(bf);
        if (*acc_cmd)
            return run_accuracy(af);
        if (*rank_cmd)
            return run_rankmap(eps);
        if (*self_cmd)
            return run_selftest(quick, sabotage);
    } catch (const hattn::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_failure;
    }
    return exit_usage;
}
