#include <gtest/gtest.h>

#include <sstream>

#include "hattn/accuracy.hpp"
#include "hattn/bench.hpp"
#include "hattn/oracle.hpp"

using namespace hattn;

TEST(LogLogSlope, KnownPowerLaws) {
    EXPECT_NEAR(bench::loglog_slope({1, 2, 4, 8}, {3, 6, 12, 24}), 1.0, 1e-12);
    EXPECT_NEAR(bench::loglog_slope({1, 2, 4, 8}, {1, 4, 16, 64}), 2.0, 1e-12);
    EXPECT_NEAR(bench::loglog_slope({10, 100}, {5, 5}), 0.0, 1e-12);
    EXPECT_THROW(bench::loglog_slope({1}, {1}), InvalidArgument);
    EXPECT_THROW(bench::loglog_slope({1, 2}, {1}), InvalidArgument);
}

TEST(FormatReal, NineSignificantDigits) {
    EXPECT_EQ(bench::format_real(1.0 / 3.0), "0.333333333");
    EXPECT_EQ(bench::format_real(1e-12), "1e-12");
    EXPECT_EQ(bench::format_real(2.5), "2.5");
}

TEST(DenseBaseline, MatchesOracle) {
    const auto q = gaussian_matrix<double>(40, 6, 1);
    const auto k = gaussian_matrix<double>(40, 6, 2);
    const auto v = gaussian_matrix<double>(40, 3, 3);
    EXPECT_LT(relative_frobenius_distance(bench::dense_softmax_attention(q, k, v), oracle::dense_attention(q, k, v)),
              1e-14);
}

TEST(RunBench, OneRowPerLengthWithSchema) {
    bench::BenchConfig cfg;
    cfg.rank = 4;
    cfg.dim = 8;
    cfg.lengths = {32, 64, 128};
    cfg.reps = 1;
    cfg.compare_dense = true;
    const auto rec = bench::run_bench(cfg);
    ASSERT_EQ(rec.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(rec[i].seq_len, cfg.lengths[i]);
        EXPECT_FALSE(rec[i].padded());
        EXPECT_TRUE(rec[i].seconds_dense.has_value());
        EXPECT_GT(rec[i].seconds_hier, 0.0);
        EXPECT_EQ(rec[i].stored_entries, stored_entry_count(derive_params(cfg.lengths[i], 8, 4, Mode::banded)));
    }
    std::ostringstream os;
    bench::write_csv(os, rec);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, bench::csv_header);
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 12);
        EXPECT_EQ(line.rfind("banded,", 0), 0u);
    }
    EXPECT_EQ(rows, 3);
}

TEST(RunBench, InvalidLengthWithoutPadding) {
    bench::BenchConfig cfg;
    cfg.rank = 4;
    cfg.dim = 4;
    cfg.lengths = {48};
    cfg.reps = 1;
    EXPECT_THROW(bench::run_bench(cfg), InvalidLength);
}

TEST(RunBench, PaddingRoundsUp) {
    bench::BenchConfig cfg;
    cfg.rank = 4;
    cfg.dim = 4;
    cfg.lengths = {48, 5};
    cfg.reps = 1;
    cfg.pad = true;
    const auto rec = bench::run_bench(cfg);
    EXPECT_EQ(rec[0].seq_len, 64u);
    EXPECT_EQ(rec[0].requested_len, 48u);
    EXPECT_TRUE(rec[0].padded());
    EXPECT_EQ(rec[1].seq_len, 8u);
    std::ostringstream os;
    bench::write_csv(os, rec);
    EXPECT_NE(os.str().find("banded,64,48,1,"), std::string::npos);
}

TEST(RunBench, DenseTimingSkippedAboveCap) {
    bench::BenchConfig cfg;
    cfg.rank = 4;
    cfg.dim = 4;
    cfg.lengths = {64};
    cfg.reps = 1;
    cfg.compare_dense = true;
    cfg.dense_cap = 32;
    EXPECT_FALSE(bench::run_bench(cfg)[0].seconds_dense.has_value());
}

TEST(Accuracy, SmoothInputsImproveWithRank) {
    accuracy::AccuracyConfig cfg;
    cfg.input = accuracy::InputKind::smooth;
    for (Mode mode : {Mode::hodlr, Mode::banded}) {
        cfg.mode = mode;
        const auto rec = accuracy::run_accuracy(cfg);
        ASSERT_EQ(rec.size(), 4u);
        for (std::size_t i = 1; i < rec.size(); ++i)
            EXPECT_LT(rec[i].rel_fro_error_a, rec[i - 1].rel_fro_error_a);
    }
}

TEST(Accuracy, OnesValuesAreExact) {
    accuracy::AccuracyConfig cfg;
    cfg.length = 64;
    cfg.dim = 4;
    cfg.ranks = {2, 4};
    cfg.values = accuracy::ValueKind::ones;
    for (const auto& r : accuracy::run_accuracy(cfg))
        EXPECT_LT(r.rel_fro_error_z, 1e-12);
}

TEST(Accuracy, CsvLayout) {
    accuracy::AccuracyConfig cfg;
    cfg.length = 32;
    cfg.dim = 4;
    cfg.ranks = {2};
    std::ostringstream os;
    accuracy::write_csv(os, accuracy::run_accuracy(cfg));
    EXPECT_EQ(os.str().rfind(std::string(accuracy::csv_header) + "\nbanded,32,4,2,", 0), 0u);
}
