#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "saddle/experiment.hpp"
#include "saddle/selftest.hpp"

using namespace saddle;

namespace {

ResultRow sample_row() {
  ResultRow r;
  r.k = 10;
  r.N = 5;
  r.iters = 47;
  r.n_unpivoted = 5;
  r.n_pivoted = 42;
  r.n_plan_updates = 1;
  r.ratio_R = 42;
  r.converged = true;
  r.wall_time_s = 1.25;
  return r;
}

std::string strip_times(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) out << line.substr(0, line.rfind(',')) << '\n';
  return out.str();
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("saddle_ldlt_test_" + name);
}

}  // namespace

TEST(Csv, HeaderIsExact) {
  const std::string csv = format_csv({sample_row()});
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "k,N,iters,n_ldlt,n_pivoted,n_plan_updates,R,converged,wall_time_s");
}

TEST(Csv, SingleRowRoundTrip) {
  const ResultRow r = sample_row();
  std::istringstream in(format_csv({r}));
  const auto rows = parse_csv(in);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0], r);
}

TEST(Csv, MissingRatioIsEmptyField) {
  ResultRow r = sample_row();
  r.n_pivoted = 0;
  r.n_plan_updates = 0;
  r.ratio_R.reset();
  const std::string csv = format_csv({r});
  EXPECT_NE(csv.find(",0,0,,true,"), std::string::npos) << csv;
  std::istringstream in(csv);
  EXPECT_FALSE(parse_csv(in)[0].ratio_R.has_value());
}

TEST(Csv, RejectsWrongHeader) {
  std::istringstream in("k,N\n1,2\n");
  EXPECT_THROW(parse_csv(in), ConfigError);
}

TEST(WriteTable, FileAndErrors) {
  const auto path = temp_path("table.csv");
  write_table({sample_row()}, path);
  std::ifstream in(path);
  EXPECT_EQ(parse_csv(in).size(), 1u);
  std::filesystem::remove(path);
  EXPECT_THROW(write_table({}, path), std::invalid_argument);
  try {
    write_table({sample_row()}, "/nonexistent_dir/x.csv");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent_dir/x.csv"),
              std::string::npos);
  }
}

TEST(TextTable, AlignedColumns) {
  ResultRow r = sample_row();
  ResultRow s = r;
  s.k = 20;
  s.ratio_R.reset();
  const std::string t = format_text_table({r, s});
  std::istringstream in(t);
  std::string line;
  std::size_t width = 0;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    if (lines++ == 0) width = line.size();
    EXPECT_EQ(line.size(), width);
  }
  EXPECT_EQ(lines, 3u);
  EXPECT_NE(t.find(" -  "), std::string::npos);
}

TEST(Config, KeyValueParsing) {
  std::istringstream in(
      "# sweep\n"
      "benchmark = nonlinear\n"
      "k = 10, 20\n"
      "N=5,10,15  # inline comment\n"
      "mode = no_monitor\n"
      "searcher = bk\n"
      "eps1 = 1e-4\n");
  ExperimentConfig cfg;
  apply_config(cfg, parse_key_values(in));
  EXPECT_EQ(cfg.benchmark, Benchmark::Nonlinear);
  EXPECT_EQ(cfg.k_values, (std::vector<std::size_t>{10, 20}));
  EXPECT_EQ(cfg.N_values, (std::vector<std::size_t>{5, 10, 15}));
  EXPECT_EQ(cfg.mode, MonitorMode::NoMonitor);
  EXPECT_EQ(cfg.searcher, PivotSearch::BunchKaufman);
  EXPECT_EQ(cfg.sqp.monitor.eps1, 1e-4);
  EXPECT_FALSE(cfg.sqp_config().reuse_plans);
}

TEST(Config, LaterSourcesOverride) {
  ExperimentConfig cfg;
  apply_config(cfg, {{"k", "20"}, {"N", "10"}});
  apply_config(cfg, {{"k", "30"}});
  EXPECT_EQ(cfg.k_values, (std::vector<std::size_t>{30}));
  EXPECT_EQ(cfg.N_values, (std::vector<std::size_t>{10}));
}

TEST(Config, Errors) {
  ExperimentConfig cfg;
  EXPECT_THROW(apply_config(cfg, {{"colour", "red"}}), ConfigError);
  EXPECT_THROW(apply_config(cfg, {{"k", "ten"}}), ConfigError);
  EXPECT_THROW(apply_config(cfg, {{"N", "-3"}}), ConfigError);
  EXPECT_THROW(apply_config(cfg, {{"mode", "fast"}}), ConfigError);
  std::istringstream bad("no equals sign\n");
  EXPECT_THROW(parse_key_values(bad), ConfigError);
  cfg.k_values = {3};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.k_values = {4};
  cfg.N_values = {0};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(MatrixFile, RoundTripAndUpperEntries) {
  std::istringstream in("3 4\n0 0 2\n1 0 -1\n0 2 0.5\n2 2 4\n");
  const SymmetricDense a = read_matrix(in);
  EXPECT_EQ(a(0, 0), 2.0);
  EXPECT_EQ(a(0, 1), -1.0);
  EXPECT_EQ(a(2, 0), 0.5);
  EXPECT_EQ(a(1, 1), 0.0);
  std::stringstream io;
  write_matrix(io, a);
  EXPECT_EQ(io.str().substr(0, 4), "3 4\n");
  EXPECT_EQ(read_matrix(io).full(), a.full());
}

TEST(MatrixFile, Errors) {
  std::istringstream out_of_range("2 1\n2 0 1\n");
  EXPECT_THROW(read_matrix(out_of_range), ConfigError);
  std::istringstream truncated("2 2\n0 0 1\n");
  EXPECT_THROW(read_matrix(truncated), ConfigError);
  EXPECT_THROW(read_matrix_file("/nonexistent.mtx"), IoError);
}

TEST(Sweep, SingleCellConverges) {
  ExperimentConfig cfg;
  const auto rows = run_sweep(cfg, 1);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].k, 10u);
  EXPECT_EQ(rows[0].N, 5u);
  EXPECT_TRUE(rows[0].converged);
  EXPECT_LE(rows[0].constraint_norm, 1e-6);
}

TEST(Sweep, OrderedAndDeterministicAcrossWorkers) {
  ExperimentConfig cfg;
  cfg.benchmark = Benchmark::Nonlinear;
  cfg.k_values = {6, 4};
  cfg.N_values = {3, 2};
  cfg.sqp.kappa_threshold = 50.0;
  const auto serial = run_sweep(cfg, 1);
  const auto parallel = run_sweep(cfg, 3);
  ASSERT_EQ(serial.size(), 4u);
  EXPECT_EQ(serial[0].k, 4u);
  EXPECT_EQ(serial[0].N, 2u);
  EXPECT_EQ(serial[3].k, 6u);
  EXPECT_EQ(serial[3].N, 3u);
  EXPECT_EQ(strip_times(format_csv(serial)), strip_times(format_csv(parallel)));
}

TEST(Sweep, WorkerCapFromEnvironment) {
  setenv("SADDLE_LDLT_THREADS", "1", 1);
  EXPECT_EQ(worker_count(), 1u);
  setenv("SADDLE_LDLT_THREADS", "junk", 1);
  EXPECT_GE(worker_count(), 1u);
  unsetenv("SADDLE_LDLT_THREADS");
}

TEST(Pattern, DifficultSystemOrdering) {
  SqpConfig cfg;
  cfg.kappa_threshold = 50.0;
  const auto cap = capture_difficult_system(Benchmark::Nonlinear, 4, 6, cfg);
  ASSERT_TRUE(cap.has_value());
  EXPECT_TRUE(cap->record.difficult);
  const SaddleBlocks* sys = &cap->system;
  const SparsityReport r = sparsity_report(*sys);
  ASSERT_TRUE(r.structured_ok);
  EXPECT_LT(r.structured.size(), r.pivoted.size());
  for (const auto& [i, j] : r.structured) EXPECT_LE(j, i);
  for (const auto& [i, j] : r.k) EXPECT_LT(i, sys->order());
}

TEST(Selftest, AllChecksPass) {
  for (const auto& r : run_selftest(0))
    EXPECT_TRUE(r.passed) << r.module << ": " << r.check << " " << r.detail;
}
