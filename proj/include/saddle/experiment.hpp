#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "saddle/blocksaddle.hpp"
#include "saddle/factorization.hpp"
#include "saddle/shooting.hpp"
#include "saddle/sqp.hpp"

namespace saddle {

/// Bad configuration value or key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// I/O failure; the message carries the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MonitorMode { NoMonitor, Monitor };

const char* to_string(MonitorMode m);
MonitorMode parse_mode(const std::string& s);
PivotSearch parse_searcher(const std::string& s);

struct ExperimentConfig {
  Benchmark benchmark = Benchmark::Linear;
  std::vector<std::size_t> k_values{10};
  std::vector<std::size_t> N_values{5};
  MonitorMode mode = MonitorMode::Monitor;
  PivotSearch searcher = PivotSearch::BunchParlett;
  std::uint64_t seed = 0;
  SqpConfig sqp;
  std::string output;  // CSV path; empty for none

  void validate() const;
  /// SQP settings with the mode and searcher folded in.
  SqpConfig sqp_config() const;
};

/// Flat "key = value" text; '#' starts a comment.
std::map<std::string, std::string> parse_key_values(std::istream& in);
std::map<std::string, std::string> read_key_values(
    const std::filesystem::path& path);

/// Applies recognised keys; unknown keys throw ConfigError.
void apply_config(ExperimentConfig& cfg,
                  const std::map<std::string, std::string>& kv);

/// "10,20,30" -> {10, 20, 30}.
std::vector<std::size_t> parse_size_list(const std::string& s);

struct ResultRow {
  std::size_t k = 0;
  std::size_t N = 0;
  std::size_t iters = 0;
  std::size_t n_unpivoted = 0;
  std::size_t n_pivoted = 0;
  std::size_t n_plan_updates = 0;
  std::optional<std::size_t> ratio_R;
  bool converged = false;
  double wall_time_s = 0.0;
  double constraint_norm = 0.0;  // not written to the CSV

  bool operator==(const ResultRow&) const = default;
};

ResultRow make_row(std::size_t k, std::size_t N, const RunStats& s,
                   double wall_time_s);

/// Runs one (k, N) cell of the sweep.
ResultRow run_cell(const ExperimentConfig& cfg, std::size_t k, std::size_t N);

/// Worker count: hardware concurrency, capped by SADDLE_LDLT_THREADS.
std::size_t worker_count();

/// All cells, ordered by (k, N) regardless of completion order.
std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg,
                                 std::size_t workers = worker_count());

inline constexpr const char* kCsvHeader =
    "k,N,iters,n_ldlt,n_pivoted,n_plan_updates,R,converged,wall_time_s";

std::string format_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_csv(std::istream& in);
std::string format_text_table(const std::vector<ResultRow>& rows);
void write_table(const std::vector<ResultRow>& rows,
                 const std::filesystem::path& path);

/// Coordinate text: "n nnz" then one "i j value" line per stored entry of
/// the lower triangle, 0-based.
SymmetricDense read_matrix(std::istream& in);
SymmetricDense read_matrix_file(const std::filesystem::path& path);
void write_matrix(std::ostream& out, const SymmetricDense& a);

using Coordinates = std::vector<std::pair<std::size_t, std::size_t>>;

/// Nonzero positions of a full matrix, row major.
Coordinates nonzero_pattern(const Matrix& a);

struct SparsityReport {
  Coordinates k;           // full K
  Coordinates structured;  // lower L of the structured factorization
  Coordinates pivoted;     // lower L of the Bunch-Parlett factorization
  bool structured_ok = true;
};

SparsityReport sparsity_report(const SaddleBlocks& k);

struct CapturedSystem {
  SaddleBlocks system;
  IterationRecord record;  // record.difficult tells whether the switch fired
  std::size_t solve_index = 0;  // 0-based count of KKT solves before this one
};

/// KKT system at the first difficult iteration of a shooting run, or the
/// last system solved if the run never went difficult.
std::optional<CapturedSystem> capture_difficult_system(
    Benchmark b, std::size_t k, std::size_t N, const SqpConfig& cfg = {});

void write_coordinates(std::ostream& out, const Coordinates& c);

}  // namespace saddle
