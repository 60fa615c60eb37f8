// saddle-ldlt: benchmark sweeps, single factorizations, sparsity dumps and
// the self test.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "saddle/experiment.hpp"
#include "saddle/selftest.hpp"

namespace {

using namespace saddle;

constexpr int kExitBadFlags = 2;
constexpr int kExitFailure = 1;

struct BenchFlags {
  std::string config;
  std::string benchmark;
  std::string k, N;
  std::string mode, searcher;
  std::uint64_t seed = 0;
  std::size_t max_iters = 0;
  double kappa = 0.0, eps1 = 0.0, eps2 = 0.0;
  std::string output;
  bool quiet = false;
};

int run_bench(const BenchFlags& fl, CLI::App& cmd) {
  ExperimentConfig cfg;
  if (!fl.config.empty()) apply_config(cfg, read_key_values(fl.config));

  std::map<std::string, std::string> kv;
  auto given = [&](const char* flag) { return cmd.count(flag) > 0; };
  if (given("--benchmark")) kv["benchmark"] = fl.benchmark;
  if (given("--k")) kv["k"] = fl.k;
  if (given("--N")) kv["N"] = fl.N;
  if (given("--mode")) kv["mode"] = fl.mode;
  if (given("--searcher")) kv["searcher"] = fl.searcher;
  if (given("--seed")) kv["seed"] = std::to_string(fl.seed);
  if (given("--max-iters")) kv["max_iters"] = std::to_string(fl.max_iters);
  if (given("--output")) kv["output"] = fl.output;
  apply_config(cfg, kv);
  // Doubles bypass the text round trip to keep every bit.
  if (given("--kappa-threshold")) cfg.sqp.kappa_threshold = fl.kappa;
  if (given("--eps1")) cfg.sqp.monitor.eps1 = fl.eps1;
  if (given("--eps2")) cfg.sqp.monitor.eps2 = fl.eps2;
  cfg.validate();

  const auto rows = run_sweep(cfg);
  if (!cfg.output.empty()) write_table(rows, cfg.output);
  if (!fl.quiet) {
    std::cout << "benchmark " << to_string(cfg.benchmark) << ", mode "
              << to_string(cfg.mode) << ", searcher "
              << to_string(cfg.searcher) << "\n";
    std::cout << format_text_table(rows);
  }
  if (cfg.output.empty() && fl.quiet) std::cout << format_csv(rows);
  return 0;
}

int run_factor(const std::string& in, const std::string& method,
               const std::string& plan_from, double eps1, double eps2) {
  const SymmetricDense a = read_matrix_file(in);
  std::cout << "order " << a.order() << "\n";
  Factorization f;
  std::size_t researched = 0;
  bool monitored = false;
  if (method == "ldlt") {
    f = factor_unpivoted(a);
  } else if (method == "bp") {
    f = factor_bunch_parlett(a);
  } else if (method == "bk") {
    f = factor_bunch_kaufman(a);
  } else {
    const SymmetricDense src = plan_from.empty() ? a : read_matrix_file(plan_from);
    const PivotPlan plan = factor_bunch_parlett(src).factors.plan;
    MonitorConfig mc;
    mc.eps1 = eps1;
    mc.eps2 = eps2;
    MonitoredOutcome m = factor_with_plan(a, plan, mc, PivotSearch::BunchParlett);
    f.factors = std::move(m.factors);
    f.stats = m.stats;
    f.trace = std::move(m.trace);
    researched = m.steps_researched;
    monitored = true;
  }
  std::size_t ones = 0, twos = 0;
  for (const auto& d : f.factors.dblocks) (d.size == 1 ? ones : twos)++;
  std::size_t nnz = 0;
  for (double v : f.factors.lower.data())
    if (v != 0.0) ++nnz;
  std::cout << "method " << method << "\n"
            << "pivots_1x1 " << ones << "\n"
            << "pivots_2x2 " << twos << "\n"
            << "comparisons " << f.stats.comparisons << "\n"
            << "searches " << f.stats.searches << "\n"
            << "max_reduced_entry " << f.stats.max_reduced_entry << "\n"
            << "max_multiplier " << f.stats.max_multiplier << "\n"
            << "nnz_L " << nnz << "\n"
            << "reconstruction_error " << reconstruction_error(a, f.factors)
            << "\n";
  if (monitored) std::cout << "steps_researched " << researched << "\n";
  std::cout << "perm";
  for (std::size_t p : f.factors.plan.perm.forward()) std::cout << ' ' << p;
  std::cout << "\n";
  return 0;
}

int run_pattern(const std::string& benchmark, std::size_t k, std::size_t N,
                const std::string& out_dir) {
  if (k == 0 || k % 2 != 0) throw ConfigError("k must be even and positive");
  if (N == 0) throw ConfigError("N must be at least 1");
  const Benchmark b = parse_benchmark(benchmark);
  const auto cap = capture_difficult_system(b, k, N);
  if (!cap) throw std::runtime_error("the SQP run produced no KKT system");
  const SparsityReport r = sparsity_report(cap->system);
  std::cout << "solve " << cap->solve_index
            << (cap->record.difficult ? " (difficult)" : " (last, never difficult)")
            << "\n"
            << "order " << cap->system.order() << "\n"
            << "nnz_K " << r.k.size() << "\n";
  if (r.structured_ok)
    std::cout << "nnz_L_structured " << r.structured.size() << "\n";
  else
    std::cout << "nnz_L_structured unavailable (structured factorization failed)\n";
  std::cout << "nnz_L_pivoted " << r.pivoted.size() << "\n";
  if (!out_dir.empty()) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    auto dump = [&](const char* name, const Coordinates& c) {
      const auto path = dir / name;
      std::ofstream out(path);
      if (!out) throw IoError("cannot open " + path.string() + " for writing");
      write_coordinates(out, c);
      std::cout << "wrote " << path.string() << "\n";
    };
    dump("K.txt", r.k);
    if (r.structured_ok) dump("L_structured.txt", r.structured);
    dump("L_pivoted.txt", r.pivoted);
  }
  return 0;
}

int run_selftest_cmd(std::uint64_t seed) {
  const auto results = run_selftest(seed);
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.module << ": " << r.check;
    if (!r.passed) std::cout << " (" << r.detail << ")";
    std::cout << "\n";
    ok = ok && r.passed;
  }
  std::cout << (ok ? "all checks passed" : "some checks failed") << "\n";
  return ok ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saddle-point LDL^T factorizations with pivot reuse"};
  app.require_subcommand(1);

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "run an SQP benchmark sweep");
  bench->add_option("--config", bf.config, "flat key = value config file")
      ->check(CLI::ExistingFile);
  bench->add_option("--benchmark", bf.benchmark, "linear or nonlinear")
      ->check(CLI::IsMember({"linear", "nonlinear"}));
  bench->add_option("--k", bf.k, "comma separated state dimensions (even)");
  bench->add_option("--N", bf.N, "comma separated segment counts");
  bench->add_option("--mode", bf.mode, "monitor or no_monitor")
      ->check(CLI::IsMember({"monitor", "no_monitor"}));
  bench->add_option("--searcher", bf.searcher, "bp or bk")
      ->check(CLI::IsMember({"bp", "bk"}));
  bench->add_option("--seed", bf.seed, "random seed");
  bench->add_option("--max-iters", bf.max_iters, "SQP iteration cap")
      ->check(CLI::PositiveNumber);
  bench->add_option("--kappa-threshold", bf.kappa, "switch threshold on kappa(H)")
      ->check(CLI::PositiveNumber);
  bench->add_option("--eps1", bf.eps1, "monitor pivot threshold")
      ->check(CLI::PositiveNumber);
  bench->add_option("--eps2", bf.eps2, "monitor growth threshold")
      ->check(CLI::PositiveNumber);
  bench->add_option("--output", bf.output, "CSV output path");
  bench->add_flag("--csv", bf.quiet, "print CSV instead of the text table");

  std::string in, method = "bp", plan_from;
  double eps1 = 1e-3, eps2 = 1e6;
  auto* factor = app.add_subcommand("factor", "factor a matrix file");
  factor->add_option("--in", in, "coordinate file: 'n nnz' then 'i j value'")
      ->required()
      ->check(CLI::ExistingFile);
  factor->add_option("--method", method, "ldlt, bp, bk or monitor")
      ->check(CLI::IsMember({"ldlt", "bp", "bk", "monitor"}));
  factor->add_option("--plan-from", plan_from,
                     "matrix whose Bunch-Parlett plan is reused (monitor)")
      ->check(CLI::ExistingFile);
  factor->add_option("--eps1", eps1)->check(CLI::PositiveNumber);
  factor->add_option("--eps2", eps2)->check(CLI::PositiveNumber);

  std::string pbench = "linear", out_dir;
  std::size_t pk = 10, pN = 25;
  auto* pattern = app.add_subcommand(
      "pattern", "sparsity of K and its factors at a difficult iteration");
  pattern->add_option("--benchmark", pbench)
      ->check(CLI::IsMember({"linear", "nonlinear"}));
  pattern->add_option("--k", pk);
  pattern->add_option("--N", pN);
  pattern->add_option("--out-dir", out_dir, "write coordinate lists here");

  std::uint64_t st_seed = 0;
  auto* selftest = app.add_subcommand("selftest", "run the invariant checks");
  selftest->add_option("--seed", st_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitBadFlags;
  }

  try {
    if (*bench) return run_bench(bf, *bench);
    if (*factor) return run_factor(in, method, plan_from, eps1, eps2);
    if (*pattern) return run_pattern(pbench, pk, pN, out_dir);
    if (*selftest) return run_selftest_cmd(st_seed);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadFlags;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
