#include "saddle/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace saddle {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::size_t parse_size(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    if (t.empty() || t[0] == '-') throw std::invalid_argument(t);
    v = std::stoull(t, &pos);
  } catch (const std::exception&) {
    throw ConfigError(what + ": not a non-negative integer: '" + s + "'");
  }
  if (pos != t.size())
    throw ConfigError(what + ": not a non-negative integer: '" + s + "'");
  return static_cast<std::size_t>(v);
}

double parse_double(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &pos);
  } catch (const std::exception&) {
    throw ConfigError(what + ": not a number: '" + s + "'");
  }
  if (pos != t.size()) throw ConfigError(what + ": not a number: '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(what + ": not a boolean: '" + s + "'");
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

const char* to_string(MonitorMode m) {
  return m == MonitorMode::Monitor ? "monitor" : "no_monitor";
}

MonitorMode parse_mode(const std::string& s) {
  if (s == "monitor") return MonitorMode::Monitor;
  if (s == "no_monitor" || s == "no-monitor") return MonitorMode::NoMonitor;
  throw ConfigError("unknown mode '" + s + "' (monitor, no_monitor)");
}

PivotSearch parse_searcher(const std::string& s) {
  if (s == "bp" || s == "BP") return PivotSearch::BunchParlett;
  if (s == "bk" || s == "BK") return PivotSearch::BunchKaufman;
  throw ConfigError("unknown searcher '" + s + "' (bp, bk)");
}

void ExperimentConfig::validate() const {
  if (k_values.empty() || N_values.empty())
    throw ConfigError("k and N lists must be nonempty");
  for (std::size_t k : k_values)
    if (k == 0 || k % 2 != 0)
      throw ConfigError("k must be even and positive, got " + std::to_string(k));
  for (std::size_t N : N_values)
    if (N == 0) throw ConfigError("N must be at least 1");
  try {
    sqp.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

SqpConfig ExperimentConfig::sqp_config() const {
  SqpConfig c = sqp;
  c.reuse_plans = mode == MonitorMode::Monitor;
  c.searcher = searcher;
  return c;
}

std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> read_key_values(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  try {
    return parse_key_values(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& part : split(s, ',')) out.push_back(parse_size(part, "list"));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

void apply_config(ExperimentConfig& cfg,
                  const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "benchmark") {
      try {
        cfg.benchmark = parse_benchmark(value);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "k") {
      cfg.k_values = parse_size_list(value);
    } else if (key == "N") {
      cfg.N_values = parse_size_list(value);
    } else if (key == "mode") {
      cfg.mode = parse_mode(value);
    } else if (key == "searcher") {
      cfg.searcher = parse_searcher(value);
    } else if (key == "seed") {
      cfg.seed = parse_size(value, key);
    } else if (key == "output") {
      cfg.output = value;
    } else if (key == "max_iters") {
      cfg.sqp.max_iters = parse_size(value, key);
    } else if (key == "grad_tol") {
      cfg.sqp.grad_tol = parse_double(value, key);
    } else if (key == "constraint_tol") {
      cfg.sqp.constraint_tol = parse_double(value, key);
    } else if (key == "min_step") {
      cfg.sqp.min_step = parse_double(value, key);
    } else if (key == "kappa_threshold") {
      cfg.sqp.kappa_threshold = parse_double(value, key);
    } else if (key == "eps1") {
      cfg.sqp.monitor.eps1 = parse_double(value, key);
    } else if (key == "eps2") {
      cfg.sqp.monitor.eps2 = parse_double(value, key);
    } else if (key == "reuse_plans") {
      cfg.sqp.reuse_plans = parse_bool(value, key);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

ResultRow make_row(std::size_t k, std::size_t N, const RunStats& s,
                   double wall_time_s) {
  ResultRow r;
  r.k = k;
  r.N = N;
  r.iters = s.iters;
  r.n_unpivoted = s.n_unpivoted;
  r.n_pivoted = s.n_pivoted;
  r.n_plan_updates = s.n_plan_updates;
  r.ratio_R = s.ratio_R;
  r.converged = s.converged;
  r.wall_time_s = wall_time_s;
  r.constraint_norm = s.final_constraint_norm;
  return r;
}

ResultRow run_cell(const ExperimentConfig& cfg, std::size_t k, std::size_t N) {
  const auto t0 = std::chrono::steady_clock::now();
  const ReachSpec spec = ReachSpec::defaults(k);
  const VectorField field = make_field(cfg.benchmark, k);
  const ShootingNlp nlp(field, spec, initial_state(spec, field, N));
  const SqpResult r = run_sqp(nlp, cfg.sqp_config());
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  return make_row(k, N, r.stats, dt.count());
}

std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SADDLE_LDLT_THREADS")) {
    try {
      const std::size_t cap = parse_size(env, "SADDLE_LDLT_THREADS");
      if (cap > 0) n = std::min(n, cap);
    } catch (const ConfigError&) {
      // ignore malformed values
    }
  }
  return n;
}

std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg,
                                 std::size_t workers) {
  cfg.validate();
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t k : cfg.k_values)
    for (std::size_t N : cfg.N_values) cells.emplace_back(k, N);
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());

  std::vector<ResultRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        rows[i] = run_cell(cfg, cells[i].first, cells[i].second);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, cells.size()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return rows;
}

std::string format_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.k << ',' << r.N << ',' << r.iters << ',' << r.n_unpivoted << ','
        << r.n_pivoted << ',' << r.n_plan_updates << ',';
    if (r.ratio_R) out << *r.ratio_R;
    out << ',' << (r.converged ? "true" : "false") << ','
        << fixed(r.wall_time_s, 3) << '\n';
  }
  return out.str();
}

std::vector<ResultRow> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader)
    throw ConfigError("missing or wrong CSV header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 9)
      throw ConfigError("expected 9 fields, got " + std::to_string(f.size()));
    ResultRow r;
    r.k = parse_size(f[0], "k");
    r.N = parse_size(f[1], "N");
    r.iters = parse_size(f[2], "iters");
    r.n_unpivoted = parse_size(f[3], "n_ldlt");
    r.n_pivoted = parse_size(f[4], "n_pivoted");
    r.n_plan_updates = parse_size(f[5], "n_plan_updates");
    if (!trim(f[6]).empty()) r.ratio_R = parse_size(f[6], "R");
    r.converged = parse_bool(f[7], "converged");
    r.wall_time_s = parse_double(f[8], "wall_time_s");
    rows.push_back(r);
  }
  return rows;
}

std::string format_text_table(const std::vector<ResultRow>& rows) {
  const std::vector<std::string> head{"k",    "N",    "#IT", "#LDLT", "#PLDLT",
                                      "#upd", "R",    "conv", "time[s]"};
  std::vector<std::vector<std::string>> cells{head};
  for (const auto& r : rows)
    cells.push_back({std::to_string(r.k), std::to_string(r.N),
                     std::to_string(r.iters), std::to_string(r.n_unpivoted),
                     std::to_string(r.n_pivoted),
                     std::to_string(r.n_plan_updates),
                     r.ratio_R ? std::to_string(*r.ratio_R) : "-",
                     r.converged ? "yes" : "no", fixed(r.wall_time_s, 2)});
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : cells)
    for (std::size_t j = 0; j < row.size(); ++j)
      width[j] = std::max(width[j], row[j].size());
  std::ostringstream out;
  for (const auto& row : cells) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << "  ";
      out << std::string(width[j] - row[j].size(), ' ') << row[j];
    }
    out << '\n';
  }
  return out.str();
}

void write_table(const std::vector<ResultRow>& rows,
                 const std::filesystem::path& path) {
  if (rows.empty()) throw std::invalid_argument("no rows to write");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << format_csv(rows);
  out.close();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

SymmetricDense read_matrix(std::istream& in) {
  std::size_t n = 0, nnz = 0;
  if (!(in >> n >> nnz)) throw ConfigError("matrix header must be 'n nnz'");
  if (n == 0) throw ConfigError("matrix order must be positive");
  SymmetricDense a(n);
  for (std::size_t e = 0; e < nnz; ++e) {
    std::size_t i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v))
      throw ConfigError("matrix entry " + std::to_string(e + 1) + " unreadable");
    if (i >= n || j >= n)
      throw ConfigError("matrix entry " + std::to_string(e + 1) + " out of range");
    if (j > i) std::swap(i, j);
    a.set(i, j, v);
  }
  return a;
}

SymmetricDense read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open matrix file " + path.string());
  try {
    return read_matrix(in);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_matrix(std::ostream& out, const SymmetricDense& a) {
  const std::size_t n = a.order();
  std::size_t nnz = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      if (a(i, j) != 0.0) ++nnz;
  out << n << ' ' << nnz << '\n';
  char buf[64];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      if (a(i, j) != 0.0) {
        std::snprintf(buf, sizeof buf, "%.17g", a(i, j));
        out << i << ' ' << j << ' ' << buf << '\n';
      }
}

Coordinates nonzero_pattern(const Matrix& a) {
  Coordinates out;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0) out.emplace_back(i, j);
  return out;
}

SparsityReport sparsity_report(const SaddleBlocks& k) {
  SparsityReport r;
  const SymmetricDense K = assemble_dense(k);
  r.k = nonzero_pattern(K.full());
  try {
    r.structured = nonzero_pattern(factor_structured(k).assemble_lower());
  } catch (const NotPositiveDefinite&) {
    r.structured_ok = false;
  } catch (const IndefiniteSchur&) {
    r.structured_ok = false;
  }
  r.pivoted = nonzero_pattern(factor_bunch_parlett(K).factors.lower);
  return r;
}

std::optional<CapturedSystem> capture_difficult_system(Benchmark b,
                                                       std::size_t k,
                                                       std::size_t N,
                                                       const SqpConfig& cfg) {
  struct Captured {};
  std::optional<CapturedSystem> last;
  const ReachSpec spec = ReachSpec::defaults(k);
  const VectorField field = make_field(b, k);
  const ShootingNlp nlp(field, spec, initial_state(spec, field, N));
  std::size_t solves = 0;
  try {
    run_sqp(nlp, cfg, [&](const IterationRecord& rec, const SaddleBlocks& K) {
      last = CapturedSystem{K, rec, solves++};
      if (rec.difficult) throw Captured{};
    });
  } catch (const Captured&) {
  }
  return last;
}

void write_coordinates(std::ostream& out, const Coordinates& c) {
  out << "i j\n";
  for (const auto& [i, j] : c) out << i << ' ' << j << '\n';
}

}  // namespace saddle
