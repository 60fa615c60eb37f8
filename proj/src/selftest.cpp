#include "saddle/selftest.hpp"

#include <cfloat>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "saddle/blocksaddle.hpp"
#include "saddle/experiment.hpp"
#include "saddle/factorization.hpp"
#include "saddle/random.hpp"
#include "saddle/shooting.hpp"
#include "saddle/sqp.hpp"

namespace saddle {

namespace {

class Suite {
 public:
  explicit Suite(std::vector<SelftestResult>& out) : out_(out) {}

  void check(const std::string& module, const std::string& name,
             const std::function<std::string()>& body) {
    SelftestResult r{module, name, false, {}};
    try {
      r.detail = body();
      r.passed = r.detail.empty();
    } catch (const std::exception& e) {
      r.detail = std::string("exception: ") + e.what();
    }
    out_.push_back(std::move(r));
  }

 private:
  std::vector<SelftestResult>& out_;
};

std::string fail_if(bool bad, const std::string& what, double value) {
  if (!bad) return {};
  std::ostringstream s;
  s << what << " = " << value;
  return s.str();
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double reconstruction_bound(const SymmetricDense& a, const Factorization& f) {
  const double n = static_cast<double>(a.order());
  return 100.0 * n * DBL_EPSILON * f.stats.max_reduced_entry;
}

// min 1/2 |x|^2 subject to B^T x = r; one Newton step solves it.
class ProjectionNlp final : public StructuredNlp {
 public:
  ProjectionNlp(ConstraintBlocks b, Vector r) : b_(std::move(b)), r_(std::move(r)) {}
  std::size_t segments() const override { return b_.segments; }
  std::size_t dim() const override { return b_.dim; }
  Vector initial_point() const override { return Vector(b_.primal_size(), 1.0); }
  double objective(std::span<const double> x) const override {
    return 0.5 * dot(x, x);
  }
  Vector objective_gradient(std::span<const double> x) const override {
    return Vector(x.begin(), x.end());
  }
  ConstraintEval evaluate(std::span<const double> x) const override {
    ConstraintEval e{multiply_bt(b_, x), b_};
    for (std::size_t i = 0; i < r_.size(); ++i) e.c[i] -= r_[i];
    return e;
  }

 private:
  ConstraintBlocks b_;
  Vector r_;
};

}  // namespace

std::vector<SelftestResult> run_selftest(std::uint64_t seed) {
  std::vector<SelftestResult> out;
  Suite suite(out);

  suite.check("dense", "permutation round trip", [&] {
    std::mt19937_64 rng(seed);
    const Permutation p = random::permutation(17, rng);
    const Vector x = random::vector(17, rng);
    if (p.unpermute(p.permute(x)) != x) return std::string("unpermute(permute(x)) != x");
    if (!compose(p, p.inverse()).is_identity()) return std::string("p p^-1 != I");
    return std::string();
  });

  suite.check("factorization", "reconstruction", [&] {
    std::mt19937_64 rng(seed + 1);
    for (std::size_t trial = 0; trial < 40; ++trial) {
      const std::size_t n = 2 + trial % 20;
      const SymmetricDense a = random::symmetric(n, rng);
      for (const Factorization& f :
           {factor_bunch_parlett(a), factor_bunch_kaufman(a)}) {
        const double err = reconstruction_error(a, f.factors);
        if (err > reconstruction_bound(a, f))
          return fail_if(true, "reconstruction error", err);
      }
    }
    return std::string();
  });

  suite.check("factorization", "growth bounds", [&] {
    std::mt19937_64 rng(seed + 2);
    MonitorConfig cfg;
    for (std::size_t trial = 0; trial < 20; ++trial) {
      const SymmetricDense a = random::symmetric(12, rng);
      const Factorization f = factor_bunch_parlett(a);
      if (!check_bunch_parlett_bounds(f.trace, a.order()))
        return std::string("Bunch-Parlett element bound violated");
      const MonitoredOutcome m =
          factor_with_plan(a, f.factors.plan, cfg, PivotSearch::BunchParlett);
      for (const auto& step : m.trace)
        if (!step.searched && !check_growth_bounds(step, cfg))
          return std::string("monitored growth bound violated");
    }
    return std::string();
  });

  suite.check("factorization", "total rejection equals fresh search", [&] {
    std::mt19937_64 rng(seed + 3);
    const SymmetricDense a = random::symmetric(15, rng);
    const SymmetricDense b = random::symmetric(15, rng);
    MonitorConfig cfg;
    cfg.eps1 = 1e300;
    const MonitoredOutcome m =
        factor_with_plan(b, factor_bunch_parlett(a).factors.plan, cfg,
                         PivotSearch::BunchParlett);
    const Factorization f = factor_bunch_parlett(b);
    if (!(m.factors.plan == f.factors.plan)) return std::string("plans differ");
    if (!(m.factors.lower == f.factors.lower)) return std::string("factors differ");
    return std::string();
  });

  suite.check("blocksaddle", "structured matches dense", [&] {
    std::mt19937_64 rng(seed + 4);
    for (std::size_t N = 1; N <= 5; ++N) {
      const SaddleBlocks s = random::saddle_blocks(N, 3, rng);
      const Vector d = factor_structured(s).diagonal();
      const Factorization f = factor_unpivoted(assemble_dense(s));
      for (std::size_t i = 0; i < d.size(); ++i) {
        const double ref = f.factors.dblocks[i].a;
        if (std::abs(d[i] - ref) > 1e-9 * std::max(1.0, std::abs(ref)))
          return fail_if(true, "D mismatch", std::abs(d[i] - ref));
        const bool primal = i < s.primal_size();
        if ((d[i] > 0.0) != primal) return std::string("wrong inertia");
      }
    }
    return std::string();
  });

  suite.check("blocksaddle", "structured solve residual", [&] {
    std::mt19937_64 rng(seed + 5);
    const SaddleBlocks s = random::saddle_blocks(6, 4, rng);
    const SymmetricDense K = assemble_dense(s);
    const Vector b = random::vector(K.order(), rng);
    const Vector u = solve_structured(factor_structured(s), b);
    const Vector r = multiply(K.full(), u);
    return fail_if(max_abs_diff(r, b) > 1e-8 * (1.0 + norm_inf(b)),
                   "residual", max_abs_diff(r, b));
  });

  suite.check("shooting", "Jacobian vs differences", [&] {
    for (Benchmark bm : {Benchmark::Linear, Benchmark::Nonlinear}) {
      const std::size_t k = 4;
      const ReachSpec spec = ReachSpec::defaults(k);
      const VectorField f = make_field(bm, k);
      const ShootingState s = initial_state(spec, f, 3);
      const Matrix fd = finite_difference_jacobian(s, f, spec);
      const Matrix an = jacobian_matrix(constraint_jacobian(s, f, spec));
      const double err = max_abs_diff(fd.data(), an.data());
      if (err > 1e-5) return fail_if(true, "Jacobian error", err);
    }
    return std::string();
  });

  suite.check("shooting", "linear flow preserves norm", [&] {
    const VectorField f = linear_field(6);
    const Vector x{1.0, 2.0, -1.0, 0.5, 0.0, 3.0};
    const Vector y = flow(f, x, 0.73);
    return fail_if(std::abs(norm2(y) - norm2(x)) > 1e-9, "norm drift",
                   std::abs(norm2(y) - norm2(x)));
  });

  suite.check("sqp", "projection converges unpivoted", [&] {
    std::mt19937_64 rng(seed + 6);
    const ConstraintBlocks b = random::saddle_blocks(3, 2, rng).B;
    const ProjectionNlp nlp(b, random::vector(b.dual_size(), rng));
    const SqpResult r = run_sqp(nlp, SqpConfig{});
    if (!r.stats.converged) return std::string("did not converge");
    if (r.stats.n_pivoted != 0) return std::string("pivoted on a QP");
    return fail_if(r.stats.iters > 5, "iterations", static_cast<double>(r.stats.iters));
  });

  suite.check("sqp", "switch is sticky", [&] {
    const ReachSpec spec = ReachSpec::defaults(4);
    const VectorField f = make_field(Benchmark::Nonlinear, 4);
    const ShootingNlp nlp(f, spec, initial_state(spec, f, 3));
    SqpConfig cfg;
    cfg.kappa_threshold = 50.0;
    const SqpResult r = run_sqp(nlp, cfg);
    bool difficult = false;
    for (const auto& rec : r.history) {
      if (difficult && !rec.pivoted) return std::string("unpivoted after switch");
      if (rec.difficult) difficult = true;
      if (rec.restart) difficult = false;
    }
    if (r.stats.n_plan_updates > r.stats.n_pivoted)
      return std::string("more plan updates than pivoted solves");
    return std::string();
  });

  suite.check("cli", "CSV round trip", [&] {
    ResultRow a;
    a.k = 10;
    a.N = 5;
    a.iters = 47;
    a.n_unpivoted = 5;
    a.n_pivoted = 42;
    a.n_plan_updates = 1;
    a.ratio_R = 42;
    a.converged = true;
    ResultRow b = a;
    b.ratio_R.reset();
    std::istringstream in(format_csv({a, b}));
    const auto rows = parse_csv(in);
    if (rows.size() != 2 || rows[0] != a || rows[1] != b)
      return std::string("rows differ after round trip");
    return std::string();
  });

  suite.check("cli", "matrix file round trip", [&] {
    std::mt19937_64 rng(seed + 7);
    const SymmetricDense a = random::symmetric(7, rng);
    std::stringstream io;
    write_matrix(io, a);
    const SymmetricDense b = read_matrix(io);
    if (!(a.full() == b.full())) return std::string("matrix differs");
    return std::string();
  });

  return out;
}

}  // namespace saddle
