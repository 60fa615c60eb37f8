#include "saddle/sqp.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>

namespace saddle {

std::vector<Matrix> StructuredNlp::initial_hessian() const {
  return std::vector<Matrix>(segments(), Matrix::identity(dim() + 1));
}

ShootingNlp::ShootingNlp(VectorField field, ReachSpec spec,
                         ShootingState start)
    : field_(std::move(field)), spec_(std::move(spec)), start_(std::move(start)) {
  spec_.validate();
  start_.validate();
  if (start_.dim() != field_.dim() || spec_.init_center.size() != field_.dim())
    throw DimensionMismatch("state, field and spec dimensions differ");
}

ShootingState ShootingNlp::unpack(std::span<const double> x) const {
  return ShootingState::unpack(x, segments(), dim());
}

double ShootingNlp::objective(std::span<const double> x) const {
  return saddle::objective(unpack(x));
}

Vector ShootingNlp::objective_gradient(std::span<const double> x) const {
  return saddle::objective_gradient(unpack(x));
}

ConstraintEval ShootingNlp::evaluate(std::span<const double> x) const {
  return evaluate_constraints(unpack(x), field_, spec_);
}

Vector ShootingNlp::constraints(std::span<const double> x) const {
  return saddle::constraints(unpack(x), field_, spec_);
}

double ShootingNlp::max_step(std::span<const double> x,
                             std::span<const double> dx) const {
  double a = 1.0;
  const std::size_t bs = dim() + 1;
  for (std::size_t i = 0; i < segments(); ++i) {
    const std::size_t j = i * bs + dim();
    if (dx[j] < 0.0) a = std::min(a, 0.9 * x[j] / -dx[j]);
  }
  return a;
}

double default_kappa_threshold() { return 1.0 / std::cbrt(DBL_EPSILON); }

void SqpConfig::validate() const {
  if (max_iters == 0) throw std::invalid_argument("max_iters must be > 0");
  if (!(grad_tol > 0.0 && constraint_tol > 0.0 && min_step > 0.0 &&
        kappa_threshold > 0.0))
    throw std::invalid_argument("SQP tolerances must be positive");
  monitor.validate();
}

std::optional<std::size_t> plan_ratio(const RunStats& s, bool reuse_plans) {
  if (!reuse_plans || s.n_plan_updates == 0) return std::nullopt;
  return s.n_pivoted / s.n_plan_updates;
}

Vector kkt_solve_unpivoted(const SaddleBlocks& k, std::span<const double> b) {
  return solve_structured(factor_structured(k), b);
}

PivotedSolve kkt_solve_pivoted(const SymmetricDense& k,
                               std::span<const double> b,
                               const PivotPlan* prior, const SqpConfig& cfg) {
  if (prior && cfg.reuse_plans) {
    try {
      MonitoredOutcome o = factor_with_plan(k, *prior, cfg.monitor, cfg.searcher);
      Vector u = solve_factored(o.factors, b);
      return {std::move(u), std::move(o), false};
    } catch (const Breakdown&) {
      // fall through to a fresh search
    }
  }
  Factorization f = factor_pivoted(k, cfg.searcher);
  PivotedSolve out;
  out.u = solve_factored(f.factors, b);
  out.fresh = true;
  out.outcome.steps_researched = f.factors.dblocks.size();
  out.outcome.plan_updated = true;
  out.outcome.factors = std::move(f.factors);
  out.outcome.stats = f.stats;
  out.outcome.trace = std::move(f.trace);
  return out;
}

double l1_merit(double f, std::span<const double> c, double rho) {
  return f + rho * norm1(c);
}

double backtracking(const std::function<double(double)>& phi, double phi0,
                    double dphi0, double alpha0, double min_step) {
  constexpr double kArmijo = 1e-4;
  if (!(dphi0 < 0.0)) throw LineSearchFailure("not a descent direction");
  for (double a = alpha0; a >= min_step; a *= 0.5) {
    const double v = phi(a);
    if (std::isfinite(v) && v <= phi0 + kArmijo * a * dphi0) return a;
  }
  throw LineSearchFailure("step length fell below the minimum");
}

namespace {

// K u for the block form, used for residual reporting.
Vector multiply_saddle(const SaddleBlocks& k, std::span<const double> u) {
  const std::size_t n = k.primal_size(), m = k.dual_size();
  const std::size_t bs = k.B.dim + 1;
  auto up = u.subspan(0, n), ud = u.subspan(n, m);
  Vector out = multiply_b(k.B, ud);
  for (std::size_t i = 0; i < k.H.size(); ++i) {
    const Vector hu = multiply(k.H[i], up.subspan(i * bs, bs));
    for (std::size_t p = 0; p < bs; ++p) out[i * bs + p] += hu[p];
  }
  Vector bottom = multiply_bt(k.B, up);
  bottom.front() -= k.gamma1 * ud.front();
  bottom.back() -= k.gamma2 * ud.back();
  out.insert(out.end(), bottom.begin(), bottom.end());
  return out;
}

double relative_residual(const SaddleBlocks& k, std::span<const double> u,
                         std::span<const double> b) {
  Vector r = multiply_saddle(k, u);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  const double nb = norm2(b);
  return nb > 0.0 ? norm2(r) / nb : norm2(r);
}

Vector lagrangian_gradient(const Vector& g, const ConstraintBlocks& jac,
                           std::span<const double> lambda) {
  Vector out = multiply_b(jac, lambda);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i];
  return out;
}

}  // namespace

SqpResult run_sqp(const StructuredNlp& nlp, const SqpConfig& cfg,
                  const KktObserver& observer) {
  cfg.validate();
  const std::size_t n = nlp.primal_size(), m = nlp.dual_size();
  const std::size_t bs = nlp.dim() + 1;

  SqpResult res;
  RunStats& st = res.stats;
  Vector x = nlp.initial_point();
  std::vector<Matrix> H = nlp.initial_hessian();
  ConstraintEval ev = nlp.evaluate(x);
  Vector g = nlp.objective_gradient(x);
  double f = nlp.objective(x);
  Vector lambda(m, 0.0);
  std::optional<PivotPlan> plan;
  bool difficult = false;
  bool failed_last = false;

  auto restart = [&] {
    H = nlp.initial_hessian();
    plan.reset();
    difficult = false;
    ++st.n_restarts;
  };

  for (;;) {
    const Vector gl = lagrangian_gradient(g, ev.jac, lambda);
    st.final_constraint_norm = norm_inf(ev.c);
    st.final_grad_norm = norm_inf(gl);
    st.final_objective = f;
    if (st.final_constraint_norm <= cfg.constraint_tol &&
        st.final_grad_norm <= cfg.grad_tol) {
      st.converged = true;
      break;
    }
    if (st.iters >= cfg.max_iters) break;

    IterationRecord rec;
    rec.objective = f;
    rec.constraint_norm = st.final_constraint_norm;
    rec.grad_norm = st.final_grad_norm;

    SaddleBlocks K{H, ev.jac, 0.0, 0.0};
    Vector rhs(n + m);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = -g[i];
    for (std::size_t i = 0; i < m; ++i) rhs[n + i] = -ev.c[i];

    Vector u;
    bool solved = false;
    try {
      if (!difficult) {
        try {
          StructuredFactors sf;
          sf.segments = nlp.segments();
          sf.dim = nlp.dim();
          sf.h = factor_h(K);
          rec.kappa_h = sf.h.condition();
          if (rec.kappa_h > cfg.kappa_threshold) {
            difficult = true;
            ++st.n_switch_attempts;
          } else {
            sf.x = compute_x(K, sf.h);
            sf.s = factor_schur(compute_schur(K, sf.h, sf.x));
            u = solve_structured(sf, rhs);
            ++st.n_unpivoted;
            solved = true;
          }
        } catch (const NotPositiveDefinite&) {
          difficult = true;
          ++st.n_switch_attempts;
        } catch (const IndefiniteSchur&) {
          difficult = true;
          ++st.n_switch_attempts;
        }
      }
      if (!solved) {
        const SymmetricDense Kd = assemble_dense(K);
        PivotedSolve ps = kkt_solve_pivoted(
            Kd, rhs, plan && cfg.reuse_plans ? &*plan : nullptr, cfg);
        ++st.n_pivoted;
        if (ps.fresh || ps.outcome.plan_updated) ++st.n_plan_updates;
        rec.pivoted = true;
        rec.fresh_search = ps.fresh;
        rec.steps_researched = ps.outcome.steps_researched;
        plan = ps.outcome.factors.plan;
        res.permutations.push_back(plan->perm);
        u = std::move(ps.u);
      }
    } catch (const Breakdown&) {
      u.clear();
    } catch (const SingularPivot&) {
      u.clear();
    }
    rec.difficult = difficult;

    double alpha = 0.0;
    Vector d, lam_new;
    if (!u.empty()) {
      rec.residual = relative_residual(K, u, rhs);
      if (observer) observer(rec, K);
      d.assign(u.begin(), u.begin() + static_cast<long>(n));
      lam_new.assign(u.begin() + static_cast<long>(n), u.end());
      const double rho = 2.0 * norm_inf(lam_new) + 1.0;
      const double phi0 = l1_merit(f, ev.c, rho);
      const double dphi0 = dot(g, d) - rho * norm1(ev.c);
      auto phi = [&](double a) -> double {
        Vector xt = x;
        for (std::size_t i = 0; i < n; ++i) xt[i] += a * d[i];
        try {
          return l1_merit(nlp.objective(xt), nlp.constraints(xt), rho);
        } catch (const NonFinite&) {
          return INFINITY;
        } catch (const std::invalid_argument&) {
          return INFINITY;
        }
      };
      try {
        alpha = backtracking(phi, phi0, dphi0,
                             std::min(1.0, nlp.max_step(x, d)), cfg.min_step);
      } catch (const LineSearchFailure&) {
        alpha = 0.0;
      }
    }

    if (alpha == 0.0) {
      // Two failures in a row make no progress; count the second so a
      // stalled run still ends at the iteration cap.
      if (failed_last) ++st.iters;
      failed_last = true;
      rec.restart = true;
      rec.iter = st.iters;
      res.history.push_back(rec);
      restart();
      continue;
    }

    Vector x_new = x;
    for (std::size_t i = 0; i < n; ++i) x_new[i] += alpha * d[i];
    ConstraintEval ev_new = nlp.evaluate(x_new);
    const Vector g_new = nlp.objective_gradient(x_new);
    const Vector gl_old = lagrangian_gradient(g, ev.jac, lam_new);
    const Vector gl_new = lagrangian_gradient(g_new, ev_new.jac, lam_new);
    for (std::size_t i = 0; i < H.size(); ++i) {
      Vector s(bs), y(bs);
      for (std::size_t p = 0; p < bs; ++p) {
        s[p] = alpha * d[i * bs + p];
        y[p] = gl_new[i * bs + p] - gl_old[i * bs + p];
      }
      H[i] = bfgs_update(H[i], s, y);
    }

    x = std::move(x_new);
    ev = std::move(ev_new);
    g = g_new;
    f = nlp.objective(x);
    lambda = std::move(lam_new);
    failed_last = false;
    ++st.iters;
    rec.iter = st.iters;
    rec.step = alpha;
    res.history.push_back(rec);
  }

  st.ratio_R = plan_ratio(st, cfg.reuse_plans);
  res.x = std::move(x);
  res.lambda = std::move(lambda);
  return res;
}

}  // namespace saddle
