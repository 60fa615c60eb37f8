#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "saddle/blocksaddle.hpp"
#include "saddle/factorization.hpp"
#include "saddle/shooting.hpp"

namespace saddle {

/// Equality-constrained problem whose Hessian is block diagonal over N
/// segments of size k+1 and whose constraint Jacobian has the multiple
/// shooting block layout.
class StructuredNlp {
 public:
  virtual ~StructuredNlp() = default;

  virtual std::size_t segments() const = 0;
  virtual std::size_t dim() const = 0;
  virtual Vector initial_point() const = 0;
  virtual double objective(std::span<const double> x) const = 0;
  virtual Vector objective_gradient(std::span<const double> x) const = 0;
  virtual ConstraintEval evaluate(std::span<const double> x) const = 0;
  virtual Vector constraints(std::span<const double> x) const {
    return evaluate(x).c;
  }
  /// Largest step fraction along dx that keeps x inside the domain.
  virtual double max_step(std::span<const double>,
                          std::span<const double>) const {
    return 1.0;
  }
  /// Starting Hessian blocks; identity by default.
  virtual std::vector<Matrix> initial_hessian() const;

  std::size_t primal_size() const { return segments() * (dim() + 1); }
  std::size_t dual_size() const { return (segments() - 1) * dim() + 2; }
};

/// The reachability problem: minimize sum t_i^2 subject to the boundary and
/// matching constraints.
class ShootingNlp final : public StructuredNlp {
 public:
  ShootingNlp(VectorField field, ReachSpec spec, ShootingState start);

  std::size_t segments() const override { return start_.segments(); }
  std::size_t dim() const override { return start_.dim(); }
  Vector initial_point() const override { return start_.pack(); }
  double objective(std::span<const double> x) const override;
  Vector objective_gradient(std::span<const double> x) const override;
  ConstraintEval evaluate(std::span<const double> x) const override;
  Vector constraints(std::span<const double> x) const override;
  /// Keeps every t_i above a tenth of its current value.
  double max_step(std::span<const double> x,
                  std::span<const double> dx) const override;

 private:
  ShootingState unpack(std::span<const double> x) const;

  VectorField field_;
  ReachSpec spec_;
  ShootingState start_;
};

/// 1 / cbrt(machine epsilon).
double default_kappa_threshold();

struct SqpConfig {
  std::size_t max_iters = 400;
  double grad_tol = 1e-6;
  double constraint_tol = 1e-6;
  double min_step = 1e-10;
  double kappa_threshold = default_kappa_threshold();
  MonitorConfig monitor;
  PivotSearch searcher = PivotSearch::BunchParlett;
  bool reuse_plans = true;

  void validate() const;
};

struct RunStats {
  std::size_t iters = 0;
  std::size_t n_unpivoted = 0;
  std::size_t n_pivoted = 0;
  std::size_t n_plan_updates = 0;
  /// Structured factorizations that triggered the switch and were not used.
  std::size_t n_switch_attempts = 0;
  std::size_t n_restarts = 0;
  std::optional<std::size_t> ratio_R;
  bool converged = false;
  double final_constraint_norm = 0.0;
  double final_grad_norm = 0.0;
  double final_objective = 0.0;
};

/// floor(n_pivoted / n_plan_updates) when reuse is on and a plan was built.
std::optional<std::size_t> plan_ratio(const RunStats& s, bool reuse_plans);

struct IterationRecord {
  std::size_t iter = 0;  // 1-based count of accepted iterations so far
  double objective = 0.0;
  double constraint_norm = 0.0;  // before the step
  double grad_norm = 0.0;        // before the step
  double kappa_h = 0.0;          // 0 when D_H was not formed
  bool difficult = false;
  bool pivoted = false;
  bool fresh_search = false;
  std::size_t steps_researched = 0;
  double residual = 0.0;  // ||K u - b|| / ||b|| of the step solve
  double step = 0.0;      // accepted step length, 0 on failure
  bool restart = false;   // the line search failed and the state was reset
};

struct SqpResult {
  Vector x;
  Vector lambda;
  RunStats stats;
  std::vector<IterationRecord> history;
  /// Permutations of every pivoted factorization, in order.
  std::vector<Permutation> permutations;
};

/// Called after every KKT solve with the system that was solved.
using KktObserver =
    std::function<void(const IterationRecord&, const SaddleBlocks&)>;

SqpResult run_sqp(const StructuredNlp& nlp, const SqpConfig& cfg,
                  const KktObserver& observer = {});

/// Structured factorization and solve; throws NotPositiveDefinite or
/// IndefiniteSchur.
Vector kkt_solve_unpivoted(const SaddleBlocks& k, std::span<const double> b);

struct PivotedSolve {
  Vector u;
  MonitoredOutcome outcome;
  bool fresh = false;  // a full search was done (no prior plan or fallback)
};

/// Pivoted solve of K u = b. With a prior plan the factorization follows it
/// under monitoring; a Breakdown falls back to one fresh search.
PivotedSolve kkt_solve_pivoted(const SymmetricDense& k,
                               std::span<const double> b,
                               const PivotPlan* prior, const SqpConfig& cfg);

/// f + rho ||c||_1.
double l1_merit(double f, std::span<const double> c, double rho);

class LineSearchFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Backtracking Armijo search on phi(alpha) with halving, starting from
/// alpha0. dphi0 is the directional derivative at 0 and must be negative.
/// Throws LineSearchFailure once alpha drops below min_step.
double backtracking(const std::function<double(double)>& phi, double phi0,
                    double dphi0, double alpha0, double min_step);

}  // namespace saddle
