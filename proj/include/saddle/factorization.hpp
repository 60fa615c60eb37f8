#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "saddle/dense.hpp"

namespace saddle {

/// (1 + sqrt(17)) / 8, the pivot-size threshold shared by Bunch-Parlett and
/// Bunch-Kaufman.
inline constexpr double kPivotAlpha = 0.6403882032022076;

enum class PivotSearch { BunchParlett, BunchKaufman };

const char* to_string(PivotSearch s);

/// Unpivoted elimination hit a pivot with |pivot| <= n * eps * max|A|.
class ZeroPivot : public std::runtime_error {
 public:
  explicit ZeroPivot(std::size_t step)
      : std::runtime_error("zero pivot at step " + std::to_string(step)),
        step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// The reduced matrix vanished (A is singular) or a pivot block is exactly
/// singular.
class Breakdown : public std::runtime_error {
 public:
  explicit Breakdown(std::size_t step)
      : std::runtime_error("factorization breakdown at step " +
                           std::to_string(step)),
        step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class InvalidPlan : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct FactorStats {
  /// Element comparisons made while searching for pivots.
  std::size_t comparisons = 0;
  /// Pivot searches performed (one per searched elimination step).
  std::size_t searches = 0;
  /// max_k mu0(A^(k)), including the input matrix.
  double max_reduced_entry = 0.0;
  /// max |m_ij| over all multipliers.
  double max_multiplier = 0.0;
};

/// Acceptance thresholds for a planned pivot: |beta| > eps1 for 1x1, and
/// |det| > eps1 with max-abs(beta) < eps2 for 2x2.
struct MonitorConfig {
  double eps1 = 1e-3;
  double eps2 = 1e6;

  /// Throws unless both thresholds are positive. The growth lemmas assume
  /// eps1 < 1 < eps2; larger eps1 is allowed to force total rejection.
  void validate() const;
};

/// One elimination step as seen by the instrumentation.
struct PivotStep {
  std::size_t position = 0;  // leading index of the pivot in permuted order
  DBlock pivot;
  double mu0 = 0.0;  // max |a_ij| of the reduced matrix before the step
  double mu1 = 0.0;  // max |a_ii| of the reduced matrix before the step
  double mu0_after = 0.0;
  double max_multiplier = 0.0;
  bool searched = false;  // chosen by a pivot search rather than the plan
};

struct Factorization {
  LdltFactors factors;
  FactorStats stats;
  std::vector<PivotStep> trace;
};

struct MonitoredOutcome {
  LdltFactors factors;
  FactorStats stats;
  std::vector<PivotStep> trace;
  bool plan_updated = false;
  std::size_t steps_reused = 0;
  std::size_t steps_researched = 0;
};

/// L D L^T with 1x1 pivots in natural order.
Factorization factor_unpivoted(const SymmetricDense& a);

Factorization factor_bunch_parlett(const SymmetricDense& a);
Factorization factor_bunch_kaufman(const SymmetricDense& a);
Factorization factor_pivoted(const SymmetricDense& a, PivotSearch search);

/// Factors P A P^T following `plan`. Each planned pivot is tested against
/// `cfg`; the first rejection hands the remaining reduced matrix to `search`,
/// which also decides the tail of the returned plan.
MonitoredOutcome factor_with_plan(const SymmetricDense& a,
                                  const PivotPlan& plan,
                                  const MonitorConfig& cfg,
                                  PivotSearch search);

/// Growth bounds for a pivot accepted under `cfg`:
///   1x1: m <= mu0/eps1 and mu0_after <= (1 + mu0/eps1) mu0
///   2x2: m <= mu0(mu0+mu1)/eps1, mu0_after <= (1 + 2 mu0(mu0+mu1)/eps1) mu0
///        and eps1 < |det| <= mu0^2 + mu1^2
bool check_growth_bounds(const PivotStep& step, const MonitorConfig& cfg);

/// Bunch-Parlett bounds: mu0(A^(k)) <= 2.57^(n-k) mu0(A), multipliers below
/// 1/alpha (1x1) and 1/(1-alpha) (2x2).
bool check_bunch_parlett_bounds(std::span<const PivotStep> trace,
                                std::size_t order);

/// Solves A u = b from P A P^T = L D L^T.
Vector solve_factored(const LdltFactors& f, std::span<const double> b);

/// ||P A P^T - L D L^T||_max.
double reconstruction_error(const SymmetricDense& a, const LdltFactors& f);

/// max_reduced_entry divided by the smallest nonzero pivot magnitude (for a
/// 2x2 pivot, its smallest eigenvalue magnitude).
double kappa_proxy(const Factorization& f);

}  // namespace saddle
