#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "saddle/blocksaddle.hpp"
#include "saddle/dense.hpp"

namespace saddle {

/// The integration state left the finite range.
class NonFinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// d g2 / d t_N vanished, so B would lose its nonzero beta.
class DegenerateBoundary : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Autonomous vector field x' = f(x) on R^k with its Jacobian.
class VectorField {
 public:
  using Eval = std::function<Vector(std::span<const double>)>;
  using Jacobian = std::function<Matrix(std::span<const double>)>;

  VectorField(std::size_t dim, Eval f, Jacobian df);

  std::size_t dim() const noexcept { return dim_; }
  Vector operator()(std::span<const double> x) const { return f_(x); }
  Matrix jacobian(std::span<const double> x) const { return df_(x); }

 private:
  std::size_t dim_;
  Eval f_;
  Jacobian df_;
};

enum class Benchmark { Linear, Nonlinear };

const char* to_string(Benchmark b);
/// Accepts "linear" and "nonlinear"; throws std::invalid_argument otherwise.
Benchmark parse_benchmark(const std::string& s);

/// Block rotation x' = A x with A = diag([[0, 1], [-1, 0]], ...). k must be
/// even.
VectorField linear_field(std::size_t k);
/// The block rotation plus (sin x_k, ..., sin x_1).
VectorField nonlinear_field(std::size_t k);
VectorField make_field(Benchmark b, std::size_t k);

/// Largest RK4 step; a horizon t uses ceil(t / kMaxStep) equal steps.
inline constexpr double kMaxStep = 0.01;

/// Phi(t, x0) by fixed-step classical RK4.
Vector flow(const VectorField& f, std::span<const double> x0, double t);

struct FlowSensitivity {
  Vector end;  // Phi(t, x0)
  Matrix M;    // d Phi / d x0
  Vector v;    // d Phi / d t = f(Phi)
};

/// Flow together with its variational equation on the same RK4 grid.
FlowSensitivity flow_jacobian(const VectorField& f,
                              std::span<const double> x0, double t);

/// Init and Unsafe as balls of a common radius.
struct ReachSpec {
  Vector init_center;
  Vector unsafe_center;
  double radius = 0.25;

  /// init (1, 0, 1, 0, ...), unsafe (-1, 0, -1, 0, ...), radius 1/4.
  static ReachSpec defaults(std::size_t k);
  void validate() const;
};

/// Segment start states x0^i and durations t_i.
struct ShootingState {
  std::vector<Vector> x0;
  Vector t;

  std::size_t segments() const { return t.size(); }
  std::size_t dim() const { return x0.empty() ? 0 : x0[0].size(); }

  /// Packs into (x0^1, t_1, ..., x0^N, t_N).
  Vector pack() const;
  static ShootingState unpack(std::span<const double> z, std::size_t N,
                              std::size_t k);
  void validate() const;
};

/// One trajectory from the init-sphere point facing the unsafe center, cut
/// into N equal-time pieces. The total time defaults to the time of closest
/// approach to the unsafe center within `horizon`.
ShootingState initial_state(const ReachSpec& spec, const VectorField& field,
                            std::size_t N,
                            std::optional<double> total_time = std::nullopt,
                            double horizon = 10.0);

/// [g1; match_1; ...; match_{N-1}; g2] with g squared-distance sphere
/// residuals and match_i = x0^{i+1} - Phi(t_i, x0^i).
Vector constraints(const ShootingState& s, const VectorField& f,
                   const ReachSpec& spec);

ConstraintBlocks constraint_jacobian(const ShootingState& s,
                                     const VectorField& f,
                                     const ReachSpec& spec);

struct ConstraintEval {
  Vector c;
  ConstraintBlocks jac;
};

/// Both at once, sharing the flow integrations.
ConstraintEval evaluate_constraints(const ShootingState& s,
                                    const VectorField& f,
                                    const ReachSpec& spec);

/// Central differences of constraints() in the packed variables, m x n.
Matrix finite_difference_jacobian(const ShootingState& s, const VectorField& f,
                                  const ReachSpec& spec, double h = 1e-6);

/// sum t_i^2.
double objective(const ShootingState& s);
Vector objective_gradient(const ShootingState& s);

/// Damped BFGS update of an SPD block (Powell's rule with threshold 0.2).
/// Returns the input unchanged when the step is degenerate.
Matrix bfgs_update(const Matrix& h, std::span<const double> s,
                   std::span<const double> y);

}  // namespace saddle
