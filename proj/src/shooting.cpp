#include "saddle/shooting.hpp"

#include <algorithm>
#include <cmath>

namespace saddle {

namespace {

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(),
                     [](double v) { return std::isfinite(v); });
}

std::size_t step_count(double t) {
  if (!(t >= 0.0) || !std::isfinite(t))
    throw std::invalid_argument("flow horizon must be finite and nonnegative");
  return static_cast<std::size_t>(std::ceil(t / kMaxStep));
}

void rotation_into(std::span<const double> x, std::span<double> out) {
  for (std::size_t j = 0; j + 1 < x.size(); j += 2) {
    out[j] = x[j + 1];
    out[j + 1] = -x[j];
  }
}

Matrix rotation_matrix(std::size_t k) {
  Matrix a(k, k);
  for (std::size_t j = 0; j + 1 < k; j += 2) {
    a(j, j + 1) = 1.0;
    a(j + 1, j) = -1.0;
  }
  return a;
}

void require_even(std::size_t k) {
  if (k == 0 || k % 2 != 0)
    throw std::invalid_argument("benchmark dimension must be even and positive");
}

double squared_distance(std::span<const double> x, std::span<const double> c) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - c[i]) * (x[i] - c[i]);
  return s;
}

}  // namespace

VectorField::VectorField(std::size_t dim, Eval f, Jacobian df)
    : dim_(dim), f_(std::move(f)), df_(std::move(df)) {
  if (dim_ == 0) throw std::invalid_argument("vector field needs k >= 1");
}

const char* to_string(Benchmark b) {
  return b == Benchmark::Linear ? "linear" : "nonlinear";
}

Benchmark parse_benchmark(const std::string& s) {
  if (s == "linear") return Benchmark::Linear;
  if (s == "nonlinear") return Benchmark::Nonlinear;
  throw std::invalid_argument("unknown benchmark '" + s + "'");
}

VectorField linear_field(std::size_t k) {
  require_even(k);
  const Matrix a = rotation_matrix(k);
  return VectorField(
      k,
      [](std::span<const double> x) {
        Vector out(x.size());
        rotation_into(x, out);
        return out;
      },
      [a](std::span<const double>) { return a; });
}

VectorField nonlinear_field(std::size_t k) {
  require_even(k);
  const Matrix a = rotation_matrix(k);
  return VectorField(
      k,
      [](std::span<const double> x) {
        const std::size_t n = x.size();
        Vector out(n);
        rotation_into(x, out);
        for (std::size_t i = 0; i < n; ++i) out[i] += std::sin(x[n - 1 - i]);
        return out;
      },
      [a](std::span<const double> x) {
        const std::size_t n = x.size();
        Matrix j = a;
        for (std::size_t i = 0; i < n; ++i)
          j(i, n - 1 - i) += std::cos(x[n - 1 - i]);
        return j;
      });
}

VectorField make_field(Benchmark b, std::size_t k) {
  return b == Benchmark::Linear ? linear_field(k) : nonlinear_field(k);
}

Vector flow(const VectorField& f, std::span<const double> x0, double t) {
  if (x0.size() != f.dim()) throw DimensionMismatch("flow: state size");
  const std::size_t steps = step_count(t);
  Vector x(x0.begin(), x0.end());
  if (steps == 0) return x;
  const double h = t / static_cast<double>(steps);
  Vector tmp(x.size());
  for (std::size_t s = 0; s < steps; ++s) {
    const Vector k1 = f(x);
    for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    const Vector k2 = f(tmp);
    for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    const Vector k3 = f(tmp);
    for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + h * k3[i];
    const Vector k4 = f(tmp);
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!all_finite(x)) throw NonFinite("flow left the finite range");
  }
  return x;
}

FlowSensitivity flow_jacobian(const VectorField& f,
                              std::span<const double> x0, double t) {
  const std::size_t k = f.dim();
  if (x0.size() != k) throw DimensionMismatch("flow_jacobian: state size");
  const std::size_t steps = step_count(t);
  Vector x(x0.begin(), x0.end());
  Matrix phi = Matrix::identity(k);
  if (steps > 0) {
    const double h = t / static_cast<double>(steps);
    Vector xs(k);
    Matrix ps(k, k);
    // RK4 on the augmented system (x, Phi) with Phi' = J(x) Phi.
    auto stage = [&](double a, const Vector& kx, const Matrix& kp) {
      for (std::size_t i = 0; i < k; ++i) xs[i] = x[i] + a * kx[i];
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) ps(i, j) = phi(i, j) + a * kp(i, j);
    };
    for (std::size_t s = 0; s < steps; ++s) {
      const Vector k1 = f(x);
      const Matrix p1 = multiply(f.jacobian(x), phi);
      stage(0.5 * h, k1, p1);
      const Vector k2 = f(xs);
      const Matrix p2 = multiply(f.jacobian(xs), ps);
      stage(0.5 * h, k2, p2);
      const Vector k3 = f(xs);
      const Matrix p3 = multiply(f.jacobian(xs), ps);
      stage(h, k3, p3);
      const Vector k4 = f(xs);
      const Matrix p4 = multiply(f.jacobian(xs), ps);
      for (std::size_t i = 0; i < k; ++i) {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        for (std::size_t j = 0; j < k; ++j)
          phi(i, j) += h / 6.0 *
                       (p1(i, j) + 2.0 * p2(i, j) + 2.0 * p3(i, j) + p4(i, j));
      }
      if (!all_finite(x) || !all_finite(phi.data()))
        throw NonFinite("variational flow left the finite range");
    }
  }
  FlowSensitivity out{x, std::move(phi), {}};
  out.v = f(out.end);
  return out;
}

ReachSpec ReachSpec::defaults(std::size_t k) {
  ReachSpec s;
  s.init_center.assign(k, 0.0);
  s.unsafe_center.assign(k, 0.0);
  for (std::size_t i = 0; i < k; i += 2) {
    s.init_center[i] = 1.0;
    s.unsafe_center[i] = -1.0;
  }
  return s;
}

void ReachSpec::validate() const {
  if (init_center.empty() || init_center.size() != unsafe_center.size())
    throw DimensionMismatch("reach spec centers must have equal length");
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
  if (init_center == unsafe_center)
    throw std::invalid_argument("init and unsafe centers coincide");
}

Vector ShootingState::pack() const {
  Vector z;
  z.reserve(segments() * (dim() + 1));
  for (std::size_t i = 0; i < segments(); ++i) {
    z.insert(z.end(), x0[i].begin(), x0[i].end());
    z.push_back(t[i]);
  }
  return z;
}

ShootingState ShootingState::unpack(std::span<const double> z, std::size_t N,
                                    std::size_t k) {
  if (z.size() != N * (k + 1)) throw DimensionMismatch("unpack: length");
  ShootingState s;
  for (std::size_t i = 0; i < N; ++i) {
    auto seg = z.subspan(i * (k + 1), k + 1);
    s.x0.emplace_back(seg.begin(), seg.begin() + static_cast<long>(k));
    s.t.push_back(seg[k]);
  }
  return s;
}

void ShootingState::validate() const {
  if (t.empty() || x0.size() != t.size())
    throw DimensionMismatch("state needs N >= 1 matching segments");
  for (const auto& x : x0)
    if (x.size() != dim() || x.empty())
      throw DimensionMismatch("segment states differ in length");
  for (double ti : t)
    if (!(ti > 0.0)) throw std::invalid_argument("segment lengths must be > 0");
}

ShootingState initial_state(const ReachSpec& spec, const VectorField& field,
                            std::size_t N, std::optional<double> total_time,
                            double horizon) {
  spec.validate();
  if (N == 0) throw std::invalid_argument("need at least one segment");
  if (field.dim() != spec.init_center.size())
    throw DimensionMismatch("initial_state: field and spec dimensions differ");
  if (total_time && !(*total_time > 0.0))
    throw std::invalid_argument("total time must be > 0");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be > 0");
  const std::size_t k = spec.init_center.size();

  // Start on the init sphere at the point facing the unsafe center; the
  // center itself would zero the boundary-constraint gradient.
  Vector dir(k);
  for (std::size_t j = 0; j < k; ++j)
    dir[j] = spec.unsafe_center[j] - spec.init_center[j];
  const double len = norm2(dir);
  Vector start(k);
  for (std::size_t j = 0; j < k; ++j)
    start[j] = spec.init_center[j] + spec.radius * dir[j] / len;

  double T = 0.0;
  if (total_time) {
    T = *total_time;
  } else {
    Vector y = start;
    double best = squared_distance(y, spec.unsafe_center);
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / kMaxStep));
    for (std::size_t s = 1; s <= steps; ++s) {
      y = flow(field, y, kMaxStep);
      const double d = squared_distance(y, spec.unsafe_center);
      if (d < best) {
        best = d;
        T = static_cast<double>(s) * kMaxStep;
      }
    }
    if (T == 0.0)
      throw DegenerateBoundary("the flow from the init set never approaches the unsafe set");
  }

  ShootingState s;
  Vector x = start;
  for (std::size_t i = 0; i < N; ++i) {
    s.x0.push_back(x);
    s.t.push_back(T / static_cast<double>(N));
    if (i + 1 < N) x = flow(field, x, s.t.back());
  }
  return s;
}

namespace {

void check_inputs(const ShootingState& s, const VectorField& f,
                  const ReachSpec& spec) {
  s.validate();
  spec.validate();
  if (s.dim() != f.dim() || spec.init_center.size() != f.dim())
    throw DimensionMismatch("state, field and spec dimensions differ");
}

ConstraintEval evaluate(const ShootingState& s, const VectorField& f,
                        const ReachSpec& spec, bool with_jacobian) {
  check_inputs(s, f, spec);
  const std::size_t N = s.segments(), k = s.dim();
  const double r2 = spec.radius * spec.radius;
  ConstraintEval out;
  out.c.assign((N - 1) * k + 2, 0.0);
  out.c[0] = squared_distance(s.x0[0], spec.init_center) - r2;

  ConstraintBlocks& b = out.jac;
  if (with_jacobian) {
    b.segments = N;
    b.dim = k;
    b.v_init.resize(k);
    for (std::size_t j = 0; j < k; ++j)
      b.v_init[j] = 2.0 * (s.x0[0][j] - spec.init_center[j]);
  }
  for (std::size_t i = 0; i + 1 < N; ++i) {
    Vector end;
    if (with_jacobian) {
      FlowSensitivity fs = flow_jacobian(f, s.x0[i], s.t[i]);
      end = std::move(fs.end);
      b.M.push_back(std::move(fs.M));
      b.v.push_back(std::move(fs.v));
    } else {
      end = flow(f, s.x0[i], s.t[i]);
    }
    for (std::size_t j = 0; j < k; ++j)
      out.c[1 + i * k + j] = s.x0[i + 1][j] - end[j];
  }

  Vector end, diff(k);
  if (with_jacobian) {
    const FlowSensitivity fs = flow_jacobian(f, s.x0[N - 1], s.t[N - 1]);
    end = fs.end;
    for (std::size_t j = 0; j < k; ++j) diff[j] = end[j] - spec.unsafe_center[j];
    b.w_final = multiply_transposed(fs.M, diff);
    for (double& x : b.w_final) x *= 2.0;
    b.beta = 2.0 * dot(fs.v, diff);
    if (b.beta == 0.0)
      throw DegenerateBoundary("final boundary constraint has zero t-gradient");
  } else {
    end = flow(f, s.x0[N - 1], s.t[N - 1]);
  }
  out.c.back() = squared_distance(end, spec.unsafe_center) - r2;
  return out;
}

}  // namespace

Vector constraints(const ShootingState& s, const VectorField& f,
                   const ReachSpec& spec) {
  return evaluate(s, f, spec, false).c;
}

Matrix finite_difference_jacobian(const ShootingState& s, const VectorField& f,
                                  const ReachSpec& spec, double h) {
  const Vector z = s.pack();
  const std::size_t N = s.segments(), k = s.dim();
  Matrix out;
  for (std::size_t j = 0; j < z.size(); ++j) {
    Vector zp = z, zm = z;
    zp[j] += h;
    zm[j] -= h;
    const Vector cp = constraints(ShootingState::unpack(zp, N, k), f, spec);
    const Vector cm = constraints(ShootingState::unpack(zm, N, k), f, spec);
    if (out.empty()) out = Matrix(cp.size(), z.size());
    for (std::size_t i = 0; i < cp.size(); ++i)
      out(i, j) = (cp[i] - cm[i]) / (2.0 * h);
  }
  return out;
}

ConstraintBlocks constraint_jacobian(const ShootingState& s,
                                     const VectorField& f,
                                     const ReachSpec& spec) {
  return evaluate(s, f, spec, true).jac;
}

ConstraintEval evaluate_constraints(const ShootingState& s,
                                    const VectorField& f,
                                    const ReachSpec& spec) {
  return evaluate(s, f, spec, true);
}

double objective(const ShootingState& s) {
  double v = 0.0;
  for (double ti : s.t) v += ti * ti;
  return v;
}

Vector objective_gradient(const ShootingState& s) {
  const std::size_t k = s.dim();
  Vector g(s.segments() * (k + 1), 0.0);
  for (std::size_t i = 0; i < s.segments(); ++i) g[i * (k + 1) + k] = 2.0 * s.t[i];
  return g;
}

Matrix bfgs_update(const Matrix& h, std::span<const double> s,
                   std::span<const double> y) {
  if (h.rows() != s.size() || h.cols() != s.size() || y.size() != s.size())
    throw DimensionMismatch("bfgs_update: size mismatch");
  const Vector hs = multiply(h, s);
  const double shs = dot(s, hs);
  if (!(shs > 0.0) || !std::isfinite(shs)) return h;
  const double sy = dot(s, y);
  const double theta = sy >= 0.2 * shs ? 1.0 : 0.8 * shs / (shs - sy);
  Vector r(y.begin(), y.end());
  for (std::size_t i = 0; i < r.size(); ++i)
    r[i] = theta * y[i] + (1.0 - theta) * hs[i];
  const double sr = dot(s, r);
  if (!(sr > 0.0) || !std::isfinite(sr) || !all_finite(r)) return h;
  Matrix out = h;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v =
          h(i, j) - hs[i] * hs[j] / shs + r[i] * r[j] / sr;
      out(i, j) = v;
      out(j, i) = v;
    }
  // Long runs of heavily damped updates can push the smallest eigenvalue
  // below roundoff; keep the previous block rather than an indefinite one.
  Matrix l;
  Vector d;
  if (factor_definite(out, l, d)) return h;
  return out;
}

}  // namespace saddle
