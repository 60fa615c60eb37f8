#include "saddle/dense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace saddle {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw DimensionMismatch(what);
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "multiply: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      auto bp = b.row(p);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

Vector multiply(const Matrix& a, std::span<const double> x) {
  require(a.cols() == x.size(), "matvec: dimension mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

Vector multiply_transposed(const Matrix& a, std::span<const double> x) {
  require(a.rows() == x.size(), "matvec^T: dimension mismatch");
  Vector y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += ai[j] * x[i];
  }
  return y;
}

double dot(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

double norm_inf(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

double norm1(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += std::abs(v);
  return s;
}

SymmetricDense SymmetricDense::from_lower(const Matrix& a) {
  require(a.rows() == a.cols(), "symmetric matrix must be square");
  SymmetricDense s(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j <= i; ++j) s.set(i, j, a(i, j));
  return s;
}

SymmetricDense SymmetricDense::from_full(const Matrix& a) {
  require(a.rows() == a.cols(), "symmetric matrix must be square");
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (a(i, j) != a(j, i))
        throw std::invalid_argument("matrix is not symmetric");
  return from_lower(a);
}

void SymmetricDense::set(std::size_t i, std::size_t j, double value) {
  if (!std::isfinite(value))
    throw NonFiniteEntry("non-finite entry at (" + std::to_string(i) + ", " +
                         std::to_string(j) + ")");
  full_(i, j) = value;
  full_(j, i) = value;
}

Permutation::Permutation(std::vector<std::size_t> forward)
    : forward_(std::move(forward)) {
  std::vector<bool> seen(forward_.size(), false);
  for (std::size_t v : forward_) {
    if (v >= forward_.size() || seen[v])
      throw std::invalid_argument("permutation is not a bijection");
    seen[v] = true;
  }
}

Permutation Permutation::identity(std::size_t n) {
  std::vector<std::size_t> f(n);
  std::iota(f.begin(), f.end(), std::size_t{0});
  return Permutation(std::move(f));
}

Permutation Permutation::inverse() const {
  std::vector<std::size_t> inv(forward_.size());
  for (std::size_t i = 0; i < forward_.size(); ++i) inv[forward_[i]] = i;
  return Permutation(std::move(inv));
}

bool Permutation::is_identity() const {
  for (std::size_t i = 0; i < forward_.size(); ++i)
    if (forward_[i] != i) return false;
  return true;
}

Vector Permutation::permute(std::span<const double> x) const {
  require(x.size() == order(), "permute: length mismatch");
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[forward_[i]];
  return out;
}

Vector Permutation::unpermute(std::span<const double> y) const {
  require(y.size() == order(), "unpermute: length mismatch");
  Vector out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[forward_[i]] = y[i];
  return out;
}

Permutation compose(const Permutation& p, const Permutation& q) {
  require(p.order() == q.order(), "compose: order mismatch");
  std::vector<std::size_t> f(p.order());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = p[q[i]];
  return Permutation(std::move(f));
}

SymmetricDense apply_permutation(const Permutation& p,
                                 const SymmetricDense& a) {
  require(p.order() == a.order(), "apply_permutation: order mismatch");
  SymmetricDense out(a.order());
  for (std::size_t i = 0; i < a.order(); ++i)
    for (std::size_t j = 0; j <= i; ++j) out.set(i, j, a(p[i], p[j]));
  return out;
}

void PivotPlan::validate() const {
  std::size_t total = 0;
  for (int s : pivot_sizes) {
    if (s != 1 && s != 2)
      throw std::invalid_argument("pivot sizes must be 1 or 2");
    total += static_cast<std::size_t>(s);
  }
  if (total != perm.order())
    throw std::invalid_argument("pivot sizes do not sum to the order");
}

Matrix block_diagonal(std::span<const DBlock> dblocks) {
  std::size_t n = 0;
  for (const auto& d : dblocks) n += static_cast<std::size_t>(d.size);
  Matrix out(n, n);
  std::size_t k = 0;
  for (const auto& d : dblocks) {
    out(k, k) = d.a;
    if (d.size == 2) {
      out(k + 1, k) = d.b;
      out(k, k + 1) = d.b;
      out(k + 1, k + 1) = d.c;
    }
    k += static_cast<std::size_t>(d.size);
  }
  return out;
}

Matrix reconstruct(const LdltFactors& f) {
  const Matrix ld = multiply(f.lower, block_diagonal(f.dblocks));
  return multiply(ld, transpose(f.lower));
}

Vector solve_unit_lower(const Matrix& lower, std::span<const double> b) {
  require(lower.rows() == b.size() && lower.cols() == b.size(),
          "solve_unit_lower: dimension mismatch");
  Vector z(b.begin(), b.end());
  for (std::size_t i = 0; i < z.size(); ++i) {
    auto li = lower.row(i);
    double s = z[i];
    for (std::size_t j = 0; j < i; ++j) s -= li[j] * z[j];
    z[i] = s;
  }
  return z;
}

Vector solve_unit_upper(const Matrix& lower, std::span<const double> w) {
  require(lower.rows() == w.size() && lower.cols() == w.size(),
          "solve_unit_upper: dimension mismatch");
  Vector u(w.begin(), w.end());
  // Column-oriented sweep over L so rows stay contiguous.
  for (std::size_t i = u.size(); i-- > 0;) {
    const double ui = u[i];
    auto li = lower.row(i);
    for (std::size_t j = 0; j < i; ++j) u[j] -= li[j] * ui;
  }
  return u;
}

Vector solve_block_diag(std::span<const DBlock> dblocks,
                        std::span<const double> z) {
  Vector w(z.begin(), z.end());
  std::size_t k = 0;
  for (std::size_t blk = 0; blk < dblocks.size(); ++blk) {
    const DBlock& d = dblocks[blk];
    require(k + static_cast<std::size_t>(d.size) <= z.size(),
            "solve_block_diag: dimension mismatch");
    if (d.size == 1) {
      if (d.a == 0.0) throw SingularPivot(blk);
      w[k] = z[k] / d.a;
    } else {
      const double det = d.determinant();
      if (det == 0.0) throw SingularPivot(blk);
      w[k] = (d.c * z[k] - d.b * z[k + 1]) / det;
      w[k + 1] = (d.a * z[k + 1] - d.b * z[k]) / det;
    }
    k += static_cast<std::size_t>(d.size);
  }
  require(k == z.size(), "solve_block_diag: dimension mismatch");
  return w;
}

double max_abs(const Matrix& a) {
  if (a.empty()) throw std::invalid_argument("max_abs of empty matrix");
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diag(const Matrix& a) {
  if (a.empty()) throw std::invalid_argument("max_abs_diag of empty matrix");
  double m = 0.0;
  for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i)
    m = std::max(m, std::abs(a(i, i)));
  return m;
}

double max_abs_offdiag(const Matrix& a) {
  if (a.empty())
    throw std::invalid_argument("max_abs_offdiag of empty matrix");
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) m = std::max(m, std::abs(a(i, j)));
  return m;
}

std::optional<std::size_t> factor_definite(const Matrix& a, Matrix& lower,
                                           Vector& diag) {
  require(a.rows() == a.cols(), "factor_definite: matrix must be square");
  const std::size_t n = a.rows();
  lower = Matrix::identity(n);
  diag.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double dj = a(j, j);
    for (std::size_t p = 0; p < j; ++p)
      dj -= lower(j, p) * lower(j, p) * diag[p];
    if (!(dj > 0.0)) return j;
    diag[j] = dj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t p = 0; p < j; ++p)
        s -= lower(i, p) * diag[p] * lower(j, p);
      lower(i, j) = s / dj;
    }
  }
  return std::nullopt;
}

std::size_t count_nonzeros(const Matrix& a) {
  return static_cast<std::size_t>(
      std::count_if(a.data().begin(), a.data().end(),
                    [](double v) { return v != 0.0; }));
}

}  // namespace saddle
