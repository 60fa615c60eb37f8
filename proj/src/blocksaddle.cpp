#include "saddle/blocksaddle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace saddle {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw DimensionMismatch(what);
}

// Multiply-add counter; a null target discards counts.
struct Flops {
  std::size_t* target;
  void add(std::size_t n) const {
    if (target) *target += n;
  }
};

// D^-1 L^-1 r for a unit lower L and diagonal D.
Vector row_transform(const Matrix& lower, const Vector& diag,
                     std::span<const double> r) {
  Vector z = solve_unit_lower(lower, r);
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (diag[i] == 0.0) throw SingularPivot(i);
    z[i] /= diag[i];
  }
  return z;
}

// A D B^T for row-stored A, B sharing the column space of D.
Matrix weighted_outer(const Matrix& a, const Vector& d, const Matrix& b) {
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < d.size(); ++p) s += a(i, p) * d[p] * b(j, p);
      out(i, j) = s;
    }
  return out;
}

Vector weighted_apply(const Matrix& a, const Vector& d,
                      std::span<const double> x) {
  Vector out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t p = 0; p < d.size(); ++p) s += a(i, p) * d[p] * x[p];
    out[i] = s;
  }
  return out;
}

double weighted_dot(std::span<const double> x, const Vector& d,
                    std::span<const double> y) {
  double s = 0.0;
  for (std::size_t p = 0; p < d.size(); ++p) s += x[p] * d[p] * y[p];
  return s;
}

void lower_in_place(const Matrix& lower, std::span<double> x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto li = lower.row(i);
    for (std::size_t j = 0; j < i; ++j) x[i] -= li[j] * x[j];
  }
}

void upper_in_place(const Matrix& lower, std::span<double> x) {
  for (std::size_t i = x.size(); i-- > 0;) {
    auto li = lower.row(i);
    for (std::size_t j = 0; j < i; ++j) x[j] -= li[j] * x[i];
  }
}

}  // namespace

void ConstraintBlocks::validate() const {
  require(segments >= 1 && dim >= 1, "constraint blocks need N >= 1, k >= 1");
  require(M.size() == segments - 1 && v.size() == segments - 1,
          "expected N-1 matching blocks");
  for (std::size_t i = 0; i + 1 < segments; ++i)
    require(M[i].rows() == dim && M[i].cols() == dim && v[i].size() == dim,
            "matching block has wrong size");
  require(v_init.size() == dim && w_final.size() == dim,
          "boundary gradient has wrong size");
  if (beta == 0.0) throw std::invalid_argument("beta must be nonzero");
}

Matrix jacobian_matrix(const ConstraintBlocks& b) {
  b.validate();
  const std::size_t k = b.dim, N = b.segments;
  Matrix J(b.dual_size(), b.primal_size());
  for (std::size_t r = 0; r < k; ++r) J(0, r) = b.v_init[r];
  for (std::size_t i = 0; i + 1 < N; ++i) {
    const std::size_t row0 = 1 + i * k;
    const std::size_t seg = b.segment_offset(i);
    const std::size_t next = b.segment_offset(i + 1);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t r = 0; r < k; ++r) J(row0 + c, seg + r) = -b.M[i](c, r);
      J(row0 + c, seg + k) = -b.v[i][c];
      J(row0 + c, next + c) = 1.0;
    }
  }
  const std::size_t last = b.segment_offset(N - 1);
  for (std::size_t r = 0; r < k; ++r) J(b.dual_size() - 1, last + r) = b.w_final[r];
  J(b.dual_size() - 1, last + k) = b.beta;
  return J;
}

Vector multiply_b(const ConstraintBlocks& b, std::span<const double> y) {
  require(y.size() == b.dual_size(), "multiply_b: length mismatch");
  const std::size_t k = b.dim, N = b.segments;
  Vector out(b.primal_size(), 0.0);
  for (std::size_t r = 0; r < k; ++r) out[r] += b.v_init[r] * y[0];
  for (std::size_t i = 0; i + 1 < N; ++i) {
    const std::size_t seg = b.segment_offset(i);
    const std::size_t next = b.segment_offset(i + 1);
    for (std::size_t c = 0; c < k; ++c) {
      const double yc = y[1 + i * k + c];
      for (std::size_t r = 0; r < k; ++r) out[seg + r] -= b.M[i](c, r) * yc;
      out[seg + k] -= b.v[i][c] * yc;
      out[next + c] += yc;
    }
  }
  const std::size_t last = b.segment_offset(N - 1);
  const double yl = y[b.dual_size() - 1];
  for (std::size_t r = 0; r < k; ++r) out[last + r] += b.w_final[r] * yl;
  out[last + k] += b.beta * yl;
  return out;
}

Vector multiply_bt(const ConstraintBlocks& b, std::span<const double> x) {
  require(x.size() == b.primal_size(), "multiply_bt: length mismatch");
  const std::size_t k = b.dim, N = b.segments;
  Vector out(b.dual_size(), 0.0);
  for (std::size_t r = 0; r < k; ++r) out[0] += b.v_init[r] * x[r];
  for (std::size_t i = 0; i + 1 < N; ++i) {
    const std::size_t seg = b.segment_offset(i);
    const std::size_t next = b.segment_offset(i + 1);
    for (std::size_t c = 0; c < k; ++c) {
      double s = x[next + c] - b.v[i][c] * x[seg + k];
      for (std::size_t r = 0; r < k; ++r) s -= b.M[i](c, r) * x[seg + r];
      out[1 + i * k + c] = s;
    }
  }
  const std::size_t last = b.segment_offset(N - 1);
  double s = b.beta * x[last + k];
  for (std::size_t r = 0; r < k; ++r) s += b.w_final[r] * x[last + r];
  out[b.dual_size() - 1] = s;
  return out;
}

void SaddleBlocks::validate() const {
  B.validate();
  require(H.size() == B.segments, "expected N H blocks");
  for (const auto& h : H) {
    require(h.rows() == B.dim + 1 && h.cols() == B.dim + 1,
            "H block has wrong size");
    for (std::size_t i = 0; i < h.rows(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (h(i, j) != h(j, i))
          throw std::invalid_argument("H block is not symmetric");
  }
  if (!(gamma1 >= 0.0 && gamma2 >= 0.0))
    throw std::invalid_argument("gamma values must be nonnegative");
}

SymmetricDense assemble_dense(const SaddleBlocks& k) {
  k.validate();
  const std::size_t n = k.primal_size(), m = k.dual_size();
  const std::size_t bs = k.B.dim + 1;
  SymmetricDense K(n + m);
  for (std::size_t i = 0; i < k.B.segments; ++i) {
    const std::size_t off = k.B.segment_offset(i);
    for (std::size_t r = 0; r < bs; ++r)
      for (std::size_t c = 0; c <= r; ++c) K.set(off + r, off + c, k.H[i](r, c));
  }
  const Matrix J = jacobian_matrix(k.B);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c)
      if (J(r, c) != 0.0) K.set(n + r, c, J(r, c));
  K.set(n, n, -k.gamma1);
  // For N = 1 with m = 2 the two corners are distinct entries.
  K.set(n + m - 1, n + m - 1, -k.gamma2);
  return K;
}

double HFactors::condition() const {
  double lo = INFINITY, hi = 0.0;
  for (const auto& d : diag)
    for (double x : d) {
      lo = std::min(lo, std::abs(x));
      hi = std::max(hi, std::abs(x));
    }
  return lo > 0.0 ? hi / lo : INFINITY;
}

HFactors factor_h(const SaddleBlocks& k) {
  HFactors f;
  f.lower.resize(k.H.size());
  f.diag.resize(k.H.size());
  for (std::size_t i = 0; i < k.H.size(); ++i)
    if (factor_definite(k.H[i], f.lower[i], f.diag[i]))
      throw NotPositiveDefinite(i);
  return f;
}

XBand compute_x(const SaddleBlocks& k, const HFactors& h) {
  const ConstraintBlocks& b = k.B;
  const std::size_t dim = b.dim, N = b.segments, bs = dim + 1;
  require(h.lower.size() == N && h.diag.size() == N,
          "compute_x: factor count mismatch");
  XBand x;
  Vector r(bs, 0.0);
  std::copy(b.v_init.begin(), b.v_init.end(), r.begin());
  x.s1 = row_transform(h.lower[0], h.diag[0], r);

  x.X.assign(N - 1, Matrix(dim, bs));
  x.Y.assign(N - 1, Matrix(dim, bs));
  for (std::size_t i = 0; i + 1 < N; ++i) {
    for (std::size_t c = 0; c < dim; ++c) {
      for (std::size_t p = 0; p < dim; ++p) r[p] = -b.M[i](c, p);
      r[dim] = -b.v[i][c];
      Vector row = row_transform(h.lower[i], h.diag[i], r);
      std::copy(row.begin(), row.end(), x.X[i].row(c).begin());

      std::fill(r.begin(), r.end(), 0.0);
      r[c] = 1.0;
      row = row_transform(h.lower[i + 1], h.diag[i + 1], r);
      std::copy(row.begin(), row.end(), x.Y[i].row(c).begin());
    }
  }

  std::copy(b.w_final.begin(), b.w_final.end(), r.begin());
  r[dim] = b.beta;
  x.s2 = row_transform(h.lower[N - 1], h.diag[N - 1], r);
  return x;
}

SchurBlocks compute_schur(const SaddleBlocks& k, const HFactors& h) {
  return compute_schur(k, h, compute_x(k, h));
}

SchurBlocks compute_schur(const SaddleBlocks& k, const HFactors& h,
                          const XBand& x) {
  const std::size_t N = k.B.segments;
  const auto& D = h.diag;
  SchurBlocks s;
  s.alpha1 = weighted_dot(x.s1, D[0], x.s1) + k.gamma1;
  s.alpha2 = weighted_dot(x.s2, D[N - 1], x.s2) + k.gamma2;
  if (N == 1) {
    s.corner = weighted_dot(x.s1, D[0], x.s2);
    return s;
  }
  s.w1 = weighted_apply(x.X[0], D[0], x.s1);
  s.w2 = weighted_apply(x.Y[N - 2], D[N - 1], x.s2);
  s.V.resize(N - 1);
  for (std::size_t i = 0; i + 1 < N; ++i) {
    s.V[i] = weighted_outer(x.X[i], D[i], x.X[i]);
    const Matrix y = weighted_outer(x.Y[i], D[i + 1], x.Y[i]);
    for (std::size_t p = 0; p < y.rows(); ++p)
      for (std::size_t q = 0; q < y.cols(); ++q) s.V[i](p, q) += y(p, q);
  }
  s.W.resize(N - 2);
  for (std::size_t i = 0; i + 2 < N; ++i)
    s.W[i] = weighted_outer(x.X[i + 1], D[i + 1], x.Y[i]);
  return s;
}

Matrix SchurBlocks::assemble_negated() const {
  const std::size_t blocks = V.size();
  const std::size_t k = blocks ? V[0].rows() : 0;
  const std::size_t m = blocks * k + 2;
  Matrix S(m, m);
  S(0, 0) = alpha1;
  S(m - 1, m - 1) = alpha2;
  if (blocks == 0) {
    S(0, 1) = S(1, 0) = corner;
    return S;
  }
  for (std::size_t c = 0; c < k; ++c) {
    S(1 + c, 0) = S(0, 1 + c) = w1[c];
    const std::size_t r = 1 + (blocks - 1) * k + c;
    S(m - 1, r) = S(r, m - 1) = w2[c];
  }
  for (std::size_t i = 0; i < blocks; ++i) {
    const std::size_t o = 1 + i * k;
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t q = 0; q < k; ++q) S(o + p, o + q) = V[i](p, q);
  }
  for (std::size_t i = 0; i < W.size(); ++i) {
    const std::size_t ro = 1 + (i + 1) * k, co = 1 + i * k;
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t q = 0; q < k; ++q)
        S(ro + p, co + q) = S(co + q, ro + p) = W[i](p, q);
  }
  return S;
}

Vector SchurFactors::d_s() const {
  Vector d;
  d.push_back(-d1);
  for (const auto& dh : D_hat)
    for (double x : dh) d.push_back(-x);
  d.push_back(-dN);
  return d;
}

SchurFactors factor_schur(const SchurBlocks& s) {
  SchurFactors f;
  if (!(s.alpha1 > 0.0)) throw IndefiniteSchur(0);
  f.d1 = s.alpha1;
  const std::size_t blocks = s.V.size();
  if (blocks == 0) {
    f.l_corner = s.corner / f.d1;
    f.dN = s.alpha2 - f.l_corner * f.d1 * f.l_corner;
    if (!(f.dN > 0.0)) throw IndefiniteSchur(1);
    return f;
  }
  const std::size_t k = s.V[0].rows();
  f.l1.resize(k);
  for (std::size_t c = 0; c < k; ++c) f.l1[c] = s.w1[c] / f.d1;

  f.L_hat.resize(blocks);
  f.D_hat.resize(blocks);
  f.L_sub.resize(blocks - 1);
  // Only the previous (L_hat, D_hat) pair is read while forming block i.
  for (std::size_t i = 0; i < blocks; ++i) {
    Matrix vhat = s.V[i];
    if (i == 0) {
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t q = 0; q < k; ++q)
          vhat(p, q) -= f.l1[p] * f.d1 * f.l1[q];
    } else {
      Matrix& sub = f.L_sub[i - 1];
      sub = Matrix(k, k);
      for (std::size_t p = 0; p < k; ++p) {
        const Vector row =
            row_transform(f.L_hat[i - 1], f.D_hat[i - 1], s.W[i - 1].row(p));
        std::copy(row.begin(), row.end(), sub.row(p).begin());
      }
      const Matrix corr = weighted_outer(sub, f.D_hat[i - 1], sub);
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t q = 0; q < k; ++q) vhat(p, q) -= corr(p, q);
    }
    // Symmetrize the update so factor_definite sees the lower triangle only.
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t q = 0; q < p; ++q) vhat(q, p) = vhat(p, q);
    if (auto bad = factor_definite(vhat, f.L_hat[i], f.D_hat[i]))
      throw IndefiniteSchur(1 + i * k + *bad);
  }
  f.l2 = row_transform(f.L_hat.back(), f.D_hat.back(), s.w2);
  f.dN = s.alpha2 - weighted_dot(f.l2, f.D_hat.back(), f.l2);
  if (!(f.dN > 0.0)) throw IndefiniteSchur(1 + blocks * k);
  return f;
}

StructuredFactors factor_structured(const SaddleBlocks& k) {
  k.validate();
  StructuredFactors f;
  f.segments = k.B.segments;
  f.dim = k.B.dim;
  f.h = factor_h(k);
  f.x = compute_x(k, f.h);
  f.s = factor_schur(compute_schur(k, f.h, f.x));
  return f;
}

Matrix StructuredFactors::assemble_lower() const {
  const std::size_t n = primal_size(), m = dual_size();
  const std::size_t k = dim, bs = dim + 1, N = segments;
  Matrix L = Matrix::identity(n + m);
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t o = i * bs;
    for (std::size_t p = 0; p < bs; ++p)
      for (std::size_t q = 0; q < p; ++q) L(o + p, o + q) = h.lower[i](p, q);
  }
  for (std::size_t q = 0; q < bs; ++q) {
    L(n, q) = x.s1[q];
    L(n + m - 1, (N - 1) * bs + q) = x.s2[q];
  }
  for (std::size_t i = 0; i + 1 < N; ++i)
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t q = 0; q < bs; ++q) {
        L(n + 1 + i * k + c, i * bs + q) = x.X[i](c, q);
        L(n + 1 + i * k + c, (i + 1) * bs + q) = x.Y[i](c, q);
      }

  if (N == 1) {
    L(n + 1, n) = s.l_corner;
    return L;
  }
  const std::size_t d0 = n + 1;
  for (std::size_t c = 0; c < k; ++c) {
    L(d0 + c, n) = s.l1[c];
    L(n + m - 1, d0 + (N - 2) * k + c) = s.l2[c];
  }
  for (std::size_t i = 0; i + 1 < N; ++i)
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t q = 0; q < p; ++q)
        L(d0 + i * k + p, d0 + i * k + q) = s.L_hat[i](p, q);
  for (std::size_t i = 0; i < s.L_sub.size(); ++i)
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t q = 0; q < k; ++q)
        L(d0 + (i + 1) * k + p, d0 + i * k + q) = s.L_sub[i](p, q);
  return L;
}

Vector StructuredFactors::diagonal() const {
  Vector d;
  for (const auto& dh : h.diag) d.insert(d.end(), dh.begin(), dh.end());
  const Vector ds = s.d_s();
  d.insert(d.end(), ds.begin(), ds.end());
  return d;
}

Vector solve_structured(const StructuredFactors& f, std::span<const double> b,
                        std::size_t* flops) {
  const std::size_t n = f.primal_size(), m = f.dual_size();
  require(b.size() == n + m, "solve_structured: length mismatch");
  const std::size_t k = f.dim, bs = k + 1, N = f.segments;
  const Flops fl{flops};
  const std::size_t tri_h = bs * (bs - 1) / 2, tri_s = k * (k - 1) / 2;
  Vector z(b.begin(), b.end());
  auto seg = [&](std::size_t i) {
    return std::span<double>(z).subspan(i * bs, bs);
  };
  auto dual = [&](std::size_t i) {
    return std::span<double>(z).subspan(n + 1 + i * k, k);
  };
  double& g1 = z[n];
  double& g2 = z[n + m - 1];

  // L z = b: L_H on each segment, then L_S on b_d - X^T z_p.
  for (std::size_t i = 0; i < N; ++i) {
    lower_in_place(f.h.lower[i], seg(i));
    fl.add(tri_h);
  }
  g1 -= dot(f.x.s1, seg(0));
  g2 -= dot(f.x.s2, seg(N - 1));
  fl.add(2 * bs);
  for (std::size_t i = 0; i + 1 < N; ++i) {
    auto d = dual(i);
    for (std::size_t c = 0; c < k; ++c)
      d[c] -= dot(f.x.X[i].row(c), seg(i)) + dot(f.x.Y[i].row(c), seg(i + 1));
    fl.add(2 * k * bs);
  }
  if (N == 1) {
    g2 -= f.s.l_corner * g1;
    fl.add(1);
  } else {
    auto d0 = dual(0);
    for (std::size_t c = 0; c < k; ++c) d0[c] -= f.s.l1[c] * g1;
    lower_in_place(f.s.L_hat[0], d0);
    fl.add(k + tri_s);
    for (std::size_t i = 1; i + 1 < N; ++i) {
      auto d = dual(i);
      auto prev = dual(i - 1);
      for (std::size_t c = 0; c < k; ++c) d[c] -= dot(f.s.L_sub[i - 1].row(c), prev);
      lower_in_place(f.s.L_hat[i], d);
      fl.add(k * k + tri_s);
    }
    g2 -= dot(f.s.l2, dual(N - 2));
    fl.add(k);
  }

  // D w = z.
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t p = 0; p < bs; ++p) seg(i)[p] /= f.h.diag[i][p];
  g1 /= -f.s.d1;
  for (std::size_t i = 0; i + 1 < N; ++i)
    for (std::size_t p = 0; p < k; ++p) dual(i)[p] /= -f.s.D_hat[i][p];
  g2 /= -f.s.dN;
  fl.add(n + m);

  // L^T u = w: L_S^T on the dual part, then L_H^T on w_p - X u_d.
  if (N == 1) {
    g1 -= f.s.l_corner * g2;
    fl.add(1);
  } else {
    auto last = dual(N - 2);
    for (std::size_t c = 0; c < k; ++c) last[c] -= f.s.l2[c] * g2;
    upper_in_place(f.s.L_hat[N - 2], last);
    fl.add(k + tri_s);
    for (std::size_t i = N - 2; i-- > 0;) {
      auto d = dual(i);
      auto next = dual(i + 1);
      const Matrix& sub = f.s.L_sub[i];
      for (std::size_t c = 0; c < k; ++c)
        for (std::size_t q = 0; q < k; ++q) d[q] -= sub(c, q) * next[c];
      upper_in_place(f.s.L_hat[i], d);
      fl.add(k * k + tri_s);
    }
    g1 -= dot(f.s.l1, dual(0));
    fl.add(k);
  }
  for (std::size_t p = 0; p < bs; ++p) {
    seg(0)[p] -= f.x.s1[p] * g1;
    seg(N - 1)[p] -= f.x.s2[p] * g2;
  }
  fl.add(2 * bs);
  for (std::size_t i = 0; i + 1 < N; ++i) {
    auto d = dual(i);
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t p = 0; p < bs; ++p) {
        seg(i)[p] -= f.x.X[i](c, p) * d[c];
        seg(i + 1)[p] -= f.x.Y[i](c, p) * d[c];
      }
    fl.add(2 * k * bs);
  }
  for (std::size_t i = 0; i < N; ++i) {
    upper_in_place(f.h.lower[i], seg(i));
    fl.add(tri_h);
  }
  return z;
}

}  // namespace saddle
