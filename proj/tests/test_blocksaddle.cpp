#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "saddle/blocksaddle.hpp"
#include "saddle/factorization.hpp"
#include "saddle/random.hpp"

using namespace saddle;

namespace {

SaddleBlocks identity_instance(std::size_t N, std::size_t k) {
  SaddleBlocks s;
  s.H.assign(N, Matrix::identity(k + 1));
  s.B.segments = N;
  s.B.dim = k;
  s.B.M.assign(N - 1, Matrix::identity(k));
  s.B.v.assign(N - 1, Vector(k, 1.0));
  s.B.v_init.assign(k, 1.0);
  s.B.w_final.assign(k, 1.0);
  s.B.beta = 1.0;
  return s;
}

// Dense X = D_H^-1 L_H^-1 B, built column by column from the full block
// diagonal factors.
Matrix dense_x(const SaddleBlocks& s, const HFactors& h) {
  const std::size_t n = s.primal_size(), m = s.dual_size();
  const std::size_t bs = s.B.dim + 1;
  Matrix L = Matrix::identity(n);
  Vector d(n);
  for (std::size_t i = 0; i < s.B.segments; ++i)
    for (std::size_t p = 0; p < bs; ++p) {
      d[i * bs + p] = h.diag[i][p];
      for (std::size_t q = 0; q < p; ++q)
        L(i * bs + p, i * bs + q) = h.lower[i](p, q);
    }
  const Matrix Bt = jacobian_matrix(s.B);
  Matrix X(n, m);
  for (std::size_t c = 0; c < m; ++c) {
    Vector z = solve_unit_lower(L, Bt.row(c));
    for (std::size_t r = 0; r < n; ++r) X(r, c) = z[r] / d[r];
  }
  return X;
}

// Dense -S = C + B^T H^-1 B with H^-1 applied by solving per column.
Matrix dense_negated_schur(const SaddleBlocks& s) {
  const std::size_t n = s.primal_size(), m = s.dual_size();
  const Matrix H = [&] {
    const SymmetricDense K = assemble_dense(s);
    Matrix h(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) h(i, j) = K(i, j);
    return h;
  }();
  const Factorization fh = factor_unpivoted(SymmetricDense::from_full(H));
  const Matrix Bt = jacobian_matrix(s.B);
  Matrix out(m, m);
  for (std::size_t c = 0; c < m; ++c) {
    const Vector hinv_b = solve_factored(fh.factors, Bt.row(c));
    for (std::size_t r = 0; r < m; ++r) out(r, c) = dot(Bt.row(r), hinv_b);
  }
  out(0, 0) += s.gamma1;
  out(m - 1, m - 1) += s.gamma2;
  return out;
}

// Independent nonzero-pattern enumerator for K by index arithmetic.
bool expected_nonzero(std::size_t r, std::size_t c, std::size_t N,
                      std::size_t k) {
  if (r < c) std::swap(r, c);
  const std::size_t bs = k + 1, n = N * bs, m = (N - 1) * k + 2;
  if (r < n) return r / bs == c / bs;
  const std::size_t dr = r - n;
  if (c >= n) return (dr == 0 && c == n) || (dr == m - 1 && c == n + m - 1);
  const std::size_t seg = c / bs, off = c % bs;
  if (dr == 0) return seg == 0 && off < k;
  if (dr == m - 1) return seg == N - 1;
  const std::size_t i = (dr - 1) / k, row = (dr - 1) % k;
  if (seg == i) return true;
  return seg == i + 1 && off == row;
}

double max_rel_diff(const Matrix& a, const Matrix& b) {
  double scale = std::max(max_abs(a), 1.0), d = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      d = std::max(d, std::abs(a(i, j) - b(i, j)));
  return d / scale;
}

}  // namespace

TEST(Assemble, HandCaseSingleSegment) {
  SaddleBlocks s = identity_instance(1, 1);
  const SymmetricDense K = assemble_dense(s);
  const double expected[4][4] = {
      {1, 0, 1, 1}, {0, 1, 0, 1}, {1, 0, 0, 0}, {1, 1, 0, 0}};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(K(i, j), expected[i][j]);
}

TEST(Assemble, PatternMatchesEnumerator) {
  std::mt19937_64 rng(11);
  const SaddleBlocks s = random::saddle_blocks(3, 2, rng);
  const SymmetricDense K = assemble_dense(s);
  for (std::size_t i = 0; i < K.order(); ++i)
    for (std::size_t j = 0; j < K.order(); ++j) {
      EXPECT_EQ(K(i, j) != 0.0, expected_nonzero(i, j, 3, 2))
          << "(" << i << ", " << j << ")";
      EXPECT_EQ(K(i, j), K(j, i));
    }
}

TEST(Assemble, JacobianProductsAgree) {
  std::mt19937_64 rng(12);
  const SaddleBlocks s = random::saddle_blocks(4, 3, rng);
  const Matrix J = jacobian_matrix(s.B);
  const Vector x = random::vector(s.primal_size(), rng);
  const Vector y = random::vector(s.dual_size(), rng);
  const Vector bt = multiply_bt(s.B, x), jx = multiply(J, x);
  const Vector b = multiply_b(s.B, y), jty = multiply_transposed(J, y);
  for (std::size_t i = 0; i < bt.size(); ++i) EXPECT_NEAR(bt[i], jx[i], 1e-12);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(b[i], jty[i], 1e-12);
}

TEST(Assemble, ValidationRejectsBadInput) {
  SaddleBlocks s = identity_instance(2, 2);
  s.B.beta = 0.0;
  EXPECT_THROW(assemble_dense(s), std::invalid_argument);
  s = identity_instance(2, 2);
  s.H[1](0, 1) = 0.5;
  EXPECT_THROW(assemble_dense(s), std::invalid_argument);
  s = identity_instance(2, 2);
  s.gamma2 = -1.0;
  EXPECT_THROW(assemble_dense(s), std::invalid_argument);
  s = identity_instance(2, 2);
  s.B.M.pop_back();
  EXPECT_THROW(assemble_dense(s), DimensionMismatch);
}

TEST(FactorH, IdentityBlocks) {
  const HFactors h = factor_h(identity_instance(3, 2));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(h.lower[i], Matrix::identity(3));
    EXPECT_EQ(h.diag[i], Vector(3, 1.0));
  }
  EXPECT_EQ(h.condition(), 1.0);
}

TEST(FactorH, HandBlock) {
  SaddleBlocks s = identity_instance(1, 1);
  s.H[0](0, 0) = 4.0;
  s.H[0](0, 1) = s.H[0](1, 0) = 2.0;
  s.H[0](1, 1) = 3.0;
  const HFactors h = factor_h(s);
  EXPECT_EQ(h.lower[0](1, 0), 0.5);
  EXPECT_EQ(h.diag[0], (Vector{4.0, 2.0}));
  EXPECT_EQ(h.condition(), 2.0);
}

TEST(FactorH, IndefiniteBlockIsReported) {
  SaddleBlocks s = identity_instance(3, 1);
  s.H[2](1, 1) = -1.0;
  try {
    factor_h(s);
    FAIL() << "expected NotPositiveDefinite";
  } catch (const NotPositiveDefinite& e) {
    EXPECT_EQ(e.block(), 2u);
  }
}

TEST(ComputeX, IdentityFactors) {
  std::mt19937_64 rng(3);
  SaddleBlocks s = random::saddle_blocks(3, 2, rng);
  s.H.assign(3, Matrix::identity(3));
  const XBand x = compute_x(s, factor_h(s));
  EXPECT_EQ(x.s1, (Vector{s.B.v_init[0], s.B.v_init[1], 0.0}));
  EXPECT_EQ(x.s2, (Vector{s.B.w_final[0], s.B.w_final[1], s.B.beta}));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t p = 0; p < 2; ++p) {
        EXPECT_EQ(x.X[i](c, p), -s.B.M[i](c, p));
        EXPECT_EQ(x.Y[i](c, p), c == p ? 1.0 : 0.0);
      }
      EXPECT_EQ(x.X[i](c, 2), -s.B.v[i][c]);
      EXPECT_EQ(x.Y[i](c, 2), 0.0);
    }
}

TEST(ComputeX, MatchesDenseSolve) {
  std::mt19937_64 rng(4);
  for (std::size_t N : {1u, 2u, 5u}) {
    const SaddleBlocks s = random::saddle_blocks(N, N == 2 ? 1 : 3, rng);
    const HFactors h = factor_h(s);
    StructuredFactors f;
    f.segments = N;
    f.dim = s.B.dim;
    f.h = h;
    f.x = compute_x(s, h);
    f.s = factor_schur(compute_schur(s, h, f.x));
    const Matrix L = f.assemble_lower();
    const Matrix X = dense_x(s, h);
    const std::size_t n = s.primal_size();
    // Rows of X^T sit below L_H; outside the band both must be exactly zero.
    for (std::size_t r = 0; r < s.dual_size(); ++r)
      for (std::size_t c = 0; c < n; ++c) {
        EXPECT_NEAR(L(n + r, c), X(c, r), 1e-12);
        if (!expected_nonzero(n + r, c, N, s.B.dim)) {
          const std::size_t seg = c / (s.B.dim + 1);
          const bool in_band =
              (r == 0 && seg == 0) || (r == s.dual_size() - 1 && seg == N - 1) ||
              (r > 0 && r + 1 < s.dual_size() &&
               (seg == (r - 1) / s.B.dim || seg == (r - 1) / s.B.dim + 1));
          if (!in_band) EXPECT_EQ(L(n + r, c), 0.0);
        }
      }
  }
}

TEST(ComputeSchur, IdentityHessian) {
  std::mt19937_64 rng(5);
  SaddleBlocks s = random::saddle_blocks(3, 2, rng);
  s.H.assign(3, Matrix::identity(3));
  s.gamma1 = s.gamma2 = 0.0;
  const SchurBlocks S = compute_schur(s, factor_h(s));
  EXPECT_NEAR(S.alpha1, dot(s.B.v_init, s.B.v_init), 1e-14);
  for (std::size_t i = 0; i < 2; ++i) {
    const Matrix MMt = multiply(s.B.M[i], transpose(s.B.M[i]));
    for (std::size_t p = 0; p < 2; ++p)
      for (std::size_t q = 0; q < 2; ++q)
        EXPECT_NEAR(S.V[i](p, q),
                    MMt(p, q) + s.B.v[i][p] * s.B.v[i][q] + (p == q ? 1.0 : 0.0),
                    1e-13);
  }
}

TEST(ComputeSchur, GammaOnlyShiftsCorners) {
  std::mt19937_64 rng(6);
  SaddleBlocks s = random::saddle_blocks(3, 2, rng);
  const HFactors h = factor_h(s);
  const SchurBlocks base = compute_schur(s, h);
  s.gamma1 += 5.0;
  const SchurBlocks shifted = compute_schur(s, h);
  EXPECT_EQ(shifted.alpha1, base.alpha1 + 5.0);
  EXPECT_EQ(shifted.alpha2, base.alpha2);
  EXPECT_EQ(shifted.w1, base.w1);
  EXPECT_EQ(shifted.w2, base.w2);
  EXPECT_EQ(shifted.V, base.V);
  EXPECT_EQ(shifted.W, base.W);
}

TEST(ComputeSchur, MatchesDenseOracle) {
  std::mt19937_64 rng(7);
  for (std::size_t N : {1u, 2u, 4u}) {
    const SaddleBlocks s = random::saddle_blocks(N, 3, rng);
    const Matrix S = compute_schur(s, factor_h(s)).assemble_negated();
    EXPECT_LE(max_rel_diff(dense_negated_schur(s), S), 1e-10) << "N=" << N;
  }
}

TEST(FactorSchur, NegatedIdentity) {
  SchurBlocks S;
  S.alpha1 = S.alpha2 = 1.0;
  S.w1 = S.w2 = Vector(2, 0.0);
  S.V.assign(3, Matrix::identity(2));
  S.W.assign(2, Matrix(2, 2));
  const SchurFactors f = factor_schur(S);
  EXPECT_EQ(f.d_s(), Vector(8, -1.0));
  for (const auto& l : f.L_hat) EXPECT_EQ(l, Matrix::identity(2));
  for (const auto& l : f.L_sub) EXPECT_EQ(l, Matrix(2, 2));
  EXPECT_EQ(f.l1, Vector(2, 0.0));
  EXPECT_EQ(f.l2, Vector(2, 0.0));
}

TEST(FactorSchur, ThreeSegmentScalarExample) {
  SchurBlocks S;
  S.alpha1 = 1.0;
  S.w1 = {1.0};
  S.V = {Matrix(1, 1, 2.0), Matrix(1, 1, 2.0)};
  S.W = {Matrix(1, 1, 1.0)};
  S.w2 = {1.0};
  S.alpha2 = 2.0;
  const SchurFactors f = factor_schur(S);
  EXPECT_EQ(f.d1, 1.0);
  EXPECT_EQ(f.D_hat[0], Vector{1.0});
  EXPECT_EQ(f.D_hat[1], Vector{1.0});
  EXPECT_EQ(f.dN, 1.0);
  EXPECT_EQ(f.l1, Vector{1.0});
  EXPECT_EQ(f.L_sub[0](0, 0), 1.0);
  EXPECT_EQ(f.l2, Vector{1.0});
}

TEST(FactorSchur, MatchesDenseUnpivoted) {
  std::mt19937_64 rng(8);
  for (std::size_t N : {1u, 2u, 3u, 6u}) {
    const SaddleBlocks s = random::saddle_blocks(N, 3, rng);
    const SchurBlocks S = compute_schur(s, factor_h(s));
    const SchurFactors f = factor_schur(S);
    const Factorization oracle =
        factor_unpivoted(SymmetricDense::from_lower(S.assemble_negated()));
    const Vector d = f.d_s();
    ASSERT_EQ(d.size(), oracle.factors.dblocks.size());
    for (std::size_t i = 0; i < d.size(); ++i)
      EXPECT_NEAR(-d[i], oracle.factors.dblocks[i].a,
                  1e-10 * std::abs(oracle.factors.dblocks[i].a));
  }
}

TEST(FactorSchur, IndefiniteIsReported) {
  SchurBlocks S;
  S.alpha1 = 1.0;
  S.w1 = {2.0};
  S.V = {Matrix(1, 1, 1.0)};
  S.w2 = {0.0};
  S.alpha2 = 1.0;
  try {
    factor_schur(S);
    FAIL() << "expected IndefiniteSchur";
  } catch (const IndefiniteSchur& e) {
    EXPECT_EQ(e.index(), 1u);
  }
}

TEST(FactorStructured, MatchesDenseUnpivotedAndInertia) {
  std::mt19937_64 rng(9);
  for (std::size_t N : {1u, 2u, 5u}) {
    for (std::size_t k : {1u, 3u}) {
      const SaddleBlocks s = random::saddle_blocks(N, k, rng);
      const StructuredFactors f = factor_structured(s);
      const SymmetricDense K = assemble_dense(s);
      const Factorization oracle = factor_unpivoted(K);
      const Vector d = f.diagonal();
      std::size_t pos = 0, neg = 0;
      for (std::size_t i = 0; i < d.size(); ++i) {
        const double o = oracle.factors.dblocks[i].a;
        EXPECT_NEAR(d[i], o, 1e-9 * std::abs(o)) << "N=" << N << " k=" << k;
        (d[i] > 0 ? pos : neg)++;
      }
      EXPECT_EQ(pos, s.primal_size());
      EXPECT_EQ(neg, s.dual_size());

      LdltFactors lf;
      lf.lower = f.assemble_lower();
      for (double x : d) lf.dblocks.push_back(DBlock{1, x, 0.0, 0.0});
      lf.plan.perm = Permutation::identity(K.order());
      lf.plan.pivot_sizes.assign(K.order(), 1);
      EXPECT_LE(reconstruction_error(K, lf), 1e-10 * max_abs(K));
    }
  }
}

TEST(FactorStructured, SchurFactorStaysBanded) {
  std::mt19937_64 rng(10);
  const std::size_t N = 5, k = 2;
  const SaddleBlocks s = random::saddle_blocks(N, k, rng);
  const Matrix L = factor_structured(s).assemble_lower();
  const std::size_t n = s.primal_size(), m = s.dual_size();
  auto block_of = [&](std::size_t r) -> long {
    if (r == 0) return -1;
    if (r == m - 1) return static_cast<long>(N - 1);
    return static_cast<long>((r - 1) / k);
  };
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < r; ++c)
      if (block_of(r) - block_of(c) > 1) EXPECT_EQ(L(n + r, n + c), 0.0);
}

TEST(SolveStructured, SingleSegmentHandCase) {
  // K = [[1,0,1,1],[0,1,0,1],[1,0,0,0],[1,1,0,0]], K u = (1,2,3,4)
  // gives u = (3, 1, -3, 1) by direct substitution.
  const StructuredFactors f = factor_structured(identity_instance(1, 1));
  const Vector u = solve_structured(f, Vector{1.0, 2.0, 3.0, 4.0});
  const Vector expected{3.0, 1.0, -3.0, 1.0};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(u[i], expected[i], 1e-14);
}

TEST(SolveStructured, ResidualOnRandomInstances) {
  std::mt19937_64 rng(13);
  for (std::size_t N : {1u, 2u, 3u, 7u}) {
    const SaddleBlocks s = random::saddle_blocks(N, 4, rng);
    const SymmetricDense K = assemble_dense(s);
    const Vector b = random::vector(K.order(), rng);
    const Vector u = solve_structured(factor_structured(s), b);
    Vector r = multiply(K.full(), u);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
    EXPECT_LE(norm2(r) / norm2(b), 1e-8) << "N=" << N;
  }
}

TEST(SolveStructured, CostGrowsLinearlyInSegments) {
  std::mt19937_64 rng(14);
  std::vector<std::size_t> flops;
  for (std::size_t N : {4u, 8u, 16u}) {
    const SaddleBlocks s = random::saddle_blocks(N, 4, rng);
    const StructuredFactors f = factor_structured(s);
    std::size_t count = 0;
    solve_structured(f, Vector(s.order(), 1.0), &count);
    flops.push_back(count);
  }
  // Affine in N: doubling the segment count doubles the increment.
  EXPECT_GT(flops[1], flops[0]);
  EXPECT_EQ(flops[2] - flops[1], 2 * (flops[1] - flops[0]));
}
