#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "saddle/dense.hpp"

namespace saddle {

/// Constraint Jacobian blocks of a multiple-shooting problem with N segments
/// of state dimension k. Primal variables are ordered segment by segment as
/// (x0^i, t_i); constraints as (g1, match_1, ..., match_{N-1}, g2).
///
/// The primal-dual block B (n x m) has
///   column g1:       [v; 0] in segment 1
///   columns match_i: [-M_i^T; -v_i^T] in segment i, [I; 0] in segment i+1
///   column g2:       [w; beta] in segment N
struct ConstraintBlocks {
  std::size_t segments = 0;  // N
  std::size_t dim = 0;       // k
  std::vector<Matrix> M;     // N-1 blocks, k x k (d Phi / d x0)
  std::vector<Vector> v;     // N-1 vectors (d Phi / d t)
  Vector v_init;             // gradient of g1 w.r.t. x0^1
  Vector w_final;            // gradient of g2 w.r.t. x0^N
  double beta = 0.0;         // gradient of g2 w.r.t. t_N

  std::size_t primal_size() const { return segments * (dim + 1); }
  std::size_t dual_size() const { return (segments - 1) * dim + 2; }
  std::size_t segment_offset(std::size_t i) const { return i * (dim + 1); }

  void validate() const;
};

/// m x n constraint Jacobian (= B^T).
Matrix jacobian_matrix(const ConstraintBlocks& b);
/// B y for a dual vector y (length m).
Vector multiply_b(const ConstraintBlocks& b, std::span<const double> y);
/// B^T x for a primal vector x (length n).
Vector multiply_bt(const ConstraintBlocks& b, std::span<const double> x);

/// K = [[H, B], [B^T, -C]] with block-diagonal H and C = diag(g1, 0.., g2).
struct SaddleBlocks {
  std::vector<Matrix> H;  // N symmetric (k+1) x (k+1)
  ConstraintBlocks B;
  double gamma1 = 0.0;
  double gamma2 = 0.0;

  std::size_t primal_size() const { return B.primal_size(); }
  std::size_t dual_size() const { return B.dual_size(); }
  std::size_t order() const { return primal_size() + dual_size(); }

  void validate() const;
};

class NotPositiveDefinite : public std::runtime_error {
 public:
  explicit NotPositiveDefinite(std::size_t block)
      : std::runtime_error("H block " + std::to_string(block) +
                           " is not positive definite"),
        block_(block) {}
  std::size_t block() const noexcept { return block_; }

 private:
  std::size_t block_;
};

/// A pivot of -S was not positive; index counts Schur diagonal entries.
class IndefiniteSchur : public std::runtime_error {
 public:
  explicit IndefiniteSchur(std::size_t index)
      : std::runtime_error("Schur complement lost definiteness at " +
                           std::to_string(index)),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

SymmetricDense assemble_dense(const SaddleBlocks& k);

struct HFactors {
  std::vector<Matrix> lower;  // unit lower (k+1) x (k+1)
  std::vector<Vector> diag;   // positive (k+1)

  /// max d / min d over all blocks.
  double condition() const;
};

HFactors factor_h(const SaddleBlocks& k);

/// Rows of B^T L_H^-T D_H^-1, stored by their nonzero blocks.
struct XBand {
  Vector s1;              // k+1, segment 1
  std::vector<Matrix> X;  // N-1, k x (k+1), match_i row block in segment i
  std::vector<Matrix> Y;  // N-1, k x (k+1), match_i row block in segment i+1
  Vector s2;              // k+1, segment N
};

XBand compute_x(const SaddleBlocks& k, const HFactors& h);

/// Blocks of -S = C + B^T H^-1 B. For N = 1 the only coupling is `corner`
/// between the two boundary rows.
struct SchurBlocks {
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  Vector w1;              // k, coupling of g1 with match_1
  Vector w2;              // k, coupling of match_{N-1} with g2
  std::vector<Matrix> V;  // N-1 diagonal blocks
  std::vector<Matrix> W;  // N-2 sub-diagonal blocks (match_{i+1}, match_i)
  double corner = 0.0;

  /// Dense -S.
  Matrix assemble_negated() const;
};

SchurBlocks compute_schur(const SaddleBlocks& k, const HFactors& h);
SchurBlocks compute_schur(const SaddleBlocks& k, const HFactors& h,
                          const XBand& x);

/// -S = L_S (-D_S) L_S^T, with the banded L_S kept by blocks.
struct SchurFactors {
  double d1 = 0.0;
  Vector l1;                    // k
  std::vector<Matrix> L_hat;    // N-1 unit lower k x k
  std::vector<Vector> D_hat;    // N-1 positive k
  std::vector<Matrix> L_sub;    // N-2 k x k
  Vector l2;                    // k
  double dN = 0.0;
  double l_corner = 0.0;        // N = 1 only

  /// Diagonal of D_S (all negative when the factorization succeeded).
  Vector d_s() const;
};

SchurFactors factor_schur(const SchurBlocks& s);

struct StructuredFactors {
  std::size_t segments = 0;
  std::size_t dim = 0;
  HFactors h;
  XBand x;
  SchurFactors s;

  std::size_t primal_size() const { return segments * (dim + 1); }
  std::size_t dual_size() const { return (segments - 1) * dim + 2; }

  /// Composite unit lower L = [[L_H, 0], [X^T, L_S]] as a dense matrix.
  Matrix assemble_lower() const;
  /// diag(D_H, D_S).
  Vector diagonal() const;
};

StructuredFactors factor_structured(const SaddleBlocks& k);

/// Solves K u = b. When `flops` is given, the multiply-add count of the
/// solve is added to it.
Vector solve_structured(const StructuredFactors& f, std::span<const double> b,
                        std::size_t* flops = nullptr);

}  // namespace saddle
