#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace saddle {

using Vector = std::vector<double>;

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteEntry : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by the block-diagonal solve when a 1x1 pivot is zero or a 2x2
/// pivot has zero determinant.
class SingularPivot : public std::runtime_error {
 public:
  explicit SingularPivot(std::size_t block)
      : std::runtime_error("singular pivot block " + std::to_string(block)),
        block_(block) {}
  std::size_t block() const noexcept { return block_; }

 private:
  std::size_t block_;
};

/// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix transpose(const Matrix& a);
Matrix multiply(const Matrix& a, const Matrix& b);
Vector multiply(const Matrix& a, std::span<const double> x);
/// y = a^T x
Vector multiply_transposed(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
double norm_inf(std::span<const double> x);
double norm1(std::span<const double> x);

/// Symmetric n x n matrix, stored densely with both triangles mirrored.
class SymmetricDense {
 public:
  SymmetricDense() = default;
  explicit SymmetricDense(std::size_t n) : full_(n, n) {}

  /// Builds from the lower triangle of `a` (the upper triangle is ignored).
  static SymmetricDense from_lower(const Matrix& a);
  /// Builds from a full square matrix; throws unless it is exactly symmetric.
  static SymmetricDense from_full(const Matrix& a);

  std::size_t order() const noexcept { return full_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return full_(i, j); }

  /// Sets a_ij and a_ji. Throws NonFiniteEntry for NaN/Inf.
  void set(std::size_t i, std::size_t j, double value);

  const Matrix& full() const noexcept { return full_; }

 private:
  Matrix full_;
};

/// Bijection on {0..n-1}; maps position i of the permuted object to index
/// forward[i] of the original.
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<std::size_t> forward);

  static Permutation identity(std::size_t n);

  std::size_t order() const noexcept { return forward_.size(); }
  std::size_t operator[](std::size_t i) const { return forward_[i]; }
  const std::vector<std::size_t>& forward() const noexcept { return forward_; }

  Permutation inverse() const;
  bool is_identity() const;

  /// out[i] = x[p(i)], i.e. P x.
  Vector permute(std::span<const double> x) const;
  /// out[p(i)] = y[i], i.e. P^T y.
  Vector unpermute(std::span<const double> y) const;

  bool operator==(const Permutation&) const = default;

 private:
  std::vector<std::size_t> forward_;
};

/// compose(p, q)(i) = p(q(i)).
Permutation compose(const Permutation& p, const Permutation& q);

/// result_ij = A_{p(i), p(j)}, i.e. P A P^T.
SymmetricDense apply_permutation(const Permutation& p, const SymmetricDense& a);

struct PivotPlan {
  Permutation perm;
  std::vector<int> pivot_sizes;

  /// Throws std::invalid_argument unless sizes are in {1,2} and sum to the
  /// permutation order.
  void validate() const;
  bool operator==(const PivotPlan&) const = default;
};

/// A 1x1 pivot (a) or a symmetric 2x2 pivot [[a, b], [b, c]].
struct DBlock {
  int size = 1;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double determinant() const { return size == 1 ? a : a * c - b * b; }
  bool operator==(const DBlock&) const = default;
};

struct LdltFactors {
  Matrix lower;  // unit lower triangular; zero inside 2x2 pivot column pairs
  std::vector<DBlock> dblocks;
  PivotPlan plan;
};

/// L * D * L^T in the permuted ordering.
Matrix reconstruct(const LdltFactors& f);
/// Block-diagonal D as a dense matrix.
Matrix block_diagonal(std::span<const DBlock> dblocks);

Vector solve_unit_lower(const Matrix& lower, std::span<const double> b);
/// Solves L^T u = w given the unit lower triangular L.
Vector solve_unit_upper(const Matrix& lower, std::span<const double> w);
Vector solve_block_diag(std::span<const DBlock> dblocks,
                        std::span<const double> z);

double max_abs(const Matrix& a);
double max_abs_diag(const Matrix& a);
double max_abs_offdiag(const Matrix& a);
inline double max_abs(const SymmetricDense& a) { return max_abs(a.full()); }
inline double max_abs_diag(const SymmetricDense& a) {
  return max_abs_diag(a.full());
}
inline double max_abs_offdiag(const SymmetricDense& a) {
  return max_abs_offdiag(a.full());
}

/// Unpivoted L D L^T of a matrix expected to be positive definite.
/// Returns the index of the first pivot <= 0, or nullopt on success.
std::optional<std::size_t> factor_definite(const Matrix& a, Matrix& lower,
                                           Vector& diag);

/// Number of exactly nonzero entries.
std::size_t count_nonzeros(const Matrix& a);

}  // namespace saddle
