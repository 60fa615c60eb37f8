#pragma once

#include <algorithm>
#include <random>

#include "saddle/blocksaddle.hpp"
#include "saddle/dense.hpp"

/// Random instance generators shared by the test suites and `selftest`.
namespace saddle::random {

inline SymmetricDense symmetric(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  SymmetricDense a(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) a.set(i, j, dist(rng));
  return a;
}

inline Matrix gaussian(std::size_t rows, std::size_t cols,
                       std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix g(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) g(i, j) = dist(rng);
  return g;
}

/// G^T G + n I.
inline SymmetricDense spd(std::size_t n, std::mt19937_64& rng) {
  const Matrix g = gaussian(n, n, rng);
  Matrix a = multiply(transpose(g), g);
  for (std::size_t i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);
  return SymmetricDense::from_lower(a);
}

inline Vector vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline Permutation permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = i;
  std::shuffle(f.begin(), f.end(), rng);
  return Permutation(std::move(f));
}

/// SPD H blocks and a B whose identity blocks keep it full column rank.
/// The boundary gradients are kept away from zero so B stays full rank
/// for N = 1 as well.
inline SaddleBlocks saddle_blocks(std::size_t N, std::size_t k,
                                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.5, 1.5);
  SaddleBlocks s;
  for (std::size_t i = 0; i < N; ++i) s.H.push_back(spd(k + 1, rng).full());
  ConstraintBlocks& b = s.B;
  b.segments = N;
  b.dim = k;
  for (std::size_t i = 0; i + 1 < N; ++i) {
    b.M.push_back(gaussian(k, k, rng));
    b.v.push_back(vector(k, rng));
  }
  b.v_init = vector(k, rng);
  b.v_init[0] = unit(rng);
  b.w_final = vector(k, rng);
  b.beta = unit(rng);
  s.gamma1 = unit(rng) - 0.5;
  s.gamma2 = unit(rng) - 0.5;
  return s;
}

}  // namespace saddle::random
