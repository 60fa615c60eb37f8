#pragma once

#include "saddle/random.hpp"

namespace saddle::testing {

inline SymmetricDense random_symmetric(std::size_t n, std::mt19937_64& rng) {
  return random::symmetric(n, rng);
}
inline SymmetricDense random_spd(std::size_t n, std::mt19937_64& rng) {
  return random::spd(n, rng);
}
inline Vector random_vector(std::size_t n, std::mt19937_64& rng) {
  return random::vector(n, rng);
}
inline Permutation random_permutation(std::size_t n, std::mt19937_64& rng) {
  return random::permutation(n, rng);
}

}  // namespace saddle::testing
