#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace saddle {

struct SelftestResult {
  std::string module;
  std::string check;
  bool passed = false;
  std::string detail;
};

/// Quick invariant checks over every module. Deterministic for a seed.
std::vector<SelftestResult> run_selftest(std::uint64_t seed = 0);

}  // namespace saddle
