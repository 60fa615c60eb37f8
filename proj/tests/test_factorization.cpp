#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "random_matrices.hpp"
#include "saddle/factorization.hpp"

using namespace saddle;
using saddle::testing::random_spd;
using saddle::testing::random_symmetric;
using saddle::testing::random_vector;

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

SymmetricDense swap2() {
  SymmetricDense a(2);
  a.set(1, 0, 1.0);
  return a;
}

double tolerance(const SymmetricDense& a, const FactorStats& s) {
  return 100.0 * static_cast<double>(a.order()) * kEps * s.max_reduced_entry;
}

double relative_residual(const SymmetricDense& a, const Vector& u,
                         const Vector& b) {
  Vector r = multiply(a.full(), u);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return norm2(r) / norm2(b);
}

}  // namespace

TEST(Unpivoted, Identity) {
  SymmetricDense a(3);
  for (std::size_t i = 0; i < 3; ++i) a.set(i, i, 1.0);
  const auto f = factor_unpivoted(a);
  EXPECT_EQ(f.factors.lower, Matrix::identity(3));
  for (const auto& d : f.factors.dblocks) {
    EXPECT_EQ(d.size, 1);
    EXPECT_EQ(d.a, 1.0);
  }
  EXPECT_TRUE(f.factors.plan.perm.is_identity());
}

TEST(Unpivoted, TwoByTwoByHand) {
  SymmetricDense a(2);
  a.set(0, 0, 4);
  a.set(1, 0, 2);
  a.set(1, 1, 3);
  const auto f = factor_unpivoted(a);
  EXPECT_EQ(f.factors.lower(1, 0), 0.5);
  EXPECT_EQ(f.factors.dblocks[0].a, 4.0);
  EXPECT_EQ(f.factors.dblocks[1].a, 2.0);
  EXPECT_LE(reconstruction_error(a, f.factors), tolerance(a, f.stats));
}

TEST(Unpivoted, ZeroLeadingDiagonalBreaksDown) {
  try {
    factor_unpivoted(swap2());
    FAIL() << "expected ZeroPivot";
  } catch (const ZeroPivot& e) {
    EXPECT_EQ(e.step(), 0u);
  }
}

TEST(BunchParlett, SwapMatrixTakesOneTwoByTwoPivot) {
  const auto f = factor_bunch_parlett(swap2());
  ASSERT_EQ(f.factors.dblocks.size(), 1u);
  EXPECT_EQ(f.factors.dblocks[0], (DBlock{2, 0.0, 1.0, 0.0}));
  EXPECT_EQ(f.factors.lower, Matrix::identity(2));
  EXPECT_EQ(reconstruction_error(swap2(), f.factors), 0.0);
}

TEST(BunchParlett, DiagonalTakesLargestFirst) {
  SymmetricDense a(2);
  a.set(0, 0, 1.0);
  a.set(1, 1, 3.0);
  const auto f = factor_bunch_parlett(a);
  ASSERT_EQ(f.factors.plan.pivot_sizes, (std::vector<int>{1, 1}));
  EXPECT_EQ(f.factors.dblocks[0].a, 3.0);
  EXPECT_EQ(f.factors.dblocks[1].a, 1.0);
  EXPECT_EQ(f.factors.plan.perm, Permutation({1, 0}));
}

TEST(BunchParlett, RandomIndefiniteReconstructs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_symmetric(8, rng);
    const auto f = factor_bunch_parlett(a);
    EXPECT_LE(reconstruction_error(a, f.factors), tolerance(a, f.stats));
    EXPECT_TRUE(check_bunch_parlett_bounds(f.trace, a.order()));
  }
}

TEST(BunchParlett, SingularMatrixBreaksDown) {
  SymmetricDense a(3);
  a.set(0, 0, 1.0);
  EXPECT_THROW(factor_bunch_parlett(a), Breakdown);
}

TEST(BunchParlett, ComparisonCountWithinClassicalRange) {
  std::mt19937_64 rng(12);
  for (std::size_t n : {20u, 40u, 80u}) {
    const auto a = random_symmetric(n, rng);
    const auto f = factor_bunch_parlett(a);
    const double n3 = std::pow(static_cast<double>(n), 3);
    const double n2 = static_cast<double>(n * n);
    EXPECT_GE(static_cast<double>(f.stats.comparisons), n3 / 12.0 - n2);
    EXPECT_LE(static_cast<double>(f.stats.comparisons), n3 / 6.0 + n2);
  }
}

TEST(BunchKaufman, IdentityNeedsNoPermutation) {
  SymmetricDense a(4);
  for (std::size_t i = 0; i < 4; ++i) a.set(i, i, 1.0);
  const auto f = factor_bunch_kaufman(a);
  EXPECT_EQ(f.factors.plan.pivot_sizes, (std::vector<int>(4, 1)));
  EXPECT_TRUE(f.factors.plan.perm.is_identity());
}

TEST(BunchKaufman, SwapMatrixTakesOneTwoByTwoPivot) {
  const auto f = factor_bunch_kaufman(swap2());
  EXPECT_EQ(f.factors.plan.pivot_sizes, (std::vector<int>{2}));
  EXPECT_EQ(reconstruction_error(swap2(), f.factors), 0.0);
}

TEST(BunchKaufman, FewerComparisonsThanBunchParlett) {
  std::mt19937_64 rng(13);
  for (std::size_t n : {8u, 20u, 40u}) {
    const auto a = random_symmetric(n, rng);
    const auto bk = factor_bunch_kaufman(a);
    const auto bp = factor_bunch_parlett(a);
    EXPECT_LT(bk.stats.comparisons, bp.stats.comparisons);
    EXPECT_LE(bk.stats.comparisons, 3 * n * n);
    EXPECT_LE(reconstruction_error(a, bk.factors), tolerance(a, bk.stats));
  }
}

TEST(Reconstruction, PropertyOverRandomMatrices) {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<std::size_t> size(2, 40);
  const MonitorConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = size(rng);
    const auto a = random_symmetric(n, rng);
    try {
      const auto u = factor_unpivoted(a);
      EXPECT_LE(reconstruction_error(a, u.factors), tolerance(a, u.stats));
    } catch (const ZeroPivot&) {
    }
    for (auto s : {PivotSearch::BunchParlett, PivotSearch::BunchKaufman}) {
      const auto f = factor_pivoted(a, s);
      EXPECT_LE(reconstruction_error(a, f.factors), tolerance(a, f.stats));
      const auto m = factor_with_plan(a, f.factors.plan, cfg, s);
      EXPECT_LE(reconstruction_error(a, m.factors), tolerance(a, m.stats));
    }
  }
}

TEST(FactorWithPlan, SameMatrixReusesEveryPivot) {
  std::mt19937_64 rng(15);
  const MonitorConfig cfg{1e-10, 1e6};
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_symmetric(12, rng);
    const auto fresh = factor_bunch_parlett(a);
    const auto m = factor_with_plan(a, fresh.factors.plan, cfg,
                                    PivotSearch::BunchParlett);
    EXPECT_EQ(m.steps_researched, 0u);
    EXPECT_FALSE(m.plan_updated);
    EXPECT_EQ(m.stats.comparisons, 0u);
    EXPECT_EQ(m.factors.plan, fresh.factors.plan);
    EXPECT_EQ(m.factors.lower, fresh.factors.lower);
    EXPECT_EQ(m.factors.dblocks, fresh.factors.dblocks);
  }
}

TEST(FactorWithPlan, SmallPivotTriggersResearch) {
  SymmetricDense a(2);
  a.set(0, 0, 5.0);
  a.set(1, 1, 1.0);
  const PivotPlan plan{Permutation::identity(2), {1, 1}};
  const MonitorConfig cfg{1e-3, 1e6};
  EXPECT_EQ(factor_with_plan(a, plan, cfg, PivotSearch::BunchParlett)
                .steps_researched,
            0u);

  a.set(0, 0, 1e-6);
  const auto m = factor_with_plan(a, plan, cfg, PivotSearch::BunchParlett);
  EXPECT_TRUE(m.plan_updated);
  EXPECT_EQ(m.steps_reused, 0u);
  EXPECT_EQ(m.steps_reused + m.steps_researched, m.factors.dblocks.size());
  EXPECT_EQ(m.factors.plan.perm, Permutation({1, 0}));
  EXPECT_LE(reconstruction_error(a, m.factors), tolerance(a, m.stats));
}

TEST(FactorWithPlan, TwoByTwoNormCeilingRejects) {
  SymmetricDense a(2);
  a.set(1, 0, 2e6);
  const PivotPlan plan{Permutation::identity(2), {2}};
  const auto m = factor_with_plan(a, plan, MonitorConfig{1e-3, 1e6},
                                  PivotSearch::BunchParlett);
  EXPECT_TRUE(m.plan_updated);
  EXPECT_EQ(m.steps_researched, 1u);
}

TEST(FactorWithPlan, TotalRejectionEqualsFreshSearch) {
  std::mt19937_64 rng(16);
  const MonitorConfig reject_all{1e300, 1e6};
  for (auto s : {PivotSearch::BunchParlett, PivotSearch::BunchKaufman}) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto a = random_symmetric(15, rng);
      const auto b = random_symmetric(15, rng);
      const auto old = factor_pivoted(b, s);
      const auto m = factor_with_plan(a, old.factors.plan, reject_all, s);
      const auto fresh = factor_pivoted(a, s);
      EXPECT_EQ(m.steps_reused, 0u);
      EXPECT_EQ(m.factors.plan, fresh.factors.plan);
      EXPECT_EQ(m.factors.lower, fresh.factors.lower);
      EXPECT_EQ(m.factors.dblocks, fresh.factors.dblocks);
    }
  }
}

TEST(FactorWithPlan, InvalidPlansAreRejected) {
  const auto a = swap2();
  EXPECT_THROW(factor_with_plan(a, PivotPlan{Permutation::identity(3), {1, 1, 1}},
                                MonitorConfig{}, PivotSearch::BunchParlett),
               InvalidPlan);
  EXPECT_THROW(factor_with_plan(a, PivotPlan{Permutation::identity(2), {1}},
                                MonitorConfig{}, PivotSearch::BunchParlett),
               InvalidPlan);
  EXPECT_THROW(factor_with_plan(a, PivotPlan{Permutation::identity(2), {3}},
                                MonitorConfig{}, PivotSearch::BunchParlett),
               InvalidPlan);
}

TEST(FactorWithPlan, PerturbedSequenceSolvesMatchFresh) {
  std::mt19937_64 rng(17);
  const MonitorConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    const auto a0 = random_symmetric(20, rng);
    const auto plan = factor_bunch_parlett(a0).factors.plan;
    auto a1 = a0;
    const auto e = random_symmetric(20, rng);
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = 0; j <= i; ++j) a1.set(i, j, a0(i, j) + 1e-3 * e(i, j));
    const auto m = factor_with_plan(a1, plan, cfg, PivotSearch::BunchParlett);
    const auto fresh = factor_bunch_parlett(a1);
    if (m.plan_updated || kappa_proxy(fresh) > 1e6) continue;
    const Vector b = random_vector(20, rng);
    const Vector u1 = solve_factored(m.factors, b);
    const Vector u2 = solve_factored(fresh.factors, b);
    Vector diff(u1.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = u1[i] - u2[i];
    EXPECT_LE(norm2(diff) / norm2(u2), 1e-8);
  }
}

TEST(GrowthBounds, LemmaInstances) {
  const MonitorConfig cfg{1e-3, 1e6};
  PivotStep one;
  one.pivot = {1, 1.0};
  one.mu0 = 1.0;
  one.mu1 = 1.0;
  one.max_multiplier = 1.0;
  one.mu0_after = 2.0;
  EXPECT_TRUE(check_growth_bounds(one, cfg));
  one.mu0_after = 1002.0;
  EXPECT_FALSE(check_growth_bounds(one, cfg));

  PivotStep two;
  two.pivot = {2, 0.0, 1.0, 0.0};
  two.mu0 = 1.0;
  two.mu1 = 1.0;
  two.max_multiplier = 1.0;
  two.mu0_after = 1.0;
  EXPECT_TRUE(check_growth_bounds(two, cfg));
}

TEST(GrowthBounds, HoldOnEveryAcceptedPivot) {
  std::mt19937_64 rng(18);
  const MonitorConfig cfg;
  std::size_t checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto a0 = random_symmetric(25, rng);
    const auto e = random_symmetric(25, rng);
    auto a1 = a0;
    for (std::size_t i = 0; i < 25; ++i)
      for (std::size_t j = 0; j <= i; ++j) a1.set(i, j, a0(i, j) + 0.5 * e(i, j));
    const auto plan = factor_bunch_kaufman(a0).factors.plan;
    const auto m = factor_with_plan(a1, plan, cfg, PivotSearch::BunchKaufman);
    for (const auto& step : m.trace) {
      if (step.searched) continue;
      EXPECT_TRUE(check_growth_bounds(step, cfg));
      ++checked;
    }
  }
  EXPECT_GT(checked, 100u);
}

TEST(SolveFactored, IdentityAndSwap) {
  SymmetricDense id(3);
  for (std::size_t i = 0; i < 3; ++i) id.set(i, i, 1.0);
  EXPECT_EQ(solve_factored(factor_bunch_parlett(id).factors, Vector{1, 2, 3}),
            (Vector{1, 2, 3}));
  EXPECT_EQ(solve_factored(factor_bunch_parlett(swap2()).factors, Vector{1, 2}),
            (Vector{2, 1}));
}

TEST(SolveFactored, RandomSpdResidual) {
  std::mt19937_64 rng(19);
  const auto a = random_spd(30, rng);
  const Vector b = random_vector(30, rng);
  for (auto s : {PivotSearch::BunchParlett, PivotSearch::BunchKaufman}) {
    const auto f = factor_pivoted(a, s);
    EXPECT_LE(relative_residual(a, solve_factored(f.factors, b), b), 1e-10);
  }
}

TEST(SolveFactored, ResidualWithinConditioningBound) {
  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_symmetric(30, rng);
    const Vector b = random_vector(30, rng);
    const auto f = factor_bunch_parlett(a);
    const double bound = 1e4 * 30 * kEps * kappa_proxy(f);
    EXPECT_LE(relative_residual(a, solve_factored(f.factors, b), b), bound);
  }
}
