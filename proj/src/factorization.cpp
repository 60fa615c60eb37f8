#include "saddle/factorization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace saddle {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Symmetric elimination on the lower triangle of a working copy. Positions
// are slots of the permuted matrix; perm_[pos] is the original index.
//
// The trailing update is written so that the value computed for the pair
// (i, j) does not depend on which of the two sits lower in the working
// order. Two runs that pick the same pivots therefore produce bitwise equal
// factors regardless of how the remaining indices were shuffled in between.
class Eliminator {
 public:
  Eliminator(const SymmetricDense& a, std::vector<std::size_t> perm)
      : n_(a.order()), w_(a.order(), a.order()), lower_(Matrix::identity(a.order())),
        perm_(std::move(perm)) {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j <= i; ++j) w_(i, j) = a(perm_[i], perm_[j]);
    double mu0 = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j <= i; ++j) mu0 = std::max(mu0, std::abs(w_(i, j)));
    mu0_ = mu0;
    input_mu0_ = mu0;
    stats_.max_reduced_entry = mu0;
  }

  std::size_t order() const { return n_; }
  std::size_t position() const { return k_; }
  bool done() const { return k_ >= n_; }
  double input_mu0() const { return input_mu0_; }
  double at(std::size_t i, std::size_t j) const {
    return i >= j ? w_(i, j) : w_(j, i);
  }
  FactorStats& stats() { return stats_; }

  // Symmetric interchange of trailing positions p and q.
  void swap(std::size_t p, std::size_t q) {
    if (p == q) return;
    if (p > q) std::swap(p, q);
    for (std::size_t c = 0; c < p; ++c) std::swap(w_(p, c), w_(q, c));
    for (std::size_t c = p + 1; c < q; ++c) std::swap(w_(c, p), w_(q, c));
    for (std::size_t c = q + 1; c < n_; ++c) std::swap(w_(c, p), w_(c, q));
    std::swap(w_(p, p), w_(q, q));
    for (std::size_t c = 0; c < k_; ++c) std::swap(lower_(p, c), lower_(q, c));
    std::swap(perm_[p], perm_[q]);
  }

  // Restores ascending original-index order on the trailing positions.
  void sort_trailing() {
    const std::size_t r = n_ - k_;
    std::vector<std::size_t> old(r);
    std::iota(old.begin(), old.end(), k_);
    std::sort(old.begin(), old.end(),
              [&](std::size_t x, std::size_t y) { return perm_[x] < perm_[y]; });
    Matrix block(r, r);
    for (std::size_t a = 0; a < r; ++a)
      for (std::size_t b = 0; b <= a; ++b) block(a, b) = at(old[a], old[b]);
    Matrix lrows(r, k_);
    std::vector<std::size_t> p(r);
    for (std::size_t a = 0; a < r; ++a) {
      for (std::size_t c = 0; c < k_; ++c) lrows(a, c) = lower_(old[a], c);
      p[a] = perm_[old[a]];
    }
    for (std::size_t a = 0; a < r; ++a) {
      for (std::size_t b = 0; b <= a; ++b) w_(k_ + a, k_ + b) = block(a, b);
      for (std::size_t c = 0; c < k_; ++c) lower_(k_ + a, c) = lrows(a, c);
      perm_[k_ + a] = p[a];
    }
  }

  double diag_max() const {
    double mu1 = 0.0;
    for (std::size_t i = k_; i < n_; ++i) mu1 = std::max(mu1, std::abs(w_(i, i)));
    return mu1;
  }

  DBlock candidate(int size) const {
    if (size == 1) return DBlock{1, w_(k_, k_), 0.0, 0.0};
    return DBlock{2, w_(k_, k_), w_(k_ + 1, k_), w_(k_ + 1, k_ + 1)};
  }

  // Complete pivot search; moves the chosen pivot to the front.
  int search_bunch_parlett() {
    const std::size_t k = k_;
    double mu1 = -1.0;
    std::size_t pd = k;
    for (std::size_t i = k; i < n_; ++i) {
      ++stats_.comparisons;
      const double v = std::abs(w_(i, i));
      if (v > mu1) {
        mu1 = v;
        pd = i;
      }
    }
    double mu0 = -1.0;
    std::size_t pi = k, pj = k;
    for (std::size_t i = k + 1; i < n_; ++i) {
      auto wi = w_.row(i);
      for (std::size_t j = k; j < i; ++j) {
        ++stats_.comparisons;
        const double v = std::abs(wi[j]);
        if (v > mu0) {
          mu0 = v;
          pi = i;
          pj = j;
        }
      }
    }
    mu0 = std::max(mu0, 0.0);
    ++stats_.searches;
    if (mu1 == 0.0 && mu0 == 0.0) throw Breakdown(k);
    ++stats_.comparisons;
    if (mu1 >= kPivotAlpha * mu0) {
      swap(k, pd);
      return 1;
    }
    swap(k, pj);
    swap(k + 1, pi);
    return 2;
  }

  // Partial pivot search on the leading column.
  int search_bunch_kaufman() {
    const std::size_t k = k_;
    const double diag = std::abs(w_(k, k));
    double lambda = 0.0;
    std::size_t r = k;
    for (std::size_t i = k + 1; i < n_; ++i) {
      ++stats_.comparisons;
      const double v = std::abs(w_(i, k));
      if (v > lambda) {
        lambda = v;
        r = i;
      }
    }
    ++stats_.searches;
    if (lambda == 0.0 && diag == 0.0) throw Breakdown(k);
    ++stats_.comparisons;
    if (diag >= kPivotAlpha * lambda) return 1;
    double sigma = 0.0;
    for (std::size_t j = k; j < n_; ++j) {
      if (j == r) continue;
      ++stats_.comparisons;
      sigma = std::max(sigma, std::abs(at(r, j)));
    }
    ++stats_.comparisons;
    if (diag * sigma >= kPivotAlpha * lambda * lambda) return 1;
    ++stats_.comparisons;
    if (std::abs(w_(r, r)) >= kPivotAlpha * sigma) {
      swap(k, r);
      return 1;
    }
    swap(k + 1, r);
    return 2;
  }

  int search(PivotSearch s) {
    return s == PivotSearch::BunchParlett ? search_bunch_parlett()
                                          : search_bunch_kaufman();
  }

  PivotStep eliminate(int size, bool searched) {
    PivotStep step;
    step.position = k_;
    step.mu0 = mu0_;
    step.mu1 = diag_max();
    step.searched = searched;
    step.pivot = candidate(size);
    if (size == 1)
      eliminate1(step);
    else
      eliminate2(step);
    stats_.max_multiplier = std::max(stats_.max_multiplier, step.max_multiplier);
    stats_.max_reduced_entry = std::max(stats_.max_reduced_entry, step.mu0_after);
    mu0_ = step.mu0_after;
    dblocks_.push_back(step.pivot);
    sizes_.push_back(size);
    k_ += static_cast<std::size_t>(size);
    return step;
  }

  LdltFactors release() {
    LdltFactors f;
    f.lower = std::move(lower_);
    f.dblocks = std::move(dblocks_);
    f.plan.perm = Permutation(std::move(perm_));
    f.plan.pivot_sizes = std::move(sizes_);
    return f;
  }

 private:
  void eliminate1(PivotStep& step) {
    const std::size_t k = k_;
    const double beta = w_(k, k);
    if (beta == 0.0) throw Breakdown(k);
    const double inv = 1.0 / beta;
    x_.resize(n_);
    double mult = 0.0;
    for (std::size_t i = k + 1; i < n_; ++i) {
      x_[i] = w_(i, k);
      lower_(i, k) = x_[i] * inv;
      mult = std::max(mult, std::abs(lower_(i, k)));
    }
    double mu0 = 0.0;
    for (std::size_t i = k + 1; i < n_; ++i) {
      auto wi = w_.row(i);
      const double xi = x_[i];
      for (std::size_t j = k + 1; j <= i; ++j) {
        wi[j] -= (xi * x_[j]) * inv;
        mu0 = std::max(mu0, std::abs(wi[j]));
      }
    }
    step.max_multiplier = mult;
    step.mu0_after = mu0;
  }

  void eliminate2(PivotStep& step) {
    const std::size_t k = k_;
    const double a = step.pivot.a, b = step.pivot.b, c = step.pivot.c;
    const double det = a * c - b * b;
    if (det == 0.0) throw Breakdown(k);
    const double inv = 1.0 / det;
    x_.resize(n_);
    y_.resize(n_);
    double mult = 0.0;
    for (std::size_t i = k + 2; i < n_; ++i) {
      x_[i] = w_(i, k);
      y_[i] = w_(i, k + 1);
      lower_(i, k) = (c * x_[i] - b * y_[i]) * inv;
      lower_(i, k + 1) = (a * y_[i] - b * x_[i]) * inv;
      mult = std::max({mult, std::abs(lower_(i, k)), std::abs(lower_(i, k + 1))});
    }
    double mu0 = 0.0;
    for (std::size_t i = k + 2; i < n_; ++i) {
      auto wi = w_.row(i);
      const double xi = x_[i], yi = y_[i];
      for (std::size_t j = k + 2; j <= i; ++j) {
        const double xj = x_[j], yj = y_[j];
        wi[j] -= (c * (xi * xj) - b * (xi * yj + yi * xj) + a * (yi * yj)) * inv;
        mu0 = std::max(mu0, std::abs(wi[j]));
      }
    }
    step.max_multiplier = mult;
    step.mu0_after = mu0;
  }

  std::size_t n_;
  Matrix w_;
  Matrix lower_;
  std::vector<std::size_t> perm_;
  std::vector<DBlock> dblocks_;
  std::vector<int> sizes_;
  FactorStats stats_;
  std::size_t k_ = 0;
  double mu0_ = 0.0;
  double input_mu0_ = 0.0;
  Vector x_, y_;
};

std::vector<std::size_t> iota_perm(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  return p;
}

bool accepts(const DBlock& cand, const MonitorConfig& cfg) {
  if (cand.size == 1) return std::abs(cand.a) > cfg.eps1;
  const double norm =
      std::max({std::abs(cand.a), std::abs(cand.b), std::abs(cand.c)});
  return std::abs(cand.determinant()) > cfg.eps1 && norm < cfg.eps2;
}

// Bounds checked in floating point get a few ulps of headroom for the
// rounding of the quantities being compared.
constexpr double kSlack = 1.0 + 16.0 * kEps;

}  // namespace

const char* to_string(PivotSearch s) {
  return s == PivotSearch::BunchParlett ? "bunch-parlett" : "bunch-kaufman";
}

void MonitorConfig::validate() const {
  if (!(eps1 > 0.0) || !(eps2 > 0.0))
    throw std::invalid_argument("monitor thresholds must be positive");
}

Factorization factor_unpivoted(const SymmetricDense& a) {
  Eliminator e(a, iota_perm(a.order()));
  const double tiny =
      static_cast<double>(a.order()) * kEps * (a.order() ? e.input_mu0() : 0.0);
  Factorization out;
  while (!e.done()) {
    const std::size_t k = e.position();
    if (std::abs(e.candidate(1).a) <= tiny) throw ZeroPivot(k);
    out.trace.push_back(e.eliminate(1, false));
  }
  out.stats = e.stats();
  out.factors = e.release();
  return out;
}

Factorization factor_pivoted(const SymmetricDense& a, PivotSearch search) {
  Eliminator e(a, iota_perm(a.order()));
  Factorization out;
  while (!e.done()) {
    const int size = e.search(search);
    out.trace.push_back(e.eliminate(size, true));
  }
  out.stats = e.stats();
  out.factors = e.release();
  return out;
}

Factorization factor_bunch_parlett(const SymmetricDense& a) {
  return factor_pivoted(a, PivotSearch::BunchParlett);
}

Factorization factor_bunch_kaufman(const SymmetricDense& a) {
  return factor_pivoted(a, PivotSearch::BunchKaufman);
}

MonitoredOutcome factor_with_plan(const SymmetricDense& a,
                                  const PivotPlan& plan,
                                  const MonitorConfig& cfg,
                                  PivotSearch search) {
  cfg.validate();
  if (plan.perm.order() != a.order())
    throw InvalidPlan("plan order does not match the matrix");
  try {
    plan.validate();
  } catch (const std::invalid_argument& e) {
    throw InvalidPlan(e.what());
  }

  Eliminator e(a, plan.perm.forward());
  MonitoredOutcome out;
  std::size_t planned = 0;
  bool searching = false;
  while (!e.done()) {
    if (!searching) {
      const int size = plan.pivot_sizes[planned];
      if (accepts(e.candidate(size), cfg)) {
        out.trace.push_back(e.eliminate(size, false));
        ++out.steps_reused;
        ++planned;
        continue;
      }
      // Hand the reduced matrix to the searcher in canonical order, so a
      // rejection at the first step reproduces a fresh factorization.
      searching = true;
      e.sort_trailing();
    }
    const int size = e.search(search);
    out.trace.push_back(e.eliminate(size, true));
    ++out.steps_researched;
  }
  out.plan_updated = out.steps_researched > 0;
  out.stats = e.stats();
  out.factors = e.release();
  return out;
}

bool check_growth_bounds(const PivotStep& step, const MonitorConfig& cfg) {
  const double eps1 = cfg.eps1;
  const double mu0 = step.mu0;
  const double mu1 = step.mu1;
  if (step.pivot.size == 1) {
    return step.max_multiplier <= kSlack * (mu0 / eps1) &&
           step.mu0_after <= kSlack * (1.0 + mu0 / eps1) * mu0;
  }
  const double det = std::abs(step.pivot.determinant());
  const double m_bound = mu0 * (mu0 + mu1) / eps1;
  return step.max_multiplier <= kSlack * m_bound &&
         step.mu0_after <= kSlack * (1.0 + 2.0 * m_bound) * mu0 &&
         eps1 < det && det <= kSlack * (mu0 * mu0 + mu1 * mu1);
}

bool check_bunch_parlett_bounds(std::span<const PivotStep> trace,
                                std::size_t order) {
  if (trace.empty()) return true;
  const double mu0 = trace.front().mu0;
  const double m1 = 1.0 / kPivotAlpha;
  const double m2 = 1.0 / (1.0 - kPivotAlpha);
  for (const PivotStep& s : trace) {
    const std::size_t eliminated = s.position;  // n - k for A^(k)
    if (s.mu0 > kSlack * std::pow(2.57, static_cast<double>(eliminated)) * mu0)
      return false;
    const double bound = s.pivot.size == 1 ? m1 : m2;
    if (s.max_multiplier > kSlack * bound) return false;
  }
  const PivotStep& last = trace.back();
  const std::size_t after = last.position + static_cast<std::size_t>(last.pivot.size);
  if (after < order &&
      last.mu0_after > kSlack * std::pow(2.57, static_cast<double>(after)) * mu0)
    return false;
  return true;
}

Vector solve_factored(const LdltFactors& f, std::span<const double> b) {
  const Vector pb = f.plan.perm.permute(b);
  const Vector z = solve_unit_lower(f.lower, pb);
  const Vector w = solve_block_diag(f.dblocks, z);
  const Vector y = solve_unit_upper(f.lower, w);
  return f.plan.perm.unpermute(y);
}

double reconstruction_error(const SymmetricDense& a, const LdltFactors& f) {
  const SymmetricDense pa = apply_permutation(f.plan.perm, a);
  const Matrix ldl = reconstruct(f);
  double err = 0.0;
  for (std::size_t i = 0; i < a.order(); ++i)
    for (std::size_t j = 0; j < a.order(); ++j)
      err = std::max(err, std::abs(pa(i, j) - ldl(i, j)));
  return err;
}

double kappa_proxy(const Factorization& f) {
  double smallest = std::numeric_limits<double>::infinity();
  for (const DBlock& d : f.factors.dblocks) {
    double mag;
    if (d.size == 1) {
      mag = std::abs(d.a);
    } else {
      // Smallest eigenvalue magnitude of the symmetric 2x2 block.
      const double mean = 0.5 * (d.a + d.c);
      const double rad = std::hypot(0.5 * (d.a - d.c), d.b);
      mag = std::min(std::abs(mean - rad), std::abs(mean + rad));
    }
    if (mag > 0.0) smallest = std::min(smallest, mag);
  }
  return f.stats.max_reduced_entry / smallest;
}

}  // namespace saddle
