#pragma once
// Independent brute-force reference implementations used as oracles by the
// unit and acceptance tests. These are deliberately naive transliterations
// (plain products, direct sums, linear scans) and must stay independent of
// the library code paths they are checked against.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace oracle {

// First exit whose confidence clears lambda, 1-based; L if none.
// lambda == 1 always falls through to the full model.
inline int exit_index(const std::vector<double>& conf, double lambda) {
  const int num_exits = static_cast<int>(conf.size()) + 1;
  if (lambda >= 1.0) return num_exits;
  for (std::size_t l = 0; l < conf.size(); ++l) {
    if (conf[l] >= lambda) return static_cast<int>(l) + 1;
  }
  return num_exits;
}

inline double brier(const std::vector<double>& dist, int label) {
  double s = 0.0;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    const double t = (static_cast<int>(k) == label) ? 1.0 : 0.0;
    s += (dist[k] - t) * (dist[k] - t);
  }
  return s;
}

// Mean relative loss at threshold lambda over rows of per-exit base losses.
inline double empirical_risk(const std::vector<std::vector<double>>& losses,
                             const std::vector<std::vector<double>>& confs,
                             double lambda, bool clip_nonneg) {
  const std::size_t n = losses.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t last = losses[i].size() - 1;
    const int e = exit_index(confs[i], lambda);
    double d = losses[i][static_cast<std::size_t>(e - 1)] - losses[i][last];
    if (clip_nonneg && d < 0.0) d = 0.0;
    sum += d;
  }
  return sum / static_cast<double>(n);
}

// Direct execution of the WSR betting recursion with plain running products
// and an ascending epsilon grid; returns bound (vacuous) when no grid point
// accumulates enough capital.
inline double wsr_bound(const std::vector<double>& losses, double delta,
                        double bound, double nu_max, double step) {
  const std::size_t n = losses.size();
  std::vector<double> nu(n);
  double sum_loss = 0.0;
  double sum_dev = 0.0;
  double prev_var = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum_loss += losses[i];
    const double mu = (0.5 + sum_loss) / static_cast<double>(i + 1);
    sum_dev += (losses[i] - mu) * (losses[i] - mu);
    const double var = (0.25 + sum_dev) / static_cast<double>(i + 1);
    nu[i] = std::min(
        nu_max, std::sqrt(2.0 * std::log(1.0 / delta) /
                          (static_cast<double>(n) * prev_var)));
    prev_var = var;
  }
  const double threshold = 1.0 / delta;
  for (std::size_t k = 0;; ++k) {
    const double eps = static_cast<double>(k) * step;
    if (eps >= bound) return bound;
    double capital = 1.0;
    bool crossed = false;
    for (std::size_t j = 0; j < n; ++j) {
      capital *= 1.0 - nu[j] * (losses[j] - eps);
      if (capital > threshold) {
        crossed = true;
        break;
      }
      if (capital <= 0.0) break;
    }
    if (crossed) return eps;
  }
}

inline double binomial_cdf(long k, long n, double p) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  double s = 0.0;
  for (long j = 0; j <= k; ++j) {
    const double lp = std::lgamma(static_cast<double>(n) + 1.0) -
                      std::lgamma(static_cast<double>(j) + 1.0) -
                      std::lgamma(static_cast<double>(n - j) + 1.0) +
                      static_cast<double>(j) * std::log(p) +
                      static_cast<double>(n - j) * std::log1p(-p);
    s += std::exp(lp);
  }
  return std::min(s, 1.0);
}

// min(Hoeffding, Bentkus) p-value for H0: R(lambda) >= epsilon.
inline double hb_pvalue(double rhat, long n, double epsilon) {
  if (rhat >= epsilon) return 1.0;
  const auto h1 = [](double a, double b) {
    if (a <= 0.0) return std::log(1.0 / (1.0 - b));
    return a * std::log(a / b) + (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
  };
  const double hoeff =
      std::exp(-static_cast<double>(n) * h1(std::min(rhat, epsilon), epsilon));
  const long k = static_cast<long>(
      std::ceil(static_cast<double>(n) * rhat - 1e-9));
  const double bentkus =
      std::exp(1.0) * binomial_cdf(std::min(k, n), n, epsilon);
  const double p = std::min(1.0, std::min(hoeff, bentkus));
  return std::max(p, std::numeric_limits<double>::min());
}

// Smallest grid value whose curve value passes the predicate; 1 if none.
template <typename Pred>
inline double scan_min_lambda(const std::vector<double>& grid,
                              const std::vector<double>& curve, Pred pass) {
  double best = 1.0;
  bool found = false;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (pass(curve[j]) && (!found || grid[j] < best)) {
      best = grid[j];
      found = true;
    }
  }
  return found ? best : 1.0;
}

// Frozen expected values, computed from the reference implementations above
// before the library was written.
inline constexpr double kWsrAllPointOneN10000 = 0.101;  // both nu modes
inline constexpr double kHbZeroN100Eps005 = 0.005920529220334054;

}  // namespace oracle
