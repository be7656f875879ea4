#include "exitrisk/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

namespace exitrisk {

namespace {

constexpr double kRangeSlack = 1e-9;

void check_config(const WsrConfig& cfg) {
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) {
    throw std::invalid_argument("delta must lie in (0, 1)");
  }
  if (!(cfg.bound > 0.0)) {
    throw std::invalid_argument("bound must be > 0");
  }
  if (!(cfg.epsilon_grid_step > 0.0 && cfg.epsilon_grid_step < 1.0)) {
    throw std::invalid_argument("epsilon_grid_step must lie in (0, 1)");
  }
}

// Capital evaluation for one candidate epsilon. Factors are affine in eps:
// 1 - nu_j (l_j - eps) = a_j + b_j eps. The running product is folded into a
// log-space base every chunk so capital never overflows at large n; a zero
// factor kills the capital for good, but the threshold test has already seen
// every earlier kappa_i.
bool capital_crosses(const std::vector<double>& a, const std::vector<double>& b,
                     double eps, double log_threshold) {
  constexpr std::size_t kChunk = 32;
  double base = 0.0;
  double run = 1.0;
  double local = std::exp(log_threshold);
  std::size_t in_chunk = 0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double factor = a[j] + b[j] * eps;
    if (factor < 0.0) {
      throw std::runtime_error(
          "negative betting factor; losses exceed the configured bound");
    }
    run *= factor;
    if (run > local) return true;
    if (run == 0.0) return false;
    if (++in_chunk == kChunk) {
      base += std::log(run);
      run = 1.0;
      local = std::exp(log_threshold - base);
      in_chunk = 0;
    }
  }
  return false;
}

}  // namespace

std::string to_string(NuMode mode) {
  return mode == NuMode::half_over_b ? "half_over_B" : "one_over_B";
}

NuMode nu_mode_from_string(const std::string& s) {
  if (s == "half_over_B" || s == "half_over_b") return NuMode::half_over_b;
  if (s == "one_over_B" || s == "one_over_b") return NuMode::one_over_b;
  throw std::invalid_argument("unknown nu mode: " + s);
}

double wsr_upper_bound(std::span<const double> losses, const WsrConfig& cfg) {
  check_config(cfg);
  const std::size_t n = losses.size();
  if (n == 0) throw std::invalid_argument("wsr_upper_bound needs losses");
  const double B = cfg.bound;
  for (double l : losses) {
    if (l < -B - kRangeSlack || l > B + kRangeSlack) {
      throw std::invalid_argument("loss outside [-B, B]");
    }
  }

  const double nu_max =
      cfg.nu_mode == NuMode::half_over_b ? 1.0 / (2.0 * B) : 1.0 / B;
  const double log_inv_delta = std::log(1.0 / cfg.delta);

  // Betting fractions nu_i from the running mean/variance; the prior
  // variance sigma2_{-1} is pinned to 1.
  std::vector<double> a(n);  // 1 - nu_j * l_j
  std::vector<double> b(n);  // nu_j
  {
    double sum_loss = 0.0;
    double sum_dev = 0.0;
    double prev_var = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum_loss += losses[i];
      const double mu = (0.5 + sum_loss) / static_cast<double>(i + 1);
      sum_dev += (losses[i] - mu) * (losses[i] - mu);
      const double var = (0.25 + sum_dev) / static_cast<double>(i + 1);
      const double nu = std::min(
          nu_max,
          std::sqrt(2.0 * log_inv_delta / (static_cast<double>(n) * prev_var)));
      a[i] = 1.0 - nu * losses[i];
      b[i] = nu;
      prev_var = var;
    }
  }

  // Smallest grid epsilon whose capital beats 1/delta; B when none does.
  for (std::size_t k = 0;; ++k) {
    const double eps = static_cast<double>(k) * cfg.epsilon_grid_step;
    if (eps >= B) return B;
    if (capital_crosses(a, b, eps, log_inv_delta)) return eps;
  }
}

double hb_pvalue(double empirical_risk, std::size_t n, double epsilon) {
  if (empirical_risk < -kRangeSlack || empirical_risk > 1.0 + kRangeSlack) {
    throw std::invalid_argument("empirical risk outside [0, 1]");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("epsilon must lie in (0, 1)");
  }
  if (n == 0) throw std::invalid_argument("hb_pvalue needs n >= 1");
  const double rhat = std::clamp(empirical_risk, 0.0, 1.0);
  if (rhat >= epsilon) return 1.0;

  // h1(a, b) = a log(a/b) + (1-a) log((1-a)/(1-b)), with the a -> 0 limit.
  const double a = rhat;
  double h1;
  if (a <= 0.0) {
    h1 = std::log(1.0 / (1.0 - epsilon));
  } else {
    h1 = a * std::log(a / epsilon) +
         (1.0 - a) * std::log((1.0 - a) / (1.0 - epsilon));
  }
  const double hoeffding = std::exp(-static_cast<double>(n) * h1);

  // ceil(n * rhat) with a nudge so an exact integer count stays put.
  double k = std::ceil(static_cast<double>(n) * rhat - 1e-9);
  k = std::clamp(k, 0.0, static_cast<double>(n));
  const boost::math::binomial_distribution<double> bin(
      static_cast<double>(n), epsilon);
  const double bentkus = std::exp(1.0) * boost::math::cdf(bin, k);

  const double p = std::min(1.0, std::min(hoeffding, bentkus));
  return std::max(p, std::numeric_limits<double>::min());
}

}  // namespace exitrisk
