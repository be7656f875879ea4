#include "exitrisk/calibrate.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace exitrisk {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Smallest grid lambda passing the per-lambda predicate; 1 when none does.
template <typename Pass>
std::pair<double, bool> min_qualifying(const ThresholdGrid& grid, Pass pass) {
  double best = 1.0;
  bool found = false;
  // Grid is descending, so the last qualifying entry is the minimum.
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (pass(j)) {
      best = grid[j];
      found = true;
    }
  }
  return {found ? best : 1.0, found};
}

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::emp: return "emp";
    case Method::crc: return "crc";
    case Method::ucb: return "ucb";
    case Method::ltt: return "ltt";
  }
  return "emp";
}

Method method_from_string(const std::string& s) {
  if (s == "emp") return Method::emp;
  if (s == "crc") return Method::crc;
  if (s == "ucb") return Method::ucb;
  if (s == "ltt") return Method::ltt;
  throw std::invalid_argument("unknown method: " + s);
}

std::string CalibrationResult::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = exitrisk::to_string(method);
  j["lambda_hat"] = lambda_hat;
  j["epsilon"] = epsilon;
  if (delta) {
    j["delta"] = *delta;
  } else {
    j["delta"] = nullptr;
  }
  j["empty_set"] = empty_set;
  j["lambda"] = curve.grid.values();
  j["risk"] = curve.values;
  if (bound_curve.empty()) {
    j["bound_or_pvalue"] = nullptr;
  } else {
    // NaN entries (the lambda = 1 sentinel) serialize as null.
    j["bound_or_pvalue"] = bound_curve;
  }
  return j.dump(2);
}

CalibrationResult lambda_empirical(const RiskCurve& curve, double epsilon) {
  CalibrationResult result;
  result.method = Method::emp;
  result.epsilon = epsilon;
  result.curve = curve;
  auto [lambda, found] = min_qualifying(
      curve.grid, [&](std::size_t j) { return curve.values[j] <= epsilon; });
  result.lambda_hat = lambda;
  result.empty_set = result.lambda_hat == 1.0;
  (void)found;  // always found: the risk at lambda = 1 is zero
  return result;
}

CalibrationResult lambda_crc(const RiskCurve& curve, double epsilon,
                             double bound, std::size_t n) {
  if (n == 0) throw std::invalid_argument("lambda_crc needs n >= 1");
  if (!(bound > 0.0)) throw std::invalid_argument("bound must be > 0");
  CalibrationResult result;
  result.method = Method::crc;
  result.epsilon = epsilon;
  result.curve = curve;
  const double scale =
      static_cast<double>(n) / static_cast<double>(n + 1);
  const double inflation = bound / static_cast<double>(n + 1);
  auto [lambda, found] = min_qualifying(curve.grid, [&](std::size_t j) {
    return scale * curve.values[j] + inflation <= epsilon;
  });
  (void)found;
  result.lambda_hat = lambda;
  result.empty_set = result.lambda_hat == 1.0;
  return result;
}

std::vector<double> wsr_bound_curve(const LossMatrix& lm, const TraceSet& ts,
                                    const ThresholdGrid& grid,
                                    const WsrConfig& wsr) {
  std::vector<double> bounds(grid.size(), kNan);
  // The sentinel at grid[0] is never bounded; its risk is identically zero.
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const auto losses = relative_losses(lm, ts, grid[j]);
    bounds[j] = wsr_upper_bound(losses, wsr);
  }
  return bounds;
}

std::vector<double> hb_pvalue_curve(const LossMatrix& lm, const TraceSet& ts,
                                    const ThresholdGrid& grid, double epsilon,
                                    double bound) {
  if (!(bound > 0.0)) throw std::invalid_argument("bound must be > 0");
  std::vector<double> pvalues(grid.size(), kNan);
  const std::size_t n = lm.num_samples;
  const std::size_t L = lm.num_exits;
  for (std::size_t j = 1; j < grid.size(); ++j) {
    // Clip to [0, B], then scale into [0, 1]; the tested level scales along.
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int e = exit_index(ts.samples[i].confidences, grid[j]);
      const double d =
          lm.at(i, static_cast<std::size_t>(e - 1)) - lm.at(i, L - 1);
      sum += std::max(0.0, d) / bound;
    }
    const double rhat = n == 0 ? 0.0 : sum / static_cast<double>(n);
    pvalues[j] = hb_pvalue(rhat, n, epsilon / bound);
  }
  return pvalues;
}

CalibrationResult lambda_ucb(const LossMatrix& lm, const TraceSet& ts,
                             const ThresholdGrid& grid, double epsilon,
                             double delta, const WsrConfig& wsr) {
  CalibrationResult result;
  result.method = Method::ucb;
  result.epsilon = epsilon;
  result.delta = delta;
  result.curve = risk_curve(lm, ts, grid);
  result.bound_curve = wsr_bound_curve(lm, ts, grid, wsr);

  // Descending scan over the bounded entries; the first violation ends the
  // certified suffix and the previous grid value is returned.
  double lambda = 1.0;
  bool violated = false;
  for (std::size_t j = 1; j < grid.size(); ++j) {
    if (result.bound_curve[j] >= epsilon) {
      lambda = grid[j - 1];
      violated = true;
      break;
    }
  }
  if (!violated) lambda = grid[grid.size() - 1];
  result.lambda_hat = lambda;
  result.empty_set = result.lambda_hat == 1.0;
  return result;
}

CalibrationResult lambda_ltt(const LossMatrix& lm, const TraceSet& ts,
                             const ThresholdGrid& grid, double epsilon,
                             double delta, double bound) {
  CalibrationResult result;
  result.method = Method::ltt;
  result.epsilon = epsilon;
  result.delta = delta;
  result.curve = risk_curve(lm, ts, grid);
  result.bound_curve = hb_pvalue_curve(lm, ts, grid, epsilon, bound);

  // Fixed-sequence testing: keep rejecting while p <= delta; stop at the
  // first non-rejection.
  double lambda = 1.0;
  bool any_rejected = false;
  for (std::size_t j = 1; j < grid.size(); ++j) {
    if (result.bound_curve[j] <= delta) {
      lambda = grid[j];
      any_rejected = true;
    } else {
      break;
    }
  }
  result.lambda_hat = any_rejected ? lambda : 1.0;
  result.empty_set = result.lambda_hat == 1.0;
  return result;
}

}  // namespace exitrisk
