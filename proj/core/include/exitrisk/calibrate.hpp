#pragma once
// Threshold selection over a descending candidate grid: empirical, conformal
// risk control (in-expectation), WSR upper-confidence-bound
// (high-probability) and fixed-sequence Hoeffding-Bentkus testing.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "exitrisk/bounds.hpp"
#include "exitrisk/risk.hpp"
#include "exitrisk/trace.hpp"

namespace exitrisk {

enum class Method { emp, crc, ucb, ltt };

std::string to_string(Method method);
Method method_from_string(const std::string& s);

struct CalibrationResult {
  Method method = Method::emp;
  double lambda_hat = 1.0;  // grid member or exactly 1
  double epsilon = 0.0;
  std::optional<double> delta;
  // True when no threshold below 1 was certified; the selector then falls
  // back to full-model inference.
  bool empty_set = false;
  RiskCurve curve;  // empirical risk curve on the calibration data
  // Per-lambda upper bounds (ucb) or p-values (ltt), aligned with the grid;
  // NaN at the lambda = 1 sentinel, empty for emp/crc.
  std::vector<double> bound_curve;

  std::string to_json() const;
};

// Smallest lambda whose calibration risk is at most epsilon. Always
// well-defined because the risk at lambda = 1 is zero.
CalibrationResult lambda_empirical(const RiskCurve& curve, double epsilon);

// Smallest lambda with (n/(n+1)) risk + B/(n+1) <= epsilon, guaranteeing
// control in expectation over calibration draws.
CalibrationResult lambda_crc(const RiskCurve& curve, double epsilon,
                             double bound, std::size_t n);

// WSR upper bound per grid lambda over the per-sample relative losses, in
// calibration order. Aligned with the grid; index 0 (the sentinel) is NaN.
std::vector<double> wsr_bound_curve(const LossMatrix& lm, const TraceSet& ts,
                                    const ThresholdGrid& grid,
                                    const WsrConfig& wsr);

// Hoeffding-Bentkus p-value per grid lambda, computed on losses clipped to
// [0, B] and scaled into [0, 1], testing the level epsilon/B. Index 0 is NaN.
std::vector<double> hb_pvalue_curve(const LossMatrix& lm, const TraceSet& ts,
                                    const ThresholdGrid& grid, double epsilon,
                                    double bound);

// Descending scan of the WSR bounds, starting after the sentinel: stops at
// the first bound >= epsilon and returns the previous grid value, so the
// result is min{lambda : bound(lambda') < epsilon for all lambda' >= lambda}.
// No violation -> smallest grid value; violation at the first bounded
// lambda -> 1.
CalibrationResult lambda_ucb(const LossMatrix& lm, const TraceSet& ts,
                             const ThresholdGrid& grid, double epsilon,
                             double delta, const WsrConfig& wsr);

// Fixed-sequence testing: walk the grid descending from the first lambda
// below 1 while p <= delta, stop at the first non-rejection; the selection is
// the smallest rejected lambda, or 1 when nothing was rejected.
CalibrationResult lambda_ltt(const LossMatrix& lm, const TraceSet& ts,
                             const ThresholdGrid& grid, double epsilon,
                             double delta, double bound);

}  // namespace exitrisk
