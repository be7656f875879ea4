#pragma once
// Exit selection, loss construction for the gap/consistency risks, empirical
// risk curves, marginal-monotonicity diagnostics and efficiency metrics.
//
// Everything here is a pure function of its inputs; the only randomness
// (consistency/distribution label sampling) is fixed by RiskSpec::seed at
// derive time. Sums run in sample order so results are reproducible.

#include <span>
#include <string>
#include <vector>

#include "exitrisk/trace.hpp"

namespace exitrisk {

// n x L base losses for the configured risk. The final column is the
// full-model loss; entries lie in [0, B] before differencing. For
// consistency risks the full-model reference is baked in at construction.
struct LossMatrix {
  std::size_t num_samples = 0;
  std::size_t num_exits = 0;
  std::vector<double> values;  // row-major n x L
  RiskSpec spec;

  double at(std::size_t i, std::size_t l) const {
    return values[i * num_exits + l];
  }
};

// Empirical risk and exit-layer distribution over a threshold grid.
struct RiskCurve {
  ThresholdGrid grid;
  std::vector<double> values;  // per-lambda empirical risk; values[0] == 0
  std::vector<std::vector<double>> exit_fractions;  // per lambda, length L
};

struct EfficiencyReport {
  double mean_exit_layer = 0.0;  // in [1, L]
  double relative_gain = 0.0;    // 1 - mean_exit_layer / L
  bool has_cost_weighted_gain = false;
  double cost_weighted_gain = 0.0;  // 1 - mean cost at exit / cost at L
};

struct MonotonicityReport {
  std::vector<double> mean_losses;  // per exit
  bool monotone = false;            // non-increasing within 1e-9
};

// First exit whose confidence clears lambda (1-based); L when none do.
// lambda == 1 is the full-model sentinel and always returns L.
int exit_index(std::span<const double> confidences, double lambda);

// Squared distance between a predictive distribution and the one-hot label;
// bounded by [0, 2].
double brier_loss(std::span<const double> dist, int label);

// Average Brier loss over pixel/instance rows, e.g. for image-level
// aggregation of dense prediction tasks.
double mean_pixel_brier(const std::vector<std::vector<double>>& dists,
                        std::span<const int> labels);

// Builds the per-exit base-loss matrix for the requested risk:
//   gap/prediction          copy the named precomputed matrix, or the 0-1
//                           loss of the argmax prediction vs. the label
//   gap/distribution        per-exit Brier losses against the label
//   consistency/prediction  0-1 loss of each exit's argmax vs. the final
//                           exit's argmax (final column identically 0), or
//                           the named precomputed loss-vs-final matrix
//   consistency/distribution per-exit Brier losses against one label
//                           sampled from the final exit per sample
LossMatrix derive_losses(const TraceSet& ts, const RiskSpec& spec);

// Per-sample relative losses loss(exit at lambda) - loss(full model),
// clipped at zero when the spec asks for it.
std::vector<double> relative_losses(const LossMatrix& lm, const TraceSet& ts,
                                    double lambda);

// Mean relative loss at lambda; exactly 0 at lambda == 1.
double empirical_risk(const LossMatrix& lm, const TraceSet& ts, double lambda);

// empirical_risk vectorized over the grid, with per-lambda exit fractions.
RiskCurve risk_curve(const LossMatrix& lm, const TraceSet& ts,
                     const ThresholdGrid& grid);

// CSV with columns lambda,risk,frac_exit_1..frac_exit_L.
std::string risk_curve_to_csv(const RiskCurve& curve);

// Mean exit layer and relative improvement over last-layer exiting.
// cost_weights, when given, are positive non-decreasing cumulative per-exit
// costs (e.g. FLOPs) of length L.
EfficiencyReport efficiency_metrics(const TraceSet& ts, double lambda,
                                    std::span<const double> cost_weights = {});

// Per-exit mean base losses; the flag is true when they are non-increasing.
MonotonicityReport check_marginal_monotonicity(const LossMatrix& lm);

}  // namespace exitrisk
