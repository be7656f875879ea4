#pragma once
// Monte-Carlo guarantee verification: repeated calibration/test splits,
// per-trial threshold selection, test-risk and efficiency aggregation, and
// pass/fail verdicts for the in-expectation and high-probability guarantees.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "exitrisk/calibrate.hpp"
#include "exitrisk/trace.hpp"

namespace exitrisk {

struct TrialRecord {
  double lambda_hat = 1.0;
  double test_risk = 0.0;
  double mean_exit = 0.0;
  double gain = 0.0;
  bool empty_set = false;
};

struct TrialReport {
  Method method = Method::crc;
  double epsilon = 0.0;
  std::optional<double> delta;
  std::size_t num_trials = 0;
  double cal_fraction = 0.0;
  std::uint64_t seed = 0;

  std::vector<TrialRecord> trials;

  double mean_test_risk = 0.0;
  double se_test_risk = 0.0;      // standard error of the mean
  double violation_rate = 0.0;    // fraction of trials with test risk > eps
  double mean_gain = 0.0;
  double std_gain = 0.0;
  double mean_exit_layer = 0.0;
  double empty_set_rate = 0.0;

  // Marginal-monotonicity diagnostic on the full pool, carried alongside the
  // guarantee verdicts.
  std::vector<double> exit_mean_losses;
  bool marginally_monotone = false;

  std::string to_json() const;
  // CSV columns trial,lambda_hat,test_risk,mean_exit,gain,empty_set.
  std::string trials_to_csv() const;
};

struct TrialConfig {
  Method method = Method::crc;
  double epsilon = 0.05;
  std::optional<double> delta;  // required for ucb and ltt
  std::size_t num_trials = 100;  // S
  double cal_fraction = 0.8;
  double grid_step = 0.01;
  std::uint64_t seed = 0;
  NuMode nu_mode = NuMode::one_over_b;
  double wsr_grid_step = 1e-3;
  // 0 resolves to the EXITRISK_WORKERS environment variable, then 1. Trial
  // results are identical for any worker count.
  int workers = 0;
};

// For s = 1..S derives a per-trial seed, splits the pool, derives losses on
// each part, calibrates lambda on the calibration part and evaluates the
// empirical risk and efficiency on the test part. Trial s depends only on
// (seed, s), never on S or thread scheduling.
TrialReport run_trials(const TraceSet& ts, const RiskSpec& spec,
                       const TrialConfig& cfg);

struct GuaranteeVerdict {
  bool expectation_pass = false;
  double expectation_margin = 0.0;  // epsilon + 2 SE, the bar that was used
  std::optional<bool> high_prob_pass;
  double high_prob_margin = 0.0;  // delta + 3 binomial SE
  bool marginally_monotone = false;

  std::string summary() const;
};

// Expectation verdict: mean test risk <= epsilon + 2 SE. High-probability
// verdict (when delta is given): violation rate <= delta + 3 binomial SE.
// Throws when delta is absent for a high-probability method.
GuaranteeVerdict check_guarantees(const TrialReport& report, double epsilon,
                                  std::optional<double> delta);

}  // namespace exitrisk
