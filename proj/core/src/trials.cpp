#include "exitrisk/trials.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "rng.hpp"

namespace exitrisk {

namespace {

// Stream tags for deriving per-trial seeds from the harness seed.
constexpr std::uint64_t kDiagnosticStream = 0;
constexpr std::uint64_t kTrialStreamBase = 1;

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("EXITRISK_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

void check_config(const TraceSet& ts, const TrialConfig& cfg) {
  if (cfg.num_trials == 0) throw std::invalid_argument("S must be >= 1");
  if (ts.size() < 2) throw std::invalid_argument("trace set too small to split");
  if ((cfg.method == Method::ucb || cfg.method == Method::ltt) && !cfg.delta) {
    throw std::invalid_argument("delta is required for method " +
                                to_string(cfg.method));
  }
}

TrialRecord run_one_trial(const TraceSet& ts, const RiskSpec& spec,
                          const TrialConfig& cfg, const ThresholdGrid& grid,
                          std::size_t trial_index) {
  const std::uint64_t trial_seed =
      detail::mix_seed(cfg.seed, kTrialStreamBase + trial_index);
  auto [cal, test] = split(ts, cfg.cal_fraction, trial_seed);

  RiskSpec trial_spec = spec;
  trial_spec.seed = detail::mix_seed(trial_seed, 1);
  const LossMatrix cal_losses = derive_losses(cal, trial_spec);
  const LossMatrix test_losses = derive_losses(test, trial_spec);

  CalibrationResult calib;
  switch (cfg.method) {
    case Method::emp:
      calib = lambda_empirical(risk_curve(cal_losses, cal, grid), cfg.epsilon);
      break;
    case Method::crc:
      calib = lambda_crc(risk_curve(cal_losses, cal, grid), cfg.epsilon,
                         spec.bound, cal.size());
      break;
    case Method::ucb: {
      WsrConfig wsr;
      wsr.delta = *cfg.delta;
      wsr.bound = spec.bound;
      wsr.nu_mode = cfg.nu_mode;
      wsr.epsilon_grid_step = cfg.wsr_grid_step;
      calib = lambda_ucb(cal_losses, cal, grid, cfg.epsilon, *cfg.delta, wsr);
      break;
    }
    case Method::ltt:
      calib = lambda_ltt(cal_losses, cal, grid, cfg.epsilon, *cfg.delta,
                         spec.bound);
      break;
  }

  TrialRecord rec;
  rec.lambda_hat = calib.lambda_hat;
  rec.empty_set = calib.empty_set;
  rec.test_risk = empirical_risk(test_losses, test, calib.lambda_hat);
  const EfficiencyReport eff = efficiency_metrics(test, calib.lambda_hat);
  rec.mean_exit = eff.mean_exit_layer;
  rec.gain = eff.relative_gain;
  return rec;
}

}  // namespace

TrialReport run_trials(const TraceSet& ts, const RiskSpec& spec,
                       const TrialConfig& cfg) {
  check_config(ts, cfg);
  const ThresholdGrid grid(cfg.grid_step);

  TrialReport report;
  report.method = cfg.method;
  report.epsilon = cfg.epsilon;
  report.delta = cfg.delta;
  report.num_trials = cfg.num_trials;
  report.cal_fraction = cfg.cal_fraction;
  report.seed = cfg.seed;
  report.trials.resize(cfg.num_trials);

  // Monotonicity diagnostic on the full pool, reported alongside verdicts.
  {
    RiskSpec diag_spec = spec;
    diag_spec.seed = detail::mix_seed(cfg.seed, kDiagnosticStream);
    const MonotonicityReport mono =
        check_marginal_monotonicity(derive_losses(ts, diag_spec));
    report.exit_mean_losses = mono.mean_losses;
    report.marginally_monotone = mono.monotone;
  }

  const int workers =
      std::min<int>(resolve_workers(cfg.workers),
                    static_cast<int>(cfg.num_trials));
  if (workers <= 1) {
    for (std::size_t s = 0; s < cfg.num_trials; ++s) {
      report.trials[s] = run_one_trial(ts, spec, cfg, grid, s);
    }
  } else {
    // Trials are independent; any worker may pick up any index and the
    // result depends only on (seed, s).
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
      for (;;) {
        const std::size_t s = next.fetch_add(1);
        if (s >= cfg.num_trials) return;
        try {
          report.trials[s] = run_one_trial(ts, spec, cfg, grid, s);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  // Aggregate in trial order.
  const auto S = static_cast<double>(cfg.num_trials);
  double risk_sum = 0.0;
  double gain_sum = 0.0;
  double exit_sum = 0.0;
  std::size_t violations = 0;
  std::size_t empties = 0;
  for (const auto& rec : report.trials) {
    risk_sum += rec.test_risk;
    gain_sum += rec.gain;
    exit_sum += rec.mean_exit;
    if (rec.test_risk > cfg.epsilon) ++violations;
    if (rec.empty_set) ++empties;
  }
  report.mean_test_risk = risk_sum / S;
  report.mean_gain = gain_sum / S;
  report.mean_exit_layer = exit_sum / S;
  report.violation_rate = static_cast<double>(violations) / S;
  report.empty_set_rate = static_cast<double>(empties) / S;

  double risk_var = 0.0;
  double gain_var = 0.0;
  for (const auto& rec : report.trials) {
    risk_var += (rec.test_risk - report.mean_test_risk) *
                (rec.test_risk - report.mean_test_risk);
    gain_var += (rec.gain - report.mean_gain) * (rec.gain - report.mean_gain);
  }
  if (cfg.num_trials > 1) {
    risk_var /= S - 1.0;
    gain_var /= S - 1.0;
  } else {
    risk_var = 0.0;
    gain_var = 0.0;
  }
  report.se_test_risk = std::sqrt(risk_var / S);
  report.std_gain = std::sqrt(gain_var);
  return report;
}

std::string TrialReport::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = exitrisk::to_string(method);
  j["epsilon"] = epsilon;
  if (delta) {
    j["delta"] = *delta;
  } else {
    j["delta"] = nullptr;
  }
  j["num_trials"] = num_trials;
  j["cal_fraction"] = cal_fraction;
  j["seed"] = seed;
  j["mean_test_risk"] = mean_test_risk;
  j["se_test_risk"] = se_test_risk;
  j["violation_rate"] = violation_rate;
  j["mean_gain"] = mean_gain;
  j["std_gain"] = std_gain;
  j["mean_exit_layer"] = mean_exit_layer;
  j["empty_set_rate"] = empty_set_rate;
  j["exit_mean_losses"] = exit_mean_losses;
  j["marginally_monotone"] = marginally_monotone;
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < trials.size(); ++s) {
    const auto& rec = trials[s];
    arr.push_back({{"trial", s},
                   {"lambda_hat", rec.lambda_hat},
                   {"test_risk", rec.test_risk},
                   {"mean_exit", rec.mean_exit},
                   {"gain", rec.gain},
                   {"empty_set", rec.empty_set}});
  }
  j["trials"] = arr;
  return j.dump(2);
}

std::string TrialReport::trials_to_csv() const {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    for (int prec = 1; prec < 17; ++prec) {
      char probe[32];
      std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
      if (std::stod(probe) == v) return std::string(probe);
    }
    return std::string(buf);
  };
  std::ostringstream out;
  out << "trial,lambda_hat,test_risk,mean_exit,gain,empty_set\n";
  for (std::size_t s = 0; s < trials.size(); ++s) {
    const auto& rec = trials[s];
    out << s << "," << fmt(rec.lambda_hat) << "," << fmt(rec.test_risk) << ","
        << fmt(rec.mean_exit) << "," << fmt(rec.gain) << ","
        << (rec.empty_set ? 1 : 0) << "\n";
  }
  return out.str();
}

GuaranteeVerdict check_guarantees(const TrialReport& report, double epsilon,
                                  std::optional<double> delta) {
  if ((report.method == Method::ucb || report.method == Method::ltt) &&
      !delta) {
    throw std::invalid_argument(
        "delta is required to judge a high-probability method");
  }
  GuaranteeVerdict verdict;
  verdict.marginally_monotone = report.marginally_monotone;
  verdict.expectation_margin = epsilon + 2.0 * report.se_test_risk;
  verdict.expectation_pass = report.mean_test_risk <= verdict.expectation_margin;
  if (delta) {
    const double se = std::sqrt(
        *delta * (1.0 - *delta) / static_cast<double>(report.num_trials));
    verdict.high_prob_margin = *delta + 3.0 * se;
    verdict.high_prob_pass = report.violation_rate <= verdict.high_prob_margin;
  }
  return verdict;
}

std::string GuaranteeVerdict::summary() const {
  std::ostringstream out;
  out << "expectation=" << (expectation_pass ? "pass" : "fail")
      << " (margin " << expectation_margin << ")";
  if (high_prob_pass) {
    out << " high_prob=" << (*high_prob_pass ? "pass" : "fail") << " (margin "
        << high_prob_margin << ")";
  }
  if (!marginally_monotone) out << " [warning: pool not marginally monotone]";
  return out.str();
}

}  // namespace exitrisk
