// Command-line front end: trace ingestion, synthetic generation, threshold
// calibration, single-threshold evaluation and Monte-Carlo trial sweeps.
// Every run is reproducible from its flags (or an equivalent JSON config
// file; flags override file values).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "exitrisk/calibrate.hpp"
#include "exitrisk/risk.hpp"
#include "exitrisk/synth.hpp"
#include "exitrisk/trace.hpp"
#include "exitrisk/trials.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  for (int prec = 1; prec < 17; ++prec) {
    char probe[32];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    if (std::stod(probe) == v) return probe;
  }
  return buf;
}

// Temp file in the target directory, then rename; readers never observe a
// half-written artifact.
void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  fs::path dir = target.parent_path();
  if (dir.empty()) dir = ".";
  const fs::path tmp = dir / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, target);
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": malformed config: " + e.what());
  }
}

// Applies a config value when the flag was not given on the command line.
template <typename T>
void config_default(const json& cfg, const char* key, const CLI::Option* opt,
                    T& var) {
  if (opt != nullptr && opt->count() > 0) return;
  if (!cfg.contains(key) || cfg[key].is_null()) return;
  var = cfg[key].get<T>();
}

struct CommonArgs {
  std::string config_path;
  std::string traces_path;
  std::string traces_format;  // "", "jsonl", "csv"
  std::string synth_path;
  std::string risk = "gap";
  std::string target = "prediction";
  std::string loss_name;
  bool clip = false;
  double bound = 0.0;  // 0 = pick 1 (prediction) or 2 (distribution)
  std::uint64_t risk_seed = 0;
  std::string out_path;
  std::string out_format = "json";

  CLI::Option* traces_opt = nullptr;
  CLI::Option* format_opt = nullptr;
  CLI::Option* synth_opt = nullptr;
  CLI::Option* risk_opt = nullptr;
  CLI::Option* target_opt = nullptr;
  CLI::Option* loss_opt = nullptr;
  CLI::Option* clip_opt = nullptr;
  CLI::Option* bound_opt = nullptr;
  CLI::Option* risk_seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* out_format_opt = nullptr;
};

void add_common_input(CLI::App* cmd, CommonArgs& a, bool with_risk_spec) {
  cmd->add_option("--config", a.config_path,
                  "JSON config file; flags override its values");
  a.traces_opt = cmd->add_option("--traces", a.traces_path, "trace file path");
  a.format_opt = cmd->add_option("--traces-format", a.traces_format,
                                 "trace file format (jsonl|csv); default from extension")
                     ->check(CLI::IsMember({"jsonl", "csv"}));
  a.synth_opt = cmd->add_option("--synth", a.synth_path,
                                "synthetic generator config (JSON)");
  if (with_risk_spec) {
    a.risk_opt = cmd->add_option("--risk", a.risk, "risk kind (gap|consistency)")
                     ->check(CLI::IsMember({"gap", "consistency"}));
    a.target_opt = cmd->add_option("--target", a.target,
                                   "risk target (prediction|distribution)")
                       ->check(CLI::IsMember({"prediction", "distribution"}));
    a.loss_opt = cmd->add_option("--loss", a.loss_name,
                                 "precomputed loss name for prediction targets");
    a.clip_opt = cmd->add_flag("--clip", a.clip,
                               "clip per-sample relative losses at zero");
    a.bound_opt = cmd->add_option("--bound", a.bound,
                                  "loss bound B (default 1, or 2 for Brier)");
    a.risk_seed_opt = cmd->add_option("--risk-seed", a.risk_seed,
                                      "seed for consistency label sampling");
  }
  a.out_opt = cmd->add_option("--out", a.out_path,
                              "output path (stdout when omitted)");
  a.out_format_opt = cmd->add_option("--format", a.out_format,
                                     "output format (json|csv)")
                         ->check(CLI::IsMember({"json", "csv"}));
}

void apply_common_config(const json& cfg, CommonArgs& a) {
  config_default(cfg, "traces", a.traces_opt, a.traces_path);
  config_default(cfg, "traces-format", a.format_opt, a.traces_format);
  config_default(cfg, "synth", a.synth_opt, a.synth_path);
  config_default(cfg, "risk", a.risk_opt, a.risk);
  config_default(cfg, "target", a.target_opt, a.target);
  config_default(cfg, "loss", a.loss_opt, a.loss_name);
  config_default(cfg, "clip", a.clip_opt, a.clip);
  config_default(cfg, "bound", a.bound_opt, a.bound);
  config_default(cfg, "risk-seed", a.risk_seed_opt, a.risk_seed);
  config_default(cfg, "out", a.out_opt, a.out_path);
  config_default(cfg, "format", a.out_format_opt, a.out_format);
}

exitrisk::RiskSpec make_risk_spec(const CommonArgs& a) {
  exitrisk::RiskSpec spec;
  spec.kind = exitrisk::risk_kind_from_string(a.risk);
  spec.target = exitrisk::risk_target_from_string(a.target);
  spec.loss_name = a.loss_name;
  spec.clip_nonneg = a.clip;
  spec.bound = a.bound > 0.0
                   ? a.bound
                   : (spec.target == exitrisk::RiskTarget::distribution ? 2.0
                                                                        : 1.0);
  spec.seed = a.risk_seed;
  return spec;
}

exitrisk::TraceSet load_input(const CommonArgs& a) {
  const bool have_traces = !a.traces_path.empty();
  const bool have_synth = !a.synth_path.empty();
  if (have_traces == have_synth) {
    throw std::runtime_error("give exactly one of --traces or --synth");
  }
  if (have_synth) {
    return exitrisk::generate(exitrisk::load_synth_config(a.synth_path));
  }
  const exitrisk::TraceFormat fmt =
      a.traces_format.empty()
          ? exitrisk::trace_format_from_path(a.traces_path)
          : (a.traces_format == "csv" ? exitrisk::TraceFormat::csv
                                      : exitrisk::TraceFormat::jsonl);
  return exitrisk::load_traces(a.traces_path, fmt);
}

// Artifact to --out (atomically) or stdout; the one-line summary goes to
// whichever stream the artifact does not occupy.
void emit(const CommonArgs& a, const std::string& artifact,
          const std::string& summary) {
  if (a.out_path.empty()) {
    std::cerr << summary << "\n";
    std::cout << artifact;
    if (!artifact.empty() && artifact.back() != '\n') std::cout << "\n";
  } else {
    write_file_atomic(a.out_path, artifact);
    std::cout << summary << "\n";
  }
}

struct MethodArgs {
  std::string method = "crc";
  double epsilon = 0.05;
  double delta_value = 0.1;
  bool have_delta = false;
  double grid_step = 0.01;
  std::string nu_mode = "one_over_B";
  double wsr_step = 1e-3;

  CLI::Option* method_opt = nullptr;
  CLI::Option* epsilon_opt = nullptr;
  CLI::Option* delta_opt = nullptr;
  CLI::Option* grid_opt = nullptr;
  CLI::Option* nu_opt = nullptr;
  CLI::Option* wsr_opt = nullptr;
};

void add_method_options(CLI::App* cmd, MethodArgs& m, bool epsilon_scalar) {
  m.method_opt = cmd->add_option("--method", m.method,
                                 "selector (emp|crc|ucb|ltt)")
                     ->check(CLI::IsMember({"emp", "crc", "ucb", "ltt"}));
  if (epsilon_scalar) {
    m.epsilon_opt = cmd->add_option("--epsilon", m.epsilon, "risk level");
  }
  m.delta_opt = cmd->add_option("--delta", m.delta_value,
                                "probability level for ucb/ltt");
  m.grid_opt = cmd->add_option("--grid-step", m.grid_step,
                               "threshold grid step");
  m.nu_opt = cmd->add_option("--nu-mode", m.nu_mode,
                             "WSR betting cap (one_over_B|half_over_B)")
                 ->check(CLI::IsMember({"one_over_B", "half_over_B"}));
  m.wsr_opt = cmd->add_option("--wsr-step", m.wsr_step,
                              "WSR bound grid step");
}

void apply_method_config(const json& cfg, MethodArgs& m) {
  config_default(cfg, "method", m.method_opt, m.method);
  if (m.epsilon_opt != nullptr) {
    config_default(cfg, "epsilon", m.epsilon_opt, m.epsilon);
  }
  m.have_delta = m.delta_opt->count() > 0;
  if (!m.have_delta && cfg.contains("delta") && !cfg["delta"].is_null()) {
    m.delta_value = cfg["delta"].get<double>();
    m.have_delta = true;
  }
  config_default(cfg, "grid-step", m.grid_opt, m.grid_step);
  config_default(cfg, "nu-mode", m.nu_opt, m.nu_mode);
  config_default(cfg, "wsr-step", m.wsr_opt, m.wsr_step);
}

std::optional<double> delta_of(const MethodArgs& m) {
  if (m.have_delta) return m.delta_value;
  return std::nullopt;
}

int cmd_calibrate(const CommonArgs& a, const MethodArgs& m) {
  const exitrisk::TraceSet ts = load_input(a);
  const exitrisk::RiskSpec spec = make_risk_spec(a);
  const exitrisk::LossMatrix lm = exitrisk::derive_losses(ts, spec);
  const exitrisk::ThresholdGrid grid(m.grid_step);
  const exitrisk::Method method = exitrisk::method_from_string(m.method);
  const std::optional<double> delta = delta_of(m);

  exitrisk::CalibrationResult result;
  switch (method) {
    case exitrisk::Method::emp:
      result = exitrisk::lambda_empirical(exitrisk::risk_curve(lm, ts, grid),
                                          m.epsilon);
      break;
    case exitrisk::Method::crc:
      result = exitrisk::lambda_crc(exitrisk::risk_curve(lm, ts, grid),
                                    m.epsilon, spec.bound, ts.size());
      break;
    case exitrisk::Method::ucb: {
      if (!delta) throw std::runtime_error("--delta is required for ucb");
      exitrisk::WsrConfig wsr;
      wsr.delta = *delta;
      wsr.bound = spec.bound;
      wsr.nu_mode = exitrisk::nu_mode_from_string(m.nu_mode);
      wsr.epsilon_grid_step = m.wsr_step;
      result = exitrisk::lambda_ucb(lm, ts, grid, m.epsilon, *delta, wsr);
      break;
    }
    case exitrisk::Method::ltt:
      if (!delta) throw std::runtime_error("--delta is required for ltt");
      result =
          exitrisk::lambda_ltt(lm, ts, grid, m.epsilon, *delta, spec.bound);
      break;
  }

  const double cal_risk =
      exitrisk::empirical_risk(lm, ts, result.lambda_hat);
  const exitrisk::EfficiencyReport eff =
      exitrisk::efficiency_metrics(ts, result.lambda_hat);
  std::ostringstream summary;
  summary << exitrisk::to_string(method)
          << ": lambda_hat=" << format_double(result.lambda_hat)
          << " eps=" << format_double(m.epsilon)
          << " cal_risk=" << format_double(cal_risk)
          << " mean_exit=" << format_double(eff.mean_exit_layer)
          << " gain=" << format_double(100.0 * eff.relative_gain) << "%"
          << " n=" << ts.size() << (result.empty_set ? " empty_set" : "");
  emit(a,
       a.out_format == "csv" ? exitrisk::risk_curve_to_csv(result.curve)
                             : result.to_json(),
       summary.str());
  return 0;
}

int cmd_evaluate(const CommonArgs& a, double lambda,
                 const std::string& result_path,
                 const std::vector<double>& cost_weights, bool have_lambda) {
  const exitrisk::TraceSet ts = load_input(a);
  const exitrisk::RiskSpec spec = make_risk_spec(a);
  double lam = lambda;
  if (!result_path.empty()) {
    const json r = load_config_file(result_path);
    lam = r.at("lambda_hat").get<double>();
  } else if (!have_lambda) {
    throw std::runtime_error("give --lambda or --result");
  }
  const exitrisk::LossMatrix lm = exitrisk::derive_losses(ts, spec);
  const double risk = exitrisk::empirical_risk(lm, ts, lam);
  const exitrisk::EfficiencyReport eff =
      exitrisk::efficiency_metrics(ts, lam, cost_weights);

  ordered_json j;
  j["lambda"] = lam;
  j["risk"] = risk;
  j["mean_exit_layer"] = eff.mean_exit_layer;
  j["relative_gain"] = eff.relative_gain;
  if (eff.has_cost_weighted_gain) {
    j["cost_weighted_gain"] = eff.cost_weighted_gain;
  }
  j["n"] = ts.size();
  j["risk_kind"] = exitrisk::to_string(spec.kind);
  j["risk_target"] = exitrisk::to_string(spec.target);
  j["clip_nonneg"] = spec.clip_nonneg;
  j["bound"] = spec.bound;

  std::string artifact;
  if (a.out_format == "csv") {
    std::ostringstream out;
    out << "lambda,risk,mean_exit_layer,relative_gain";
    if (eff.has_cost_weighted_gain) out << ",cost_weighted_gain";
    out << "\n"
        << format_double(lam) << "," << format_double(risk) << ","
        << format_double(eff.mean_exit_layer) << ","
        << format_double(eff.relative_gain);
    if (eff.has_cost_weighted_gain) {
      out << "," << format_double(eff.cost_weighted_gain);
    }
    out << "\n";
    artifact = out.str();
  } else {
    artifact = j.dump(2);
  }
  std::ostringstream summary;
  summary << "evaluate: lambda=" << format_double(lam)
          << " risk=" << format_double(risk)
          << " mean_exit=" << format_double(eff.mean_exit_layer)
          << " gain=" << format_double(100.0 * eff.relative_gain) << "%";
  emit(a, artifact, summary.str());
  return 0;
}

int cmd_generate(const CommonArgs& a, const std::string& trace_format) {
  if (a.synth_path.empty()) throw std::runtime_error("--synth is required");
  if (a.out_path.empty()) throw std::runtime_error("--out is required");
  const exitrisk::SynthConfig cfg = exitrisk::load_synth_config(a.synth_path);
  const exitrisk::TraceSet ts = exitrisk::generate(cfg);
  const exitrisk::TraceFormat fmt = trace_format == "csv"
                                        ? exitrisk::TraceFormat::csv
                                        : exitrisk::TraceFormat::jsonl;
  // save_traces writes the final file directly; route through a temp name
  // so the output appears atomically.
  const fs::path target(a.out_path);
  fs::path dir = target.parent_path();
  if (dir.empty()) dir = ".";
  const fs::path tmp = dir / (target.filename().string() + ".tmp");
  exitrisk::save_traces(ts, tmp.string(), fmt);
  fs::rename(tmp, target);
  if (fmt == exitrisk::TraceFormat::csv &&
      fs::exists(tmp.string() + ".meta")) {
    fs::rename(tmp.string() + ".meta", a.out_path + ".meta");
  }
  std::cout << "generate: n=" << ts.size() << " L=" << ts.num_exits
            << " K=" << ts.num_classes << " -> " << a.out_path << "\n";
  return 0;
}

exitrisk::TrialConfig make_trial_config(const MethodArgs& m, std::size_t S,
                                        double cal_fraction,
                                        std::uint64_t seed, int workers,
                                        double epsilon) {
  exitrisk::TrialConfig cfg;
  cfg.method = exitrisk::method_from_string(m.method);
  cfg.epsilon = epsilon;
  cfg.delta = delta_of(m);
  cfg.num_trials = S;
  cfg.cal_fraction = cal_fraction;
  cfg.grid_step = m.grid_step;
  cfg.seed = seed;
  cfg.nu_mode = exitrisk::nu_mode_from_string(m.nu_mode);
  cfg.wsr_grid_step = m.wsr_step;
  cfg.workers = workers;
  return cfg;
}

int cmd_trials(const CommonArgs& a, const MethodArgs& m, std::size_t S,
               double cal_fraction, std::uint64_t seed, int workers) {
  const exitrisk::TraceSet ts = load_input(a);
  const exitrisk::RiskSpec spec = make_risk_spec(a);
  const exitrisk::TrialConfig cfg =
      make_trial_config(m, S, cal_fraction, seed, workers, m.epsilon);
  const exitrisk::TrialReport report = exitrisk::run_trials(ts, spec, cfg);
  const exitrisk::GuaranteeVerdict verdict =
      exitrisk::check_guarantees(report, m.epsilon, cfg.delta);

  std::ostringstream summary;
  summary << exitrisk::to_string(cfg.method) << ": S=" << S
          << " eps=" << format_double(m.epsilon)
          << " mean_test_risk=" << format_double(report.mean_test_risk)
          << " violation_rate=" << format_double(report.violation_rate)
          << " mean_gain=" << format_double(100.0 * report.mean_gain) << "%"
          << " " << verdict.summary();
  emit(a, a.out_format == "csv" ? report.trials_to_csv() : report.to_json(),
       summary.str());
  return 0;
}

int cmd_curve(const CommonArgs& a, const MethodArgs& m,
              const std::vector<double>& epsilons, std::size_t S,
              double cal_fraction, std::uint64_t seed, int workers) {
  if (epsilons.empty()) {
    throw std::runtime_error("curve needs a non-empty --epsilon list");
  }
  const exitrisk::TraceSet ts = load_input(a);
  const exitrisk::RiskSpec spec = make_risk_spec(a);

  std::ostringstream csv;
  csv << "epsilon,mean_lambda,mean_test_risk,se_test_risk,violation_rate,"
         "mean_exit_layer,mean_gain,std_gain,empty_set_rate\n";
  ordered_json rows = ordered_json::array();
  for (double eps : epsilons) {
    const exitrisk::TrialConfig cfg =
        make_trial_config(m, S, cal_fraction, seed, workers, eps);
    const exitrisk::TrialReport report = exitrisk::run_trials(ts, spec, cfg);
    double lambda_sum = 0.0;
    for (const auto& rec : report.trials) lambda_sum += rec.lambda_hat;
    const double mean_lambda =
        lambda_sum / static_cast<double>(report.trials.size());
    csv << format_double(eps) << "," << format_double(mean_lambda) << ","
        << format_double(report.mean_test_risk) << ","
        << format_double(report.se_test_risk) << ","
        << format_double(report.violation_rate) << ","
        << format_double(report.mean_exit_layer) << ","
        << format_double(report.mean_gain) << ","
        << format_double(report.std_gain) << ","
        << format_double(report.empty_set_rate) << "\n";
    rows.push_back({{"epsilon", eps},
                    {"mean_lambda", mean_lambda},
                    {"mean_test_risk", report.mean_test_risk},
                    {"se_test_risk", report.se_test_risk},
                    {"violation_rate", report.violation_rate},
                    {"mean_exit_layer", report.mean_exit_layer},
                    {"mean_gain", report.mean_gain},
                    {"std_gain", report.std_gain},
                    {"empty_set_rate", report.empty_set_rate}});
  }
  std::ostringstream summary;
  summary << exitrisk::to_string(exitrisk::method_from_string(m.method))
          << " curve: " << epsilons.size() << " epsilon values, S=" << S;
  emit(a, a.out_format == "csv" ? csv.str() : rows.dump(2), summary.str());
  return 0;
}

int run(std::vector<std::string> args) {
  CLI::App app{"risk-controlling exit thresholds for early-exit models"};
  app.require_subcommand(1);

  // A bare `--config file.json` names the command inside the file.
  if (args.size() >= 2 && args[1].rfind("--config", 0) == 0) {
    std::string path;
    if (args[1].size() > 8 && args[1][8] == '=') {
      path = args[1].substr(9);
    } else if (args.size() >= 3) {
      path = args[2];
    }
    if (!path.empty()) {
      const json cfg = load_config_file(path);
      if (cfg.contains("command")) {
        args.insert(args.begin() + 1, cfg["command"].get<std::string>());
      }
    }
  }

  // calibrate ---------------------------------------------------------
  auto* cal = app.add_subcommand("calibrate",
                                 "select a risk-controlling exit threshold");
  CommonArgs cal_a;
  MethodArgs cal_m;
  add_common_input(cal, cal_a, true);
  add_method_options(cal, cal_m, true);
  cal->callback([&]() {
    json cfg;
    if (!cal_a.config_path.empty()) cfg = load_config_file(cal_a.config_path);
    apply_common_config(cfg, cal_a);
    apply_method_config(cfg, cal_m);
    cmd_calibrate(cal_a, cal_m);
  });

  // evaluate ----------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate",
                                "empirical risk and efficiency at a threshold");
  CommonArgs ev_a;
  double ev_lambda = 1.0;
  std::string ev_result;
  std::vector<double> ev_costs;
  add_common_input(ev, ev_a, true);
  auto* ev_lambda_opt =
      ev->add_option("--lambda", ev_lambda, "exit threshold to evaluate");
  auto* ev_result_opt = ev->add_option(
      "--result", ev_result, "calibration result JSON to take lambda from");
  auto* ev_costs_opt =
      ev->add_option("--cost-weights", ev_costs,
                     "cumulative per-exit costs (L comma-separated values)")
          ->delimiter(',');
  ev->callback([&]() {
    json cfg;
    if (!ev_a.config_path.empty()) cfg = load_config_file(ev_a.config_path);
    apply_common_config(cfg, ev_a);
    config_default(cfg, "result", ev_result_opt, ev_result);
    config_default(cfg, "cost-weights", ev_costs_opt, ev_costs);
    bool have_lambda = ev_lambda_opt->count() > 0;
    if (!have_lambda && cfg.contains("lambda") && !cfg["lambda"].is_null()) {
      ev_lambda = cfg["lambda"].get<double>();
      have_lambda = true;
    }
    cmd_evaluate(ev_a, ev_lambda, ev_result, ev_costs, have_lambda);
  });

  // generate ----------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "write synthetic traces");
  CommonArgs gen_a;
  std::string gen_format = "jsonl";
  add_common_input(gen, gen_a, false);
  auto* gen_format_opt =
      gen->add_option("--trace-format", gen_format,
                      "trace file format (jsonl|csv)")
          ->check(CLI::IsMember({"jsonl", "csv"}));
  gen->callback([&]() {
    json cfg;
    if (!gen_a.config_path.empty()) cfg = load_config_file(gen_a.config_path);
    apply_common_config(cfg, gen_a);
    config_default(cfg, "trace-format", gen_format_opt, gen_format);
    cmd_generate(gen_a, gen_format);
  });

  // trials ------------------------------------------------------------
  auto* tr = app.add_subcommand(
      "trials", "Monte-Carlo calibration/test splits with guarantee verdicts");
  CommonArgs tr_a;
  MethodArgs tr_m;
  std::size_t tr_S = 100;
  double tr_cal_fraction = 0.8;
  std::uint64_t tr_seed = 0;
  int tr_workers = 0;
  add_common_input(tr, tr_a, true);
  add_method_options(tr, tr_m, true);
  auto* tr_S_opt = tr->add_option("--S", tr_S, "number of trials");
  auto* tr_cf_opt =
      tr->add_option("--cal-fraction", tr_cal_fraction, "calibration fraction");
  auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "harness seed");
  auto* tr_workers_opt = tr->add_option(
      "--workers", tr_workers, "worker threads (default EXITRISK_WORKERS or 1)");
  tr->callback([&]() {
    json cfg;
    if (!tr_a.config_path.empty()) cfg = load_config_file(tr_a.config_path);
    apply_common_config(cfg, tr_a);
    apply_method_config(cfg, tr_m);
    config_default(cfg, "S", tr_S_opt, tr_S);
    config_default(cfg, "cal-fraction", tr_cf_opt, tr_cal_fraction);
    config_default(cfg, "seed", tr_seed_opt, tr_seed);
    config_default(cfg, "workers", tr_workers_opt, tr_workers);
    cmd_trials(tr_a, tr_m, tr_S, tr_cal_fraction, tr_seed, tr_workers);
  });

  // curve ------------------------------------------------------------
  auto* cv = app.add_subcommand(
      "curve", "trial sweep over a list of epsilon values (plot-ready CSV)");
  CommonArgs cv_a;
  MethodArgs cv_m;
  std::vector<double> cv_eps;
  std::size_t cv_S = 100;
  double cv_cal_fraction = 0.8;
  std::uint64_t cv_seed = 0;
  int cv_workers = 0;
  add_common_input(cv, cv_a, true);
  add_method_options(cv, cv_m, false);
  auto* cv_eps_opt =
      cv->add_option("--epsilon", cv_eps, "comma-separated risk levels")
          ->delimiter(',');
  auto* cv_S_opt = cv->add_option("--S", cv_S, "number of trials per epsilon");
  auto* cv_cf_opt =
      cv->add_option("--cal-fraction", cv_cal_fraction, "calibration fraction");
  auto* cv_seed_opt = cv->add_option("--seed", cv_seed, "harness seed");
  auto* cv_workers_opt = cv->add_option("--workers", cv_workers,
                                        "worker threads");
  cv->callback([&]() {
    json cfg;
    if (!cv_a.config_path.empty()) cfg = load_config_file(cv_a.config_path);
    apply_common_config(cfg, cv_a);
    apply_method_config(cfg, cv_m);
    if (cv_eps_opt->count() == 0 && cfg.contains("epsilon")) {
      if (cfg["epsilon"].is_array()) {
        cv_eps = cfg["epsilon"].get<std::vector<double>>();
      } else {
        cv_eps = {cfg["epsilon"].get<double>()};
      }
    }
    config_default(cfg, "S", cv_S_opt, cv_S);
    config_default(cfg, "cal-fraction", cv_cf_opt, cv_cal_fraction);
    config_default(cfg, "seed", cv_seed_opt, cv_seed);
    config_default(cfg, "workers", cv_workers_opt, cv_workers);
    cmd_curve(cv_a, cv_m, cv_eps, cv_S, cv_cal_fraction, cv_seed, cv_workers);
  });

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  try {
    return run(std::move(args));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
