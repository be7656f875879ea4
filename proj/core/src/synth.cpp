#include "exitrisk/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "rng.hpp"

namespace exitrisk {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_config(const SynthConfig& cfg) {
  if (cfg.num_samples == 0) throw std::invalid_argument("n must be >= 1");
  if (cfg.num_exits < 2) throw std::invalid_argument("L must be >= 2");
  if (cfg.num_classes < 2) throw std::invalid_argument("K must be >= 2");
  if (!(cfg.difficulty_spread >= 0.0)) {
    throw std::invalid_argument("difficulty_spread must be >= 0");
  }
  if (static_cast<int>(cfg.exit_gain.size()) != cfg.num_exits - 1) {
    throw std::invalid_argument("exit_gain needs L-1 entries");
  }
  for (double g : cfg.exit_gain) {
    if (!(g >= -1.0 && g <= 1.0)) {
      throw std::invalid_argument("exit_gain entries must lie in [-1, 1]");
    }
  }
  if (!(cfg.overthinking_frac >= 0.0 && cfg.overthinking_frac <= 1.0)) {
    throw std::invalid_argument("overthinking_frac must lie in [0, 1]");
  }
  if (!(cfg.confidence_noise >= 0.0)) {
    throw std::invalid_argument("confidence_noise must be >= 0");
  }
}

// Offset a with mean_i sigmoid(a - d_i) == target, found by bisection.
double fit_offset(const std::vector<double>& difficulty, double target) {
  double lo = -60.0;
  double hi = 60.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double mean = 0.0;
    for (double d : difficulty) mean += sigmoid(mid - d);
    mean /= static_cast<double>(difficulty.size());
    if (mean < target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-12) break;
  }
  return 0.5 * (lo + hi);
}

// Per-sample substream channels; fixed tags keep draws independent of both
// generation order and thread count.
enum Channel : std::uint64_t {
  kDifficulty = 0,
  kCorrectness = 1,
  kLabel = 2,
  kDistractor = 3,
  kSharpness = 4,
  kOverthink = 5,
  kNoiseBase = 6,
};

}  // namespace

SynthConfig load_synth_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open synth config: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path + ": malformed config: " + e.what());
  }
  SynthConfig cfg;
  cfg.num_samples = j.at("n").get<std::size_t>();
  cfg.num_exits = j.at("L").get<int>();
  cfg.num_classes = j.at("K").get<int>();
  if (j.contains("difficulty_spread")) {
    cfg.difficulty_spread = j["difficulty_spread"].get<double>();
  }
  cfg.exit_gain = j.at("exit_gain").get<std::vector<double>>();
  if (j.contains("overthinking_frac")) {
    cfg.overthinking_frac = j["overthinking_frac"].get<double>();
  }
  if (j.contains("confidence_noise")) {
    cfg.confidence_noise = j["confidence_noise"].get<double>();
  }
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  check_config(cfg);
  return cfg;
}

std::string synth_config_to_json(const SynthConfig& cfg) {
  nlohmann::ordered_json j;
  j["n"] = cfg.num_samples;
  j["L"] = cfg.num_exits;
  j["K"] = cfg.num_classes;
  j["difficulty_spread"] = cfg.difficulty_spread;
  j["exit_gain"] = cfg.exit_gain;
  j["overthinking_frac"] = cfg.overthinking_frac;
  j["confidence_noise"] = cfg.confidence_noise;
  j["seed"] = cfg.seed;
  return j.dump(2);
}

TraceSet generate(const SynthConfig& cfg) {
  check_config(cfg);
  const std::size_t n = cfg.num_samples;
  const int L = cfg.num_exits;
  const int K = cfg.num_classes;

  // Latent per-sample difficulty.
  std::vector<double> difficulty(n);
  for (std::size_t i = 0; i < n; ++i) {
    detail::Rng rng(detail::mix_seed(detail::mix_seed(cfg.seed, i), kDifficulty));
    difficulty[i] = cfg.difficulty_spread * rng.next_normal();
  }

  // Per-exit correctness targets start at one half and move by the gains;
  // offsets are fitted so the realized means match the targets. Negative
  // gains produce exits that get worse on average.
  std::vector<double> target(L);
  target[0] = 0.5;
  for (int l = 1; l < L; ++l) {
    target[l] =
        std::clamp(target[l - 1] + cfg.exit_gain[l - 1], 0.005, 0.995);
  }
  std::vector<double> offset(L);
  for (int l = 0; l < L; ++l) offset[l] = fit_offset(difficulty, target[l]);

  TraceSet ts;
  ts.num_exits = L;
  ts.num_classes = K;
  ts.loss_bound = 2.0;  // Brier scale; the set stores no precomputed losses

  ts.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t root = detail::mix_seed(cfg.seed, i);
    auto channel = [&](std::uint64_t tag) {
      return detail::Rng(detail::mix_seed(root, tag));
    };

    ExitTrace t;
    t.id = "s" + std::to_string(i);

    const int label = static_cast<int>(channel(kLabel).next_below(
        static_cast<std::uint64_t>(K)));
    int distractor = static_cast<int>(channel(kDistractor).next_below(
        static_cast<std::uint64_t>(K - 1)));
    if (distractor >= label) ++distractor;
    const double sharpness = 0.6 + 0.35 * channel(kSharpness).next_unit();

    // One shared uniform makes correctness monotone across exits: once an
    // exit is right, later exits stay right.
    const double u = channel(kCorrectness).next_unit();
    std::vector<double> prob_correct(L);
    std::vector<bool> correct(L);
    for (int l = 0; l < L; ++l) {
      prob_correct[l] = sigmoid(offset[l] - difficulty[i]);
      correct[l] = u < prob_correct[l];
    }

    // Overthinkers: the final exit is forced wrong while an earlier exit
    // stays (or is made) right, so an early exit is strictly better.
    const bool overthink = channel(kOverthink).next_unit() < cfg.overthinking_frac;
    if (overthink) {
      correct[L - 1] = false;
      bool any_early = false;
      for (int l = 0; l < L - 1; ++l) any_early = any_early || correct[l];
      if (!any_early) correct[L - 2] = true;
    }

    t.distributions.assign(L, std::vector<double>(K, 0.0));
    for (int l = 0; l < L; ++l) {
      const int predicted = correct[l] ? label : distractor;
      const double rest = (1.0 - sharpness) / static_cast<double>(K);
      for (int k = 0; k < K; ++k) t.distributions[l][k] = rest;
      t.distributions[l][predicted] += sharpness;
    }

    t.confidences.resize(L - 1);
    {
      detail::Rng noise(detail::mix_seed(root, kNoiseBase));
      for (int l = 0; l < L - 1; ++l) {
        const double raw =
            prob_correct[l] + cfg.confidence_noise * noise.next_normal();
        t.confidences[l] = std::clamp(raw, 0.0, 1.0);
      }
    }

    t.label = label;
    ts.samples.push_back(std::move(t));
  }
  return ts;
}

}  // namespace exitrisk
