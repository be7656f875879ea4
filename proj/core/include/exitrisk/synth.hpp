#pragma once
// Synthetic early-exit trace generator with controllable exit quality,
// confidence calibration, marginal monotonicity and overthinking fraction.
// Serves as the desk-scale testbed for the calibration guarantees: every
// assumption the theory leans on is a knob that can be satisfied or broken.

#include <cstdint>
#include <string>
#include <vector>

#include "exitrisk/trace.hpp"

namespace exitrisk {

struct SynthConfig {
  std::size_t num_samples = 1000;  // n
  int num_exits = 5;               // L
  int num_classes = 10;            // K
  // Scale of the per-sample latent difficulty; 0 makes all samples equal.
  double difficulty_spread = 1.0;
  // L-1 expected accuracy increments between consecutive exits, in [-1, 1].
  // All-non-negative gains with overthinking_frac = 0 give per-exit mean
  // losses that are non-increasing by construction; negative entries build
  // models whose later exits get worse, for testing the violated regime.
  std::vector<double> exit_gain;
  // Fraction of samples whose final exit is forced wrong while an earlier
  // exit stays correct (strictly better early exit). Large values can break
  // monotonicity at the last exit unless the final gain dominates.
  double overthinking_frac = 0.0;
  // Standard deviation of the noise between the true per-exit correctness
  // probability and the emitted confidence score; 0 means fully calibrated.
  double confidence_noise = 0.0;
  std::uint64_t seed = 0;
};

SynthConfig load_synth_config(const std::string& path);
std::string synth_config_to_json(const SynthConfig& cfg);

// Emits a TraceSet with labels and full per-exit distributions, sample ids
// "s<index>". Deterministic given the seed; per-sample substreams make the
// output independent of generation order.
TraceSet generate(const SynthConfig& cfg);

}  // namespace exitrisk
