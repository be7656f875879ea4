#pragma once
// Domain types for early-exit model traces: per-sample exit confidences,
// optional labels, per-exit predictive distributions and precomputed loss
// matrices, plus file ingestion, validation and calibration/test splitting.
//
// All types are immutable by convention after construction and safe to share
// across concurrent readers.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace exitrisk {

// One traced sample. Confidences cover exits 1..L-1 only; the final exit is
// the full model and is never thresholded. At least one of distributions or
// precomputed losses must be present.
struct ExitTrace {
  std::string id;
  std::vector<double> confidences;                    // L-1 values in [0, 1]
  std::optional<int> label;                           // ground-truth class
  std::vector<std::vector<double>> distributions;     // L x K; empty if absent
  std::map<std::string, std::vector<double>> losses;  // loss name -> L values

  bool has_distributions() const { return !distributions.empty(); }
};

struct TraceSet {
  int num_exits = 0;        // L; the final index is the full model
  int num_classes = 0;      // K; 0 when no distributions are stored
  double loss_bound = 1.0;  // declared bound B of the stored base losses
  std::vector<std::string> loss_names;
  std::vector<ExitTrace> samples;

  std::size_t size() const { return samples.size(); }
};

enum class RiskKind { gap, consistency };
enum class RiskTarget { prediction, distribution };

// Which relative-performance risk is controlled and on what loss scale.
struct RiskSpec {
  RiskKind kind = RiskKind::gap;
  RiskTarget target = RiskTarget::prediction;
  // Precomputed loss to use for prediction targets; empty means "compute the
  // 0-1 loss from the stored distributions". Ignored for distribution
  // targets, which always use the Brier loss.
  std::string loss_name;
  bool clip_nonneg = false;  // max{0, .} on per-sample relative losses
  double bound = 1.0;        // B > 0; relative losses lie in [-B, B]
  std::uint64_t seed = 0;    // consistency/distribution label sampling only
};

std::string to_string(RiskKind kind);
std::string to_string(RiskTarget target);
RiskKind risk_kind_from_string(const std::string& s);
RiskTarget risk_target_from_string(const std::string& s);

// Descending threshold candidates 1, 1-step, 1-2*step, ..., > 0. The first
// value is exactly 1 and acts as the full-model sentinel.
class ThresholdGrid {
 public:
  ThresholdGrid() = default;
  explicit ThresholdGrid(double step);

  double step() const { return step_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  double step_ = 0.0;
  std::vector<double> values_;
};

enum class TraceFormat { jsonl, csv };

// ".csv" maps to csv, everything else to jsonl.
TraceFormat trace_format_from_path(const std::string& path);

// Reads a trace file and checks every type invariant. Errors carry the
// offending line number. Sample order in the file is preserved.
TraceSet load_traces(const std::string& path, TraceFormat format);
TraceSet load_traces(const std::string& path);

// Inverse of load_traces; loading a saved file reproduces the TraceSet (ids
// and integers bit-exact, reals within 1e-12). CSV cannot hold
// distributions and refuses trace sets that store them.
void save_traces(const TraceSet& ts, const std::string& path,
                 TraceFormat format);

// Deterministic disjoint partition; |cal| = round(cal_fraction * n). Both
// parts keep the original sample order.
std::pair<TraceSet, TraceSet> split(const TraceSet& ts, double cal_fraction,
                                    std::uint64_t seed);

struct ValidationCheck {
  std::string name;
  std::size_t violations = 0;
  std::vector<std::string> details;  // capped at a handful per check
};

// Per-invariant pass/fail counts plus per-exit summary statistics.
struct ValidationReport {
  std::size_t num_samples = 0;
  std::vector<ValidationCheck> checks;
  std::vector<double> mean_confidence;  // per exit 1..L-1
  std::map<std::string, std::vector<double>> mean_loss;  // per stored loss
  // Derived from distributions when labels are present; empty otherwise.
  std::vector<double> mean_zero_one;
  std::vector<double> mean_brier;

  bool ok() const;
  std::string to_json() const;
};

// Reporting only; never throws on invariant violations.
ValidationReport validate(const TraceSet& ts);

}  // namespace exitrisk
