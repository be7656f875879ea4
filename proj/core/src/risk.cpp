#include "exitrisk/risk.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "rng.hpp"

namespace exitrisk {

namespace {

constexpr double kProbTolerance = 1e-6;
constexpr double kRangeSlack = 1e-9;
constexpr double kMonotoneTolerance = 1e-9;

int argmax_class(const std::vector<double>& row) {
  // Ties break toward the smallest class index.
  int best = 0;
  for (int k = 1; k < static_cast<int>(row.size()); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return best;
}

void require_aligned(const LossMatrix& lm, const TraceSet& ts) {
  if (lm.num_samples != ts.size() ||
      lm.num_exits != static_cast<std::size_t>(ts.num_exits)) {
    throw std::invalid_argument("loss matrix is not aligned with the trace set");
  }
}

void check_matrix_range(const LossMatrix& lm) {
  for (double v : lm.values) {
    if (v < -kRangeSlack || v > lm.spec.bound + kRangeSlack) {
      throw std::runtime_error(
          "derived loss outside [0, B]; check RiskSpec::bound (B = " +
          std::to_string(lm.spec.bound) + ", loss = " + std::to_string(v) + ")");
    }
  }
}

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

}  // namespace

int exit_index(std::span<const double> confidences, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("lambda must lie in [0, 1]");
  }
  const int num_exits = static_cast<int>(confidences.size()) + 1;
  // lambda == 1 always defers to the full model, keeping the risk at the top
  // of the grid identically zero even when a confidence equals 1.
  if (lambda == 1.0) return num_exits;
  for (std::size_t l = 0; l < confidences.size(); ++l) {
    if (confidences[l] >= lambda) return static_cast<int>(l) + 1;
  }
  return num_exits;
}

double brier_loss(std::span<const double> dist, int label) {
  if (label < 0 || label >= static_cast<int>(dist.size())) {
    throw std::invalid_argument("label outside the distribution support");
  }
  double sum = 0.0;
  double loss = 0.0;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    sum += dist[k];
    const double target = (static_cast<int>(k) == label) ? 1.0 : 0.0;
    loss += (dist[k] - target) * (dist[k] - target);
  }
  if (std::abs(sum - 1.0) > kProbTolerance) {
    throw std::invalid_argument("distribution not normalized");
  }
  return loss;
}

double mean_pixel_brier(const std::vector<std::vector<double>>& dists,
                        std::span<const int> labels) {
  if (dists.empty()) {
    throw std::invalid_argument("mean_pixel_brier needs at least one row");
  }
  if (dists.size() != labels.size()) {
    throw std::invalid_argument("distribution and label counts differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    sum += brier_loss(dists[i], labels[i]);
  }
  return sum / static_cast<double>(dists.size());
}

LossMatrix derive_losses(const TraceSet& ts, const RiskSpec& spec) {
  if (!(spec.bound > 0.0)) {
    throw std::invalid_argument("RiskSpec::bound must be > 0");
  }
  const auto n = ts.size();
  const auto L = static_cast<std::size_t>(ts.num_exits);
  LossMatrix lm;
  lm.num_samples = n;
  lm.num_exits = L;
  lm.spec = spec;
  lm.values.assign(n * L, 0.0);

  const bool use_precomputed =
      spec.target == RiskTarget::prediction && !spec.loss_name.empty();
  if (use_precomputed) {
    if (std::find(ts.loss_names.begin(), ts.loss_names.end(),
                  spec.loss_name) == ts.loss_names.end()) {
      throw std::invalid_argument("unknown loss name: " + spec.loss_name);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto it = ts.samples[i].losses.find(spec.loss_name);
      if (it == ts.samples[i].losses.end()) {
        throw std::runtime_error("sample \"" + ts.samples[i].id +
                                 "\" lacks loss \"" + spec.loss_name + "\"");
      }
      for (std::size_t l = 0; l < L; ++l) lm.values[i * L + l] = it->second[l];
    }
    check_matrix_range(lm);
    return lm;
  }

  // Everything below is computed from the stored distributions.
  for (const auto& t : ts.samples) {
    if (!t.has_distributions()) {
      throw std::runtime_error("sample \"" + t.id +
                               "\" has no distributions; derive requires them "
                               "unless a precomputed loss is named");
    }
  }

  switch (spec.kind) {
    case RiskKind::gap: {
      for (const auto& t : ts.samples) {
        if (!t.label) {
          throw std::runtime_error(
              "gap risk needs labels; sample \"" + t.id + "\" has none");
        }
      }
      if (spec.target == RiskTarget::prediction) {
        for (std::size_t i = 0; i < n; ++i) {
          const auto& t = ts.samples[i];
          for (std::size_t l = 0; l < L; ++l) {
            lm.values[i * L + l] =
                (argmax_class(t.distributions[l]) == *t.label) ? 0.0 : 1.0;
          }
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          const auto& t = ts.samples[i];
          for (std::size_t l = 0; l < L; ++l) {
            lm.values[i * L + l] = brier_loss(t.distributions[l], *t.label);
          }
        }
      }
      break;
    }
    case RiskKind::consistency: {
      if (spec.target == RiskTarget::prediction) {
        for (std::size_t i = 0; i < n; ++i) {
          const auto& t = ts.samples[i];
          const int ref = argmax_class(t.distributions[L - 1]);
          for (std::size_t l = 0; l + 1 < L; ++l) {
            lm.values[i * L + l] =
                (argmax_class(t.distributions[l]) == ref) ? 0.0 : 1.0;
          }
          lm.values[i * L + (L - 1)] = 0.0;  // loss(y_L, y_L) == 0
        }
      } else {
        // One reference label sampled from the final exit per sample.
        for (std::size_t i = 0; i < n; ++i) {
          const auto& t = ts.samples[i];
          detail::Rng rng(detail::mix_seed(spec.seed, i));
          const double u = rng.next_unit();
          const auto& final_row = t.distributions[L - 1];
          int ref = static_cast<int>(final_row.size()) - 1;
          double cum = 0.0;
          for (int k = 0; k < static_cast<int>(final_row.size()); ++k) {
            cum += final_row[k];
            if (u < cum) {
              ref = k;
              break;
            }
          }
          for (std::size_t l = 0; l < L; ++l) {
            lm.values[i * L + l] = brier_loss(t.distributions[l], ref);
          }
        }
      }
      break;
    }
  }
  check_matrix_range(lm);
  return lm;
}

std::vector<double> relative_losses(const LossMatrix& lm, const TraceSet& ts,
                                    double lambda) {
  require_aligned(lm, ts);
  const std::size_t L = lm.num_exits;
  std::vector<double> out(lm.num_samples);
  for (std::size_t i = 0; i < lm.num_samples; ++i) {
    const int e = exit_index(ts.samples[i].confidences, lambda);
    double d = lm.at(i, static_cast<std::size_t>(e - 1)) - lm.at(i, L - 1);
    if (lm.spec.clip_nonneg && d < 0.0) d = 0.0;
    out[i] = d;
  }
  return out;
}

double empirical_risk(const LossMatrix& lm, const TraceSet& ts,
                      double lambda) {
  require_aligned(lm, ts);
  const std::size_t L = lm.num_exits;
  double sum = 0.0;  // fixed sample order keeps results reproducible
  for (std::size_t i = 0; i < lm.num_samples; ++i) {
    const int e = exit_index(ts.samples[i].confidences, lambda);
    double d = lm.at(i, static_cast<std::size_t>(e - 1)) - lm.at(i, L - 1);
    if (lm.spec.clip_nonneg && d < 0.0) d = 0.0;
    sum += d;
  }
  return lm.num_samples == 0 ? 0.0 : sum / static_cast<double>(lm.num_samples);
}

RiskCurve risk_curve(const LossMatrix& lm, const TraceSet& ts,
                     const ThresholdGrid& grid) {
  require_aligned(lm, ts);
  const std::size_t L = lm.num_exits;
  const std::size_t n = lm.num_samples;
  RiskCurve curve;
  curve.grid = grid;
  curve.values.resize(grid.size());
  curve.exit_fractions.assign(grid.size(), std::vector<double>(L, 0.0));
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double lambda = grid[j];
    double sum = 0.0;
    auto& fractions = curve.exit_fractions[j];
    for (std::size_t i = 0; i < n; ++i) {
      const int e = exit_index(ts.samples[i].confidences, lambda);
      double d = lm.at(i, static_cast<std::size_t>(e - 1)) - lm.at(i, L - 1);
      if (lm.spec.clip_nonneg && d < 0.0) d = 0.0;
      sum += d;
      fractions[static_cast<std::size_t>(e - 1)] += 1.0;
    }
    curve.values[j] = n == 0 ? 0.0 : sum / static_cast<double>(n);
    for (double& f : fractions) f /= n == 0 ? 1.0 : static_cast<double>(n);
  }
  return curve;
}

std::string risk_curve_to_csv(const RiskCurve& curve) {
  std::ostringstream out;
  const std::size_t L =
      curve.exit_fractions.empty() ? 0 : curve.exit_fractions.front().size();
  out << "lambda,risk";
  for (std::size_t l = 1; l <= L; ++l) out << ",frac_exit_" << l;
  out << "\n";
  for (std::size_t j = 0; j < curve.values.size(); ++j) {
    out << format_double(curve.grid[j]) << "," << format_double(curve.values[j]);
    for (double f : curve.exit_fractions[j]) out << "," << format_double(f);
    out << "\n";
  }
  return out.str();
}

EfficiencyReport efficiency_metrics(const TraceSet& ts, double lambda,
                                    std::span<const double> cost_weights) {
  if (ts.size() == 0) {
    throw std::invalid_argument("efficiency_metrics needs samples");
  }
  const auto L = static_cast<std::size_t>(ts.num_exits);
  if (!cost_weights.empty()) {
    if (cost_weights.size() != L) {
      throw std::invalid_argument("cost_weights must have one entry per exit");
    }
    for (std::size_t l = 0; l < L; ++l) {
      if (!(cost_weights[l] > 0.0)) {
        throw std::invalid_argument("cost_weights must be positive");
      }
      if (l > 0 && cost_weights[l] < cost_weights[l - 1]) {
        throw std::invalid_argument("cost_weights must be non-decreasing");
      }
    }
  }
  double exit_sum = 0.0;
  double cost_sum = 0.0;
  for (const auto& t : ts.samples) {
    const int e = exit_index(t.confidences, lambda);
    exit_sum += static_cast<double>(e);
    if (!cost_weights.empty()) {
      cost_sum += cost_weights[static_cast<std::size_t>(e - 1)];
    }
  }
  EfficiencyReport report;
  report.mean_exit_layer = exit_sum / static_cast<double>(ts.size());
  report.relative_gain =
      1.0 - report.mean_exit_layer / static_cast<double>(ts.num_exits);
  if (!cost_weights.empty()) {
    report.has_cost_weighted_gain = true;
    report.cost_weighted_gain =
        1.0 - (cost_sum / static_cast<double>(ts.size())) / cost_weights[L - 1];
  }
  return report;
}

MonotonicityReport check_marginal_monotonicity(const LossMatrix& lm) {
  MonotonicityReport report;
  report.mean_losses.assign(lm.num_exits, 0.0);
  for (std::size_t i = 0; i < lm.num_samples; ++i) {
    for (std::size_t l = 0; l < lm.num_exits; ++l) {
      report.mean_losses[l] += lm.at(i, l);
    }
  }
  if (lm.num_samples > 0) {
    for (double& v : report.mean_losses) {
      v /= static_cast<double>(lm.num_samples);
    }
  }
  report.monotone = true;
  for (std::size_t l = 0; l + 1 < lm.num_exits; ++l) {
    if (report.mean_losses[l + 1] > report.mean_losses[l] + kMonotoneTolerance) {
      report.monotone = false;
      break;
    }
  }
  return report;
}

}  // namespace exitrisk
