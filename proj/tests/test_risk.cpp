#include <doctest.h>

#include <algorithm>
#include <random>

#include "exitrisk/risk.hpp"
#include "exitrisk/synth.hpp"
#include "oracle_reference.hpp"
#include "test_util.hpp"

using namespace exitrisk;

namespace {

RiskSpec precomputed_spec(bool clip = false) {
  RiskSpec spec;
  spec.kind = RiskKind::gap;
  spec.target = RiskTarget::prediction;
  spec.loss_name = "zo";
  spec.clip_nonneg = clip;
  spec.bound = 1.0;
  return spec;
}

// Distribution putting 0.85 on the predicted class, rest uniform.
std::vector<double> peaked(int num_classes, int predicted) {
  std::vector<double> row(num_classes, 0.15 / num_classes);
  row[predicted] += 0.85;
  return row;
}

}  // namespace

TEST_SUITE("risk") {

TEST_CASE("exit_index worked examples") {
  const std::vector<double> a{0.9, 0.95};
  const std::vector<double> b{0.4, 0.8};
  const std::vector<double> c{0.2, 0.5};
  const std::vector<double> ones{1.0, 1.0};
  CHECK(exit_index(a, 0.5) == 1);
  CHECK(exit_index(b, 0.85) == 3);
  CHECK(exit_index(c, 0.5) == 2);  // boundary is inclusive
  CHECK(exit_index(ones, 1.0) == 3);  // the sentinel always runs the full model
  CHECK_THROWS_AS(exit_index(a, 1.5), std::invalid_argument);
}

TEST_CASE("exit_index is monotone in lambda") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 1000; ++rep) {
    const int L = 2 + static_cast<int>(rng() % 6);
    std::vector<double> conf(L - 1);
    for (double& v : conf) v = unit(rng);
    double l1 = unit(rng);
    double l2 = unit(rng);
    if (l1 > l2) std::swap(l1, l2);
    CHECK(exit_index(conf, l1) <= exit_index(conf, l2));
    CHECK(exit_index(conf, l1) == oracle::exit_index(conf, l1));
  }
}

TEST_CASE("brier loss worked examples") {
  CHECK(brier_loss(std::vector<double>{1, 0, 0}, 0) == doctest::Approx(0.0));
  CHECK(brier_loss(std::vector<double>{0, 1, 0}, 0) == doctest::Approx(2.0));
  CHECK(brier_loss(std::vector<double>{0.5, 0.5}, 0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(brier_loss(std::vector<double>{0.9, 0.3}, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(brier_loss(std::vector<double>{0.5, 0.5}, 2),
                  std::invalid_argument);
}

TEST_CASE("brier loss stays within [0, 2] on random distributions") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 500; ++rep) {
    const int K = 2 + static_cast<int>(rng() % 10);
    std::vector<double> row(K);
    double sum = 0.0;
    for (double& v : row) {
      v = unit(rng);
      sum += v;
    }
    for (double& v : row) v /= sum;
    const int label = static_cast<int>(rng() % K);
    const double b = brier_loss(row, label);
    CHECK(b >= 0.0);
    CHECK(b <= 2.0);
    CHECK(b == doctest::Approx(oracle::brier(row, label)).epsilon(1e-12));
  }
}

TEST_CASE("mean pixel brier") {
  const std::vector<std::vector<double>> two = {{1, 0}, {0, 1}};
  const std::vector<int> labels = {0, 0};  // losses 0 and 2
  CHECK(mean_pixel_brier(two, labels) == doctest::Approx(1.0));

  const std::vector<std::vector<double>> one = {{0.5, 0.5}};
  const std::vector<int> single = {0};
  CHECK(mean_pixel_brier(one, single) ==
        doctest::Approx(brier_loss(one[0], 0)));

  const std::vector<std::vector<double>> four(4,
                                              std::vector<double>{0.5, 0.5});
  const std::vector<int> mixed = {0, 0, 1, 1};
  CHECK(mean_pixel_brier(four, mixed) == doctest::Approx(0.5));

  const std::vector<int> short_labels = {0};
  CHECK_THROWS_AS(mean_pixel_brier(two, short_labels), std::invalid_argument);
}

TEST_CASE("derive_losses copies a named precomputed matrix") {
  const TraceSet ts = testutil::three_sample_example();
  const LossMatrix lm = derive_losses(ts, precomputed_spec());
  CHECK(lm.num_samples == 3);
  CHECK(lm.num_exits == 3);
  CHECK(lm.at(1, 1) == 1.0);
  CHECK(lm.at(2, 0) == 0.0);

  RiskSpec unknown = precomputed_spec();
  unknown.loss_name = "nope";
  CHECK_THROWS_AS(derive_losses(ts, unknown), std::invalid_argument);
}

TEST_CASE("derive_losses gap risks from distributions") {
  // Sample 0: exit 2 wrong, final right. Sample 1 overthinks: exit 2 right,
  // final wrong.
  TraceSet ts;
  ts.num_exits = 3;
  ts.num_classes = 4;
  for (int i = 0; i < 2; ++i) {
    ExitTrace t;
    t.id = "x" + std::to_string(i);
    t.confidences = {0.3, 0.9};
    t.label = 0;
    if (i == 0) {
      t.distributions = {peaked(4, 0), peaked(4, 2), peaked(4, 0)};
    } else {
      t.distributions = {peaked(4, 1), peaked(4, 0), peaked(4, 3)};
    }
    ts.samples.push_back(t);
  }

  RiskSpec spec;
  spec.kind = RiskKind::gap;
  spec.target = RiskTarget::prediction;
  spec.bound = 1.0;
  const LossMatrix lm = derive_losses(ts, spec);
  // Relative loss at exit 2: sample 0 has +1, the overthinker has -1.
  CHECK(lm.at(0, 1) - lm.at(0, 2) == doctest::Approx(1.0));
  CHECK(lm.at(1, 1) - lm.at(1, 2) == doctest::Approx(-1.0));

  spec.clip_nonneg = true;
  const LossMatrix clipped = derive_losses(ts, spec);
  const auto rel = relative_losses(clipped, ts, 0.5);
  CHECK(rel[1] == 0.0);  // clipping removes the overthinking reward
  spec.clip_nonneg = false;
  const auto raw = relative_losses(derive_losses(ts, spec), ts, 0.5);
  CHECK(raw[1] == doctest::Approx(-1.0));

  // Missing labels reject gap risks.
  TraceSet unlabeled = ts;
  for (auto& t : unlabeled.samples) t.label.reset();
  CHECK_THROWS_AS(derive_losses(unlabeled, spec), std::runtime_error);

  // Brier target: entries bounded by 2 and final column positive in general.
  RiskSpec brier_spec;
  brier_spec.kind = RiskKind::gap;
  brier_spec.target = RiskTarget::distribution;
  brier_spec.bound = 2.0;
  const LossMatrix bl = derive_losses(ts, brier_spec);
  for (double v : bl.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 2.0);
  }
}

TEST_CASE("consistency/prediction final column is identically zero") {
  const TraceSet ts = generate(testutil::overthinking_config(300, 5));
  RiskSpec spec;
  spec.kind = RiskKind::consistency;
  spec.target = RiskTarget::prediction;
  spec.bound = 1.0;
  const LossMatrix lm = derive_losses(ts, spec);
  for (std::size_t i = 0; i < lm.num_samples; ++i) {
    CHECK(lm.at(i, lm.num_exits - 1) == 0.0);
  }
  // And the unclipped risk is therefore non-negative at every lambda.
  for (double lambda : {0.0, 0.3, 0.7, 0.95, 1.0}) {
    CHECK(empirical_risk(lm, ts, lambda) >= 0.0);
  }
}

TEST_CASE("consistency/distribution sampling is seed-deterministic") {
  const TraceSet ts = generate(testutil::monotone_config(200, 9));
  RiskSpec spec;
  spec.kind = RiskKind::consistency;
  spec.target = RiskTarget::distribution;
  spec.bound = 2.0;
  spec.seed = 1234;
  const LossMatrix a = derive_losses(ts, spec);
  const LossMatrix b = derive_losses(ts, spec);
  CHECK(a.values == b.values);
  spec.seed = 1235;
  const LossMatrix c = derive_losses(ts, spec);
  CHECK(a.values != c.values);
}

TEST_CASE("empirical risk matches the worked 3-sample instance") {
  const TraceSet ts = testutil::three_sample_example();
  const LossMatrix lm = derive_losses(ts, precomputed_spec());
  CHECK(empirical_risk(lm, ts, 0.6) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  // Independent oracle route.
  const double ref = oracle::empirical_risk(
      {{1, 0, 0}, {1, 1, 0}, {0, 0, 0}},
      {{0.9, 0.95}, {0.4, 0.8}, {0.2, 0.5}}, 0.6, false);
  CHECK(empirical_risk(lm, ts, 0.6) == doctest::Approx(ref).epsilon(1e-15));
}

TEST_CASE("misaligned loss matrix and trace set are rejected") {
  const TraceSet ts = testutil::three_sample_example();
  const TraceSet other = generate(testutil::monotone_config(10, 1));
  const LossMatrix lm = derive_losses(ts, precomputed_spec());
  CHECK_THROWS_AS(empirical_risk(lm, other, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(risk_curve(lm, other, ThresholdGrid(0.1)),
                  std::invalid_argument);
}

TEST_CASE("risk at lambda = 1 is exactly zero") {
  const TraceSet ts = generate(testutil::overthinking_config(400, 21));
  for (auto kind : {RiskKind::gap, RiskKind::consistency}) {
    for (auto target : {RiskTarget::prediction, RiskTarget::distribution}) {
      RiskSpec spec;
      spec.kind = kind;
      spec.target = target;
      spec.bound = target == RiskTarget::distribution ? 2.0 : 1.0;
      spec.seed = 5;
      const LossMatrix lm = derive_losses(ts, spec);
      CHECK(empirical_risk(lm, ts, 1.0) == 0.0);
    }
  }
}

TEST_CASE("clipping flips a single overthinking sample") {
  const TraceSet ts = testutil::make_traceset({{0.9, 0.2}}, {{0.0, 1.0, 1.0}});
  RiskSpec raw = precomputed_spec(false);
  RiskSpec clip = precomputed_spec(true);
  CHECK(empirical_risk(derive_losses(ts, raw), ts, 0.5) == doctest::Approx(-1.0));
  CHECK(empirical_risk(derive_losses(ts, clip), ts, 0.5) == 0.0);
}

TEST_CASE("clipped risk dominates unclipped risk at every lambda") {
  const TraceSet ts = generate(testutil::overthinking_config(500, 31));
  RiskSpec raw = testutil::gap_zero_one_spec();
  RiskSpec clip = raw;
  clip.clip_nonneg = true;
  const LossMatrix lm_raw = derive_losses(ts, raw);
  const LossMatrix lm_clip = derive_losses(ts, clip);
  const ThresholdGrid grid(0.05);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    CHECK(empirical_risk(lm_clip, ts, grid[j]) >=
          empirical_risk(lm_raw, ts, grid[j]));
  }
}

TEST_CASE("relative loss ranges") {
  const TraceSet ts = generate(testutil::overthinking_config(400, 41));
  RiskSpec zo = testutil::gap_zero_one_spec();
  const LossMatrix lm = derive_losses(ts, zo);
  for (double lambda : {0.0, 0.25, 0.5, 0.75}) {
    for (double d : relative_losses(lm, ts, lambda)) {
      CHECK((d == -1.0 || d == 0.0 || d == 1.0));
    }
  }
  RiskSpec brier;
  brier.kind = RiskKind::gap;
  brier.target = RiskTarget::distribution;
  brier.bound = 2.0;
  const LossMatrix bm = derive_losses(ts, brier);
  for (double lambda : {0.0, 0.5, 0.9}) {
    for (double d : relative_losses(bm, ts, lambda)) {
      CHECK(d >= -2.0);
      CHECK(d <= 2.0);
    }
  }
}

TEST_CASE("risk curve on the 3-sample instance") {
  const TraceSet ts = testutil::three_sample_example();
  const LossMatrix lm = derive_losses(ts, precomputed_spec());
  const ThresholdGrid grid(0.1);
  const RiskCurve curve = risk_curve(lm, ts, grid);
  REQUIRE(curve.values.size() == grid.size());
  CHECK(curve.values[0] == 0.0);  // lambda = 1
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (grid[j] > 0.5 && grid[j] <= 0.8) {
      CHECK(curve.values[j] == doctest::Approx(2.0 / 3.0));
    }
    CHECK(curve.values[j] ==
          doctest::Approx(empirical_risk(lm, ts, grid[j])).epsilon(1e-15));
  }
  // Exit fractions per lambda are a distribution over exits.
  for (const auto& fractions : curve.exit_fractions) {
    double sum = 0.0;
    for (double f : fractions) sum += f;
    CHECK(sum == doctest::Approx(1.0));
  }
}

TEST_CASE("risk curve is piecewise constant between data confidences") {
  const TraceSet ts = generate(testutil::monotone_config(150, 77));
  const LossMatrix lm = derive_losses(ts, testutil::gap_zero_one_spec());
  std::vector<double> breakpoints;
  for (const auto& t : ts.samples) {
    for (double c : t.confidences) breakpoints.push_back(c);
  }
  std::sort(breakpoints.begin(), breakpoints.end());
  const ThresholdGrid grid(0.01);
  const RiskCurve curve = risk_curve(lm, ts, grid);
  for (std::size_t j = 2; j < grid.size(); ++j) {
    // No data confidence inside (grid[j], grid[j-1]] means identical risk,
    // bit-for-bit. grid[j-1] must stay below 1 to avoid the sentinel.
    const bool has_breakpoint =
        std::any_of(breakpoints.begin(), breakpoints.end(), [&](double c) {
          return c >= grid[j] && c < grid[j - 1];
        });
    if (!has_breakpoint && grid[j - 1] < 1.0) {
      CHECK(curve.values[j] == curve.values[j - 1]);
    }
  }
}

TEST_CASE("risk curve is invariant to sample order") {
  TraceSet ts = generate(testutil::monotone_config(100, 13));
  const LossMatrix lm = derive_losses(ts, testutil::gap_zero_one_spec());
  const ThresholdGrid grid(0.05);
  const RiskCurve before = risk_curve(lm, ts, grid);

  TraceSet reversed = ts;
  std::reverse(reversed.samples.begin(), reversed.samples.end());
  const LossMatrix lm_rev = derive_losses(reversed, testutil::gap_zero_one_spec());
  const RiskCurve after = risk_curve(lm_rev, reversed, grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    CHECK(before.values[j] == doctest::Approx(after.values[j]).epsilon(1e-12));
  }
}

TEST_CASE("risk curve csv export") {
  const TraceSet ts = testutil::three_sample_example();
  const LossMatrix lm = derive_losses(ts, precomputed_spec());
  const RiskCurve curve = risk_curve(lm, ts, ThresholdGrid(0.5));
  const std::string csv = risk_curve_to_csv(curve);
  CHECK(csv.rfind("lambda,risk,frac_exit_1,frac_exit_2,frac_exit_3\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 rows
}

TEST_CASE("efficiency metrics") {
  // L = 4; all samples exit at layer 1 under a tiny lambda.
  const TraceSet all_first = testutil::make_traceset(
      {{0.9, 0.1, 0.1}, {0.8, 0.1, 0.1}}, {{0, 0, 0, 0}, {0, 0, 0, 0}});
  const EfficiencyReport r1 = efficiency_metrics(all_first, 0.5);
  CHECK(r1.mean_exit_layer == doctest::Approx(1.0));
  CHECK(r1.relative_gain == doctest::Approx(0.75));

  const EfficiencyReport r2 = efficiency_metrics(all_first, 1.0);
  CHECK(r2.relative_gain == doctest::Approx(0.0));

  // Half exit at 1, half at 3.
  const TraceSet halves = testutil::make_traceset(
      {{0.9, 0.0, 0.0}, {0.1, 0.1, 0.9}}, {{0, 0, 0, 0}, {0, 0, 0, 0}});
  const EfficiencyReport r3 = efficiency_metrics(halves, 0.5);
  CHECK(r3.mean_exit_layer == doctest::Approx(2.0));
  CHECK(r3.relative_gain == doctest::Approx(0.5));

  // Cost-weighted gain with cumulative costs.
  const std::vector<double> costs{1.0, 2.0, 3.0, 8.0};
  const EfficiencyReport r4 = efficiency_metrics(halves, 0.5, costs);
  CHECK(r4.has_cost_weighted_gain);
  CHECK(r4.cost_weighted_gain == doctest::Approx(1.0 - 2.0 / 8.0));

  const std::vector<double> bad{1.0, 0.5, 3.0, 8.0};
  CHECK_THROWS_AS(efficiency_metrics(halves, 0.5, bad), std::invalid_argument);
}

TEST_CASE("relative gain is zero only when everything exits at L") {
  const TraceSet ts = generate(testutil::monotone_config(200, 55));
  const EfficiencyReport gained = efficiency_metrics(ts, 0.3);
  if (gained.relative_gain == 0.0) {
    CHECK(gained.mean_exit_layer == doctest::Approx(5.0));
  }
  const EfficiencyReport none = efficiency_metrics(ts, 1.0);
  CHECK(none.relative_gain == doctest::Approx(0.0));
  CHECK(none.mean_exit_layer == doctest::Approx(5.0));
}

TEST_CASE("marginal monotonicity check") {
  // Means 0.4, 0.3, 0.1 -> monotone.
  const TraceSet mono = testutil::make_traceset(
      {{0.5, 0.5}, {0.5, 0.5}}, {{0.4, 0.3, 0.1}, {0.4, 0.3, 0.1}});
  const MonotonicityReport a =
      check_marginal_monotonicity(derive_losses(mono, precomputed_spec()));
  CHECK(a.monotone);
  CHECK(a.mean_losses[0] == doctest::Approx(0.4));

  const TraceSet bumpy = testutil::make_traceset(
      {{0.5, 0.5}, {0.5, 0.5}}, {{0.4, 0.45, 0.1}, {0.4, 0.45, 0.1}});
  const MonotonicityReport b =
      check_marginal_monotonicity(derive_losses(bumpy, precomputed_spec()));
  CHECK_FALSE(b.monotone);
}

TEST_CASE("monotone generator keeps the flag true across seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    exitrisk::SynthConfig cfg = testutil::monotone_config(400, seed);
    cfg.num_exits = 4;
    cfg.exit_gain = {0.1, 0.08, 0.05};
    const TraceSet ts = generate(cfg);
    const MonotonicityReport zo =
        check_marginal_monotonicity(derive_losses(ts, testutil::gap_zero_one_spec()));
    CHECK(zo.monotone);
    RiskSpec brier;
    brier.kind = RiskKind::gap;
    brier.target = RiskTarget::distribution;
    brier.bound = 2.0;
    const MonotonicityReport br =
        check_marginal_monotonicity(derive_losses(ts, brier));
    CHECK(br.monotone);
  }
}

}  // TEST_SUITE
