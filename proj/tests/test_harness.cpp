#include "puflock/evalharness.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "golden_configs.hpp"
#include "puflock/errors.hpp"
#include "puflock/model.hpp"

namespace puflock {
namespace {

int count_lines(const std::string& text) {
  return static_cast<int>(std::count(text.begin(), text.end(), '\n'));
}

TEST(SweepConfigTest, ValidatesFields) {
  SweepConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.trials = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SweepConfig{};
  cfg.percentages = {50.0, 101.0};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SweepConfig{};
  cfg.layer_id = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(RandomBaseline, OneOverClasses) {
  EXPECT_DOUBLE_EQ(random_baseline(10), 0.1);
  EXPECT_DOUBLE_EQ(random_baseline(2), 0.5);
  EXPECT_THROW(random_baseline(1), ConfigError);
}

TEST(DegradationSweep, ShapeOrderingAndPctZeroColumn) {
  const Model model = golden::quad_model();
  const Dataset data = golden::quad_data();
  const SweepConfig cfg = golden::small_sweep_config();
  const SweepReport report = degradation_sweep(model, data, cfg);

  ASSERT_EQ(report.rows.size(), cfg.percentages.size() * cfg.trials);
  ASSERT_EQ(report.summaries.size(), cfg.percentages.size());

  // pct-major, trial-minor ordering.
  std::size_t r = 0;
  for (double pct : cfg.percentages) {
    for (int t = 0; t < cfg.trials; ++t, ++r) {
      EXPECT_EQ(report.rows[r].pct, pct);
      EXPECT_EQ(report.rows[r].trial, t);
      EXPECT_GE(report.rows[r].accuracy, 0.0);
      EXPECT_LE(report.rows[r].accuracy, 1.0);
    }
  }

  // pct = 0: every trial equals the unencrypted accuracy; zero spread.
  const double original = evaluate(model, data);
  for (int t = 0; t < cfg.trials; ++t) {
    EXPECT_EQ(report.rows[t].accuracy, original);
  }
  EXPECT_EQ(summary_for(report, 0).mean, original);
  EXPECT_EQ(summary_for(report, 0).stddev, 0.0);

  // Balanced four-class data: baseline 0.25, not flagged.
  EXPECT_DOUBLE_EQ(report.random_baseline, 0.25);
  EXPECT_FALSE(report.baseline_is_majority);
}

TEST(DegradationSweep, SingleTrialHasZeroStddev) {
  SweepConfig cfg = golden::small_sweep_config();
  cfg.trials = 1;
  const SweepReport report =
      degradation_sweep(golden::quad_model(), golden::quad_data(), cfg);
  for (const PctSummary& s : report.summaries) {
    EXPECT_EQ(s.stddev, 0.0) << "pct " << s.pct;
    EXPECT_EQ(s.mean, report.rows[&s - report.summaries.data()].accuracy);
  }
}

TEST(DegradationSweep, ReproducibleAndSensitiveToSeeds) {
  const Model model = golden::quad_model();
  const Dataset data = golden::quad_data();
  const SweepConfig cfg = golden::small_sweep_config();
  EXPECT_EQ(degradation_sweep(model, data, cfg),
            degradation_sweep(model, data, cfg));

  SweepConfig other = cfg;
  other.master_seed = 2;
  EXPECT_NE(degradation_sweep(model, data, cfg),
            degradation_sweep(model, data, other));

  other = cfg;
  other.machine_seed = 43;
  EXPECT_NE(degradation_sweep(model, data, cfg),
            degradation_sweep(model, data, other));
}

TEST(DegradationSweep, NestedAndIndependentModesDiffer) {
  const Model model = golden::quad_model();
  const Dataset data = golden::quad_data();
  SweepConfig cfg = golden::small_sweep_config();
  const SweepReport nested = degradation_sweep(model, data, cfg);
  cfg.mode = SelectionMode::kIndependent;
  const SweepReport independent = degradation_sweep(model, data, cfg);
  // pct 0 rows agree (nothing encrypted); at least one other row differs.
  EXPECT_EQ(nested.rows[0], independent.rows[0]);
  EXPECT_NE(nested.rows, independent.rows);
}

TEST(DegradationSweep, MatchesGoldenCsvByteForByte) {
  const SweepReport report = degradation_sweep(
      golden::quad_model(), golden::quad_data(), golden::small_sweep_config());
  EXPECT_EQ(report_csv(report), golden::read_text("sweep_small.csv"));
}

TEST(DegradationSweep, RejectsBadLayer) {
  SweepConfig cfg = golden::small_sweep_config();
  cfg.layer_id = 5;
  EXPECT_THROW(
      degradation_sweep(golden::quad_model(), golden::quad_data(), cfg),
      DimensionError);
}

TEST(ReportCsv, SweepShapeIs2x2Plus2Summaries) {
  SweepConfig cfg = golden::small_sweep_config();
  cfg.percentages = {0, 40};
  cfg.trials = 2;
  const SweepReport report =
      degradation_sweep(golden::quad_model(), golden::quad_data(), cfg);
  const std::string csv = report_csv(report);
  EXPECT_EQ(count_lines(csv), 1 + 4 + 2);  // header + data + summaries

  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "pct,trial,accuracy,stddev");
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("0,0,", 0), 0u) << line;
  // Summary rows carry the pct, the literal "mean", mean and stddev.
  std::vector<std::string> all;
  all.push_back(line);
  while (std::getline(lines, line)) all.push_back(line);
  EXPECT_EQ(all[4].rfind("0,mean,", 0), 0u) << all[4];
  EXPECT_EQ(all[5].rfind("40,mean,", 0), 0u) << all[5];
}

TEST(ReportCsv, EmptyReportIsHeaderOnly) {
  EXPECT_EQ(report_csv(SweepReport{}), "pct,trial,accuracy,stddev\n");
  EXPECT_EQ(report_csv(CloneReport{}), "pct,condition,accuracy\n");
}

TEST(ReportJson, SweepRoundTripsToEqualReport) {
  const SweepReport report = degradation_sweep(
      golden::quad_model(), golden::quad_data(), golden::small_sweep_config());
  const SweepReport back = sweep_report_from_json(report_json(report));
  EXPECT_EQ(back, report);
}

TEST(ReportJson, CloneRoundTripsToEqualReport) {
  const CloneReport report = golden::small_clone_report();
  const CloneReport back = clone_report_from_json(report_json(report));
  EXPECT_EQ(back, report);
}

TEST(ReportJson, RejectsMalformedInput) {
  EXPECT_THROW(sweep_report_from_json("not json"), ParseError);
  EXPECT_THROW(sweep_report_from_json("{}"), ParseError);
  EXPECT_THROW(clone_report_from_json("[1,2,3]"), ParseError);
}

TEST(CloneEval, TargetDecryptEqualsOriginalEverywhere) {
  const CloneReport report = golden::small_clone_report();
  const double original =
      evaluate(golden::quad_model(), golden::quad_data());
  EXPECT_EQ(report.original_accuracy, original);
  ASSERT_EQ(report.rows.size(), 3u);
  for (const CloneRow& row : report.rows) {
    EXPECT_EQ(row.target_decrypt, original) << "pct " << row.pct;
    ASSERT_EQ(row.clones.size(), 2u);
    for (double acc : {row.no_decrypt, row.target_decrypt}) {
      EXPECT_GE(acc, 0.0);
      EXPECT_LE(acc, 1.0);
    }
  }
  // pct = 0: nothing is encrypted, all conditions equal the original.
  EXPECT_EQ(report.rows[0].no_decrypt, original);
  EXPECT_EQ(report.rows[0].clones[0], original);
  EXPECT_EQ(report.rows[0].clones[1], original);
}

TEST(CloneEval, CsvListsEveryConditionPerPct) {
  const CloneReport report = golden::small_clone_report();
  const std::string csv = report_csv(report);
  EXPECT_EQ(count_lines(csv), 1 + 3 * 4);  // header + 3 pcts x 4 conditions
  EXPECT_NE(csv.find("20,no-decrypt,"), std::string::npos);
  EXPECT_NE(csv.find("20,target-decrypt,"), std::string::npos);
  EXPECT_NE(csv.find("20,clone-1,"), std::string::npos);
  EXPECT_NE(csv.find("20,clone-2,"), std::string::npos);
}

TEST(CloneEval, MatchesGoldenJsonByteForByte) {
  EXPECT_EQ(report_json(golden::small_clone_report()),
            golden::read_text("clone_small.json"));
}

TEST(CloneEval, ValidatesSeedsAndLayer) {
  const Model model = golden::quad_model();
  const Dataset data = golden::quad_data();
  EXPECT_THROW(clone_eval(model, data, 0, {0, 20}, 42, {}, 1), ConfigError);
  EXPECT_THROW(clone_eval(model, data, 0, {0, 20}, 42, {43, 42}, 1),
               ConfigError);
  EXPECT_THROW(clone_eval(model, data, 7, {0, 20}, 42, {43}, 1),
               DimensionError);
  EXPECT_THROW(clone_eval(model, data, 0, {0, 101}, 42, {43}, 1), ConfigError);
}

TEST(CloneEval, ReproducibleGivenSeeds) {
  EXPECT_EQ(golden::small_clone_report(), golden::small_clone_report());
}

TEST(Baseline, UnbalancedDataUsesFlaggedMajorityFrequency) {
  Dataset data;
  data.feature_dim = 2;
  data.num_classes = 2;
  data.features = {0.f, 0.f, 1.f, 1.f, 2.f, 2.f};
  data.labels = {0, 0, 1};

  Model model;
  DenseLayer layer;
  layer.in_dim = 2;
  layer.out_dim = 2;
  layer.weights.assign(4, 0.0f);
  layer.bias = {1.0f, 0.0f};
  model.layers.push_back(layer);
  model.num_classes = 2;

  SweepConfig cfg;
  cfg.percentages = {0};
  cfg.trials = 1;
  const SweepReport report = degradation_sweep(model, data, cfg);
  EXPECT_DOUBLE_EQ(report.random_baseline, 2.0 / 3.0);
  EXPECT_TRUE(report.baseline_is_majority);

  const CloneReport clone = clone_eval(model, data, 0, {0}, 1, {2}, 1);
  EXPECT_DOUBLE_EQ(clone.random_baseline, 2.0 / 3.0);
  EXPECT_TRUE(clone.baseline_is_majority);
}

TEST(SummaryFor, ThrowsWhenPctAbsent) {
  const SweepReport report = degradation_sweep(
      golden::quad_model(), golden::quad_data(), golden::small_sweep_config());
  EXPECT_NO_THROW(summary_for(report, 20));
  EXPECT_THROW(summary_for(report, 15), ConfigError);
}

}  // namespace
}  // namespace puflock
