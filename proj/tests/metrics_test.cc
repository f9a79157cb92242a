#include "disparity_audit/metrics.h"

#include <cmath>

#include "disparity_audit/errors.h"
#include "gtest/gtest.h"
#include "test_support.h"

namespace disparity_audit {
namespace {

using testing_support::BruteForceAp;
using testing_support::BruteForceAuc;
using testing_support::ExhaustiveThresholdScan;
using testing_support::Rows;

TEST(ConfusionAtThreshold, Examples) {
  EXPECT_EQ(ConfusionAtThreshold(Rows({0.9, 0.2}, {true, false}), 0.5),
            (ConfusionCounts{1, 0, 1, 0}));
  const auto above = ConfusionAtThreshold(Rows({0.9, 0.2}, {true, false}), 0.95);
  EXPECT_EQ(above.tp + above.fp, 0u);
  EXPECT_EQ(ConfusionAtThreshold(Rows({0.9, 0.8, 0.7, 0.1}, {true, false, true, false}), 0.75),
            (ConfusionCounts{1, 1, 1, 1}));
  // score == threshold predicts positive.
  EXPECT_EQ(ConfusionAtThreshold(Rows({0.5}, {true}), 0.5).tp, 1u);
}

TEST(RatesFromConfusion, Examples) {
  const RateBundle r = RatesFromConfusion({1, 1, 1, 1});
  EXPECT_EQ(r.tpr, 0.5);
  EXPECT_EQ(r.fpr, 0.5);
  EXPECT_EQ(r.precision, 0.5);
  EXPECT_EQ(r.accuracy, 0.5);
  EXPECT_EQ(r.f1, 0.5);
  EXPECT_EQ(r.recall, r.tpr);
  EXPECT_EQ(RatesFromConfusion({0, 0, 3, 2}).precision, std::nullopt);
  const RateBundle perfect = RatesFromConfusion({4, 0, 6, 0});
  EXPECT_EQ(perfect.tpr, 1.0);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
  EXPECT_EQ(perfect.fpr, 0.0);
  EXPECT_EQ(RatesFromConfusion({0, 0, 0, 0}).tpr, std::nullopt);
  EXPECT_EQ(RatesFromConfusion({2, 0, 0, 0}).fpr, std::nullopt);
}

TEST(RateIdentities, Examples) {
  EXPECT_NEAR(*PrecisionFromRates(0.5, 0.8, 0.2), 0.8, 1e-15);
  EXPECT_EQ(PrecisionFromRates(0.3, 0.4, 0.0), 1.0);
  EXPECT_EQ(PrecisionFromRates(1.0, 0.4, 0.7), 1.0);
  EXPECT_EQ(PrecisionFromRates(0.3, 0.0, 0.0), std::nullopt);
  EXPECT_NEAR(AccuracyFromRates(0.3, 0.9, 0.1), 0.9, 1e-15);
  EXPECT_EQ(AccuracyFromRates(0.0, 0.3, 0.0), 1.0);
  for (const double alpha : {0.0, 0.1, 0.5, 0.99, 1.0}) {
    EXPECT_EQ(AccuracyFromRates(alpha, 1.0, 0.0), 1.0);
  }
}

TEST(AveragePrecision, Examples) {
  EXPECT_NEAR(*AveragePrecision(Rows({0.9, 0.8, 0.7, 0.6}, {true, false, true, false})),
              (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(AveragePrecision(Rows({0.1, 0.9, 0.8, 0.2}, {false, true, true, false})), 1.0);
  EXPECT_EQ(AveragePrecision(Rows({0.1, 0.9}, {false, false})), std::nullopt);
  EXPECT_EQ(AveragePrecision({}), std::nullopt);
}

TEST(AveragePrecision, TiesFollowTieKey) {
  // Equal scores: the row with the smaller tie key ranks first.
  std::vector<LabeledScore> rows = {{0.5, false, 0}, {0.5, true, 1}};
  EXPECT_EQ(AveragePrecision(rows), 0.5);
  rows[0].tie_key = 2;
  EXPECT_EQ(AveragePrecision(rows), 1.0);
}

TEST(AucRoc, Examples) {
  EXPECT_EQ(AucRoc(Rows({0.9, 0.8, 0.7, 0.6}, {true, false, true, false})), 0.75);
  EXPECT_EQ(AucRoc(Rows({0.9, 0.8, 0.2}, {true, true, false})), 1.0);
  EXPECT_EQ(AucRoc(Rows({0.4, 0.4, 0.4, 0.4}, {true, false, true, false})), 0.5);
  EXPECT_EQ(AucRoc(Rows({0.4, 0.3}, {true, true})), std::nullopt);
}

// Random instances with heavy ties, checked against the rank definition.
TEST(RankingMetrics, PropertyMatchOraclesWithTies) {
  StreamRng rng(7);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::size_t n = 1 + rng.Below(40);
    // Tie keys are distinct, as image ranks are.
    std::vector<std::uint64_t> keys(n);
    for (std::size_t i = 0; i < n; ++i) keys[i] = 3 * i;
    rng.Shuffle(keys);
    std::vector<LabeledScore> rows;
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back({static_cast<double>(rng.Below(6)) / 5.0, rng.Below(3) == 0, keys[i]});
    }
    const auto ap = AveragePrecision(rows);
    const auto oracle_ap = BruteForceAp(rows);
    ASSERT_EQ(ap.has_value(), oracle_ap.has_value());
    if (ap) EXPECT_NEAR(*ap, *oracle_ap, 1e-12);
    const auto auc = AucRoc(rows);
    const auto oracle_auc = BruteForceAuc(rows);
    ASSERT_EQ(auc.has_value(), oracle_auc.has_value());
    if (auc) EXPECT_NEAR(*auc, *oracle_auc, 1e-12);
  }
}

TEST(RankingMetrics, PropertyInvariantUnderIncreasingTransforms) {
  StreamRng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.Below(30);
    std::vector<LabeledScore> rows;
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back({rng.Normal(), rng.Below(2) == 0, i});
    }
    auto transformed = rows;
    for (auto& r : transformed) r.score = std::exp(3.0 * r.score) + 7.0;
    EXPECT_EQ(AveragePrecision(rows), AveragePrecision(transformed));
    EXPECT_EQ(AucRoc(rows), AucRoc(transformed));
  }
}

TEST(AveragePrecision, PropertySwappingAdjacentPairNeverHelps) {
  StreamRng rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.Below(12);
    // Ranked order is the vector order: strictly decreasing scores.
    std::vector<bool> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = rng.Below(2) == 0;
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) scores[i] = static_cast<double>(n - i);
    const auto before = AveragePrecision(Rows(scores, labels));
    for (std::size_t k = 0; k + 1 < n; ++k) {
      if (!(labels[k] && !labels[k + 1])) continue;
      auto swapped = labels;
      std::swap(swapped[k], swapped[k + 1]);
      EXPECT_LE(*AveragePrecision(Rows(scores, swapped)), *before);
    }
  }
}

TEST(SelectThreshold, Examples) {
  const auto rows = Rows({0.9, 0.8, 0.7, 0.1}, {true, false, true, false});
  const ThresholdChoice choice = SelectThreshold(rows);
  EXPECT_GT(choice.threshold, 0.1);
  EXPECT_LE(choice.threshold, 0.7);
  EXPECT_DOUBLE_EQ(choice.f1, 0.8);
  EXPECT_EQ(ConfusionAtThreshold(rows, choice.threshold), (ConfusionCounts{2, 1, 1, 0}));

  const ThresholdChoice separable =
      SelectThreshold(Rows({0.9, 0.8, 0.3, 0.2}, {true, true, false, false}));
  EXPECT_EQ(separable.f1, 1.0);
  EXPECT_THROW(SelectThreshold(Rows({0.3, 0.2}, {false, false})), DataError);
}

TEST(SelectThreshold, PropertyMatchesScanAndStaysAtOrBelowMax) {
  StreamRng rng(17);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::size_t n = 1 + rng.Below(15);
    std::vector<LabeledScore> rows;
    bool any_positive = false;
    for (std::size_t i = 0; i < n; ++i) {
      const bool positive = rng.Below(2) == 0;
      any_positive |= positive;
      rows.push_back({static_cast<double>(rng.Below(5)), positive, i});
    }
    if (!any_positive) continue;
    const ThresholdChoice choice = SelectThreshold(rows);
    const auto scan = ExhaustiveThresholdScan(rows);
    double max_score = rows[0].score;
    for (const auto& r : rows) max_score = std::max(max_score, r.score);
    EXPECT_LE(choice.threshold, max_score);
    EXPECT_DOUBLE_EQ(choice.f1, scan.f1);
    EXPECT_EQ(ConfusionAtThreshold(rows, choice.threshold), scan.counts);
  }
}

std::vector<ScoredRow> ScoredRows(std::size_t positives, std::size_t negatives) {
  std::vector<ScoredRow> rows;
  for (std::size_t i = 0; i < positives + negatives; ++i) {
    rows.push_back({"r" + std::to_string(1000 + i), 0.01 * static_cast<double>(i),
                    i < positives});
  }
  return rows;
}

TEST(SplitValidationTest, SizesAndDeterminism) {
  const auto rows = ScoredRows(3, 7);
  const auto split = SplitValidationTest(rows, 0.2, 5);
  EXPECT_EQ(split.validation.size(), 2u);
  EXPECT_EQ(split.test.size(), 8u);
  EXPECT_TRUE(split.stratified);
  const auto again = SplitValidationTest(rows, 0.2, 5);
  EXPECT_EQ(again.validation, split.validation);
  EXPECT_EQ(again.test, split.test);
  EXPECT_THROW(SplitValidationTest(rows, 1.0, 5), ConfigError);
}

TEST(SplitValidationTest, PropertyPartitionsAndStratifies) {
  StreamRng rng(19);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t p = rng.Below(30);
    const std::size_t n = rng.Below(60);
    if (p + n < 2) continue;
    const double fraction = 0.05 + 0.9 * rng.Uniform();
    const auto rows = ScoredRows(p, n);
    const auto split = SplitValidationTest(rows, fraction, trial);
    ASSERT_EQ(split.validation.size() + split.test.size(), rows.size());
    EXPECT_GE(split.validation.size(), 1u);
    EXPECT_GE(split.test.size(), 1u);
    std::vector<ScoredRow> joined = split.validation;
    joined.insert(joined.end(), split.test.begin(), split.test.end());
    std::sort(joined.begin(), joined.end(),
              [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
    EXPECT_EQ(joined, rows);
    const auto val_pos = std::count_if(split.validation.begin(), split.validation.end(),
                                       [](const auto& r) { return r.positive; });
    if (split.stratified) {
      const auto wanted = std::min<std::size_t>(
          std::llround(fraction * static_cast<double>(p)), split.validation.size());
      EXPECT_LE(std::abs(static_cast<long>(val_pos) - static_cast<long>(wanted)), 1);
    }
  }
}

TEST(SplitValidationTest, FallsBackWhenStratumTooSmall) {
  const auto split = SplitValidationTest(ScoredRows(1, 9), 0.2, 3);
  EXPECT_FALSE(split.stratified);
  EXPECT_EQ(split.validation.size(), 2u);
}

std::set<ConceptId> Targets(std::initializer_list<const char*> keys) {
  std::set<ConceptId> out;
  for (const char* k : keys) out.insert(ConceptId(k));
  return out;
}

TEST(HitRate, Examples) {
  const std::map<std::string, double> scores = {
      {"shower", 0.9}, {"tub", 0.1}, {"sink", 0.5}, {"bathtub", 0.8},
      {"towel", 0.7},  {"mat", 0.6}, {"car", 0.05}};
  EXPECT_TRUE(IsHitAtK(scores, Targets({"shower"}), 5));
  EXPECT_TRUE(IsHitAtK(scores, Targets({"shower_room", "bathtub"}), 5));
  EXPECT_FALSE(IsHitAtK(scores, Targets({"car"}), 5));
  EXPECT_FALSE(IsHitAtK(scores, Targets({"bathtub"}), 1));
  EXPECT_THROW(IsHitAtK({{"a", 1.0}}, Targets({"a"}), 2), DataError);
  // Ties at the cut-off are broken by concept key.
  EXPECT_TRUE(IsHitAtK({{"a", 0.5}, {"b", 0.5}}, Targets({"a"}), 1));
  EXPECT_FALSE(IsHitAtK({{"a", 0.5}, {"b", 0.5}}, Targets({"b"}), 1));
}

TEST(HitRate, MeanOverImagesWithTargets) {
  std::vector<AnnotatedImage> images(3);
  images[0].image_id = "i1";
  images[1].image_id = "i2";
  images[2].image_id = "i3";
  const Dataset dataset(images);
  const PredictionSet predictions = PredictionSet::FromRecords(
      {{"i1", {{"a", 0.9}, {"b", 0.1}}}, {"i2", {{"a", 0.9}, {"b", 0.1}}},
       {"i3", {{"a", 0.9}, {"b", 0.1}}}},
      dataset);
  const TargetSets targets = {{"i1", Targets({"a"})}, {"i2", Targets({"b"})}, {"i3", {}}};
  const std::vector<std::string> ids = {"i1", "i2", "i3"};
  const HitRateResult result = HitRateAtK(ids, predictions, targets, 1);
  EXPECT_EQ(result.value, 0.5);
  EXPECT_EQ(result.evaluated, 2u);
  EXPECT_EQ(result.excluded, std::vector<std::string>{"i3"});
}

TEST(EvaluateMetric, DispatchAndThresholds) {
  const auto rows = Rows({0.9, 0.8, 0.7, 0.1}, {true, false, true, false});
  EXPECT_EQ(EvaluateMetric(Metric::kAucRoc, rows, std::nullopt), AucRoc(rows));
  EXPECT_EQ(EvaluateMetric(Metric::kTpr, rows, 0.75), 0.5);
  EXPECT_EQ(EvaluateMetric(Metric::kFpr, rows, 0.75), 0.5);
  EXPECT_EQ(EvaluateMetric(Metric::kPrecision, rows, 0.95), std::nullopt);
  EXPECT_EQ(EvaluateMetric(Metric::kTpr, rows, std::nullopt), std::nullopt);
  EXPECT_THROW(EvaluateMetric(Metric::kHitRate, rows, std::nullopt), InvariantViolation);
  for (const char* name :
       {"ap", "tpr", "fpr", "precision", "recall", "accuracy", "auc_roc", "hit_rate"}) {
    EXPECT_STREQ(MetricName(ParseMetric(name)), name);
  }
  EXPECT_THROW(ParseMetric("mAP"), ConfigError);
}

}  // namespace
}  // namespace disparity_audit
