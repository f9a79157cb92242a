#ifndef DISPARITY_AUDIT_METRICS_H_
#define DISPARITY_AUDIT_METRICS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "disparity_audit/concept_mapping.h"
#include "disparity_audit/core_data.h"

namespace disparity_audit {

// A score with its binary label. Rows are ranked by descending score; equal
// scores are ordered by ascending tie_key, which callers derive from image_id
// order so rankings are total and reproducible.
struct LabeledScore {
  double score = 0.0;
  bool positive = false;
  std::uint64_t tie_key = 0;
};

// tie_key = position of the row's image_id in sorted id order.
std::vector<LabeledScore> ToLabeledScores(std::span<const ScoredRow> rows);

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t positives() const { return tp + fn; }
  std::uint64_t negatives() const { return fp + tn; }
  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

// Undefined rates are std::nullopt, never 0 or NaN.
struct RateBundle {
  std::optional<double> tpr;
  std::optional<double> fpr;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> accuracy;
  std::optional<double> f1;
  std::optional<double> prevalence;
};

// Predicts positive iff score >= threshold.
ConfusionCounts ConfusionAtThreshold(std::span<const LabeledScore> rows,
                                     double threshold);

RateBundle RatesFromConfusion(const ConfusionCounts& counts);

// alpha*TPR / (alpha*TPR + (1 - alpha)*FPR); undefined when the denominator
// is zero.
std::optional<double> PrecisionFromRates(double prevalence, double tpr,
                                         double fpr);

// alpha*TPR + (1 - alpha)*(1 - FPR).
double AccuracyFromRates(double prevalence, double tpr, double fpr);

// Non-interpolated AP: mean over positives of precision at the positive's
// rank. Undefined without positives.
std::optional<double> AveragePrecision(std::span<const LabeledScore> rows);

// Mann-Whitney statistic with ties counting one half. Undefined unless both
// classes are present.
std::optional<double> AucRoc(std::span<const LabeledScore> rows);

struct ThresholdChoice {
  double threshold = 0.0;
  double f1 = 0.0;
};

// Maximizes F1 over the midpoints between consecutive distinct scores plus
// one value just below the minimum; the all-negative threshold is never a
// candidate. Ties go to the lowest threshold. Throws DataError without
// positives.
ThresholdChoice SelectThreshold(std::span<const LabeledScore> rows);

struct ValidationTestSplit {
  std::vector<ScoredRow> validation;
  std::vector<ScoredRow> test;
  bool stratified = true;
};

// Validation gets round(fraction * n) rows (at least one row in each part
// when n >= 2), stratified by label. When stratification would leave the
// validation part without a positive, falls back to an unstratified split
// and logs a warning. Input order is preserved inside each part.
ValidationTestSplit SplitValidationTest(std::span<const ScoredRow> rows,
                                        double fraction, std::uint64_t seed);

struct HitRateResult {
  std::optional<double> value;
  std::size_t hits = 0;
  std::size_t evaluated = 0;
  // Images with an empty target set.
  std::vector<std::string> excluded;
};

// True iff one of the k highest-scoring concepts is in `targets`. Equal
// scores are ordered by concept key. Throws DataError when fewer than k
// concepts are scored.
bool IsHitAtK(const std::map<std::string, double>& scores,
              const std::set<ConceptId>& targets, std::size_t k);

HitRateResult HitRateAtK(std::span<const std::string> image_ids,
                         const PredictionSet& predictions,
                         const TargetSets& targets, std::size_t k);

enum class Metric {
  kAp,
  kTpr,
  kFpr,
  kPrecision,
  kRecall,
  kAccuracy,
  kAucRoc,
  kHitRate,
};

const char* MetricName(Metric metric);
Metric ParseMetric(const std::string& name);
bool NeedsThreshold(Metric metric);

// Per-concept metric on one sample of rows. kHitRate is image-level and is
// rejected here.
std::optional<double> EvaluateMetric(Metric metric,
                                     std::span<const LabeledScore> rows,
                                     std::optional<double> threshold);

}  // namespace disparity_audit

#endif  // DISPARITY_AUDIT_METRICS_H_
