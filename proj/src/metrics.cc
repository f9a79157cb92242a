#include "disparity_audit/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "disparity_audit/errors.h"
#include "disparity_audit/log.h"
#include "disparity_audit/rng.h"

namespace disparity_audit {
namespace {

std::optional<double> Ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

bool RanksBefore(const LabeledScore& a, const LabeledScore& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tie_key < b.tie_key;
}

std::vector<std::size_t> TakeShuffled(std::size_t n, std::size_t take,
                                      StreamRng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.Shuffle(order);
  order.resize(take);
  return order;
}

}  // namespace

std::vector<LabeledScore> ToLabeledScores(std::span<const ScoredRow> rows) {
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rows[a].image_id < rows[b].image_id;
  });
  std::vector<LabeledScore> out(rows.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const ScoredRow& row = rows[order[rank]];
    out[order[rank]] = {row.score, row.positive, rank};
  }
  return out;
}

ConfusionCounts ConfusionAtThreshold(std::span<const LabeledScore> rows,
                                     double threshold) {
  ConfusionCounts c;
  for (const LabeledScore& row : rows) {
    const bool predicted = row.score >= threshold;
    if (row.positive) {
      (predicted ? c.tp : c.fn)++;
    } else {
      (predicted ? c.fp : c.tn)++;
    }
  }
  return c;
}

RateBundle RatesFromConfusion(const ConfusionCounts& c) {
  RateBundle r;
  r.tpr = Ratio(c.tp, c.positives());
  r.recall = r.tpr;
  r.fpr = Ratio(c.fp, c.negatives());
  r.precision = Ratio(c.tp, c.tp + c.fp);
  r.accuracy = Ratio(c.tp + c.tn, c.total());
  r.f1 = Ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  r.prevalence = Ratio(c.positives(), c.total());
  return r;
}

std::optional<double> PrecisionFromRates(double prevalence, double tpr,
                                         double fpr) {
  const double hits = prevalence * tpr;
  const double denominator = hits + (1.0 - prevalence) * fpr;
  if (denominator <= 0.0) return std::nullopt;
  return hits / denominator;
}

double AccuracyFromRates(double prevalence, double tpr, double fpr) {
  return prevalence * tpr + (1.0 - prevalence) * (1.0 - fpr);
}

std::optional<double> AveragePrecision(std::span<const LabeledScore> rows) {
  std::vector<LabeledScore> ranked(rows.begin(), rows.end());
  std::sort(ranked.begin(), ranked.end(), RanksBefore);
  double sum = 0.0;
  std::uint64_t hits = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    if (!ranked[k].positive) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

std::optional<double> AucRoc(std::span<const LabeledScore> rows) {
  std::vector<LabeledScore> sorted(rows.begin(), rows.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const LabeledScore& a, const LabeledScore& b) {
              return a.score < b.score;
            });
  // Sum of positive midranks (1-based), doubled to stay integral.
  std::uint64_t positives = 0;
  std::uint64_t rank_sum_x2 = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    std::uint64_t block_positives = 0;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      block_positives += sorted[j].positive ? 1 : 0;
      ++j;
    }
    rank_sum_x2 += block_positives * (i + 1 + j);
    positives += block_positives;
    i = j;
  }
  const std::uint64_t negatives = sorted.size() - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  const double u = static_cast<double>(rank_sum_x2) / 2.0 -
                   static_cast<double>(positives) *
                       static_cast<double>(positives + 1) / 2.0;
  return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

ThresholdChoice SelectThreshold(std::span<const LabeledScore> rows) {
  std::vector<LabeledScore> sorted(rows.begin(), rows.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const LabeledScore& a, const LabeledScore& b) {
              return a.score < b.score;
            });
  const auto total_positives = static_cast<std::uint64_t>(std::count_if(
      sorted.begin(), sorted.end(), [](const LabeledScore& r) { return r.positive; }));
  if (total_positives == 0) {
    throw DataError("threshold selection needs at least one positive");
  }
  // Walk the distinct score levels from the lowest. At level i every row
  // with score >= level_i is predicted positive.
  std::uint64_t tp = total_positives;
  std::uint64_t fp = sorted.size() - total_positives;
  ThresholdChoice best{
      std::nextafter(sorted.front().score, -std::numeric_limits<double>::infinity()),
      -1.0};
  double previous = sorted.front().score;
  for (std::size_t i = 0; i < sorted.size();) {
    const double level = sorted[i].score;
    if (i > 0) {
      double threshold = previous + (level - previous) / 2.0;
      if (threshold <= previous) threshold = level;
      const std::uint64_t fn = total_positives - tp;
      const double f1 = 2.0 * static_cast<double>(tp) /
                        static_cast<double>(2 * tp + fp + fn);
      if (f1 > best.f1) best = {threshold, f1};
    } else {
      const double f1 = 2.0 * static_cast<double>(tp) /
                        static_cast<double>(2 * tp + fp);
      best.f1 = f1;
    }
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].score == level) {
      (sorted[j].positive ? tp : fp)--;
      ++j;
    }
    previous = level;
    i = j;
  }
  return best;
}

ValidationTestSplit SplitValidationTest(std::span<const ScoredRow> rows,
                                        double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
  const std::size_t n = rows.size();
  std::size_t n_val = static_cast<std::size_t>(std::llround(fraction * n));
  if (n >= 2) n_val = std::clamp<std::size_t>(n_val, 1, n - 1);

  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  for (std::size_t i = 0; i < n; ++i) {
    (rows[i].positive ? positives : negatives).push_back(i);
  }
  std::size_t pos_val = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(positives.size())));
  pos_val = std::min({pos_val, positives.size(), n_val});
  std::size_t neg_val = n_val - pos_val;
  if (neg_val > negatives.size()) {
    neg_val = negatives.size();
    pos_val = n_val - neg_val;
  }

  std::vector<bool> in_validation(n, false);
  ValidationTestSplit split;
  StreamRng rng(seed);
  if (!positives.empty() && pos_val == 0) {
    log::Warn("validation split: too few positives (" +
              std::to_string(positives.size()) +
              ") to stratify; using an unstratified split");
    split.stratified = false;
    for (const std::size_t i : TakeShuffled(n, n_val, rng)) in_validation[i] = true;
  } else {
    for (const std::size_t k : TakeShuffled(positives.size(), pos_val, rng)) {
      in_validation[positives[k]] = true;
    }
    for (const std::size_t k : TakeShuffled(negatives.size(), neg_val, rng)) {
      in_validation[negatives[k]] = true;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    (in_validation[i] ? split.validation : split.test).push_back(rows[i]);
  }
  return split;
}

bool IsHitAtK(const std::map<std::string, double>& scores,
              const std::set<ConceptId>& targets, std::size_t k) {
  if (k == 0) throw ConfigError("hit-rate k must be at least 1");
  if (scores.size() < k) {
    throw DataError("hit-rate@" + std::to_string(k) + " needs at least " +
                    std::to_string(k) + " scored concepts, got " +
                    std::to_string(scores.size()));
  }
  std::vector<std::pair<const std::string*, double>> ranked;
  ranked.reserve(scores.size());
  for (const auto& [concept_id, score] : scores) ranked.emplace_back(&concept_id, score);
  // std::map iteration is already in key order, so a stable sort on score
  // alone breaks ties by concept key.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (std::size_t i = 0; i < k; ++i) {
    if (targets.contains(ConceptId(*ranked[i].first))) return true;
  }
  return false;
}

HitRateResult HitRateAtK(std::span<const std::string> image_ids,
                         const PredictionSet& predictions,
                         const TargetSets& targets, std::size_t k) {
  HitRateResult result;
  for (const std::string& id : image_ids) {
    const auto t = targets.find(id);
    if (t == targets.end() || t->second.empty()) {
      result.excluded.push_back(id);
      continue;
    }
    const PredictionRecord* record = predictions.Find(id);
    if (record == nullptr) {
      throw DataError("hit-rate: image '" + id + "' has no predictions");
    }
    ++result.evaluated;
    if (IsHitAtK(record->scores, t->second, k)) ++result.hits;
  }
  if (!result.excluded.empty()) {
    log::Warn("hit-rate: " + std::to_string(result.excluded.size()) +
              " images without targets excluded");
  }
  result.value = Ratio(result.hits, result.evaluated);
  return result;
}

const char* MetricName(Metric metric) {
  switch (metric) {
    case Metric::kAp:
      return "ap";
    case Metric::kTpr:
      return "tpr";
    case Metric::kFpr:
      return "fpr";
    case Metric::kPrecision:
      return "precision";
    case Metric::kRecall:
      return "recall";
    case Metric::kAccuracy:
      return "accuracy";
    case Metric::kAucRoc:
      return "auc_roc";
    case Metric::kHitRate:
      return "hit_rate";
  }
  throw InvariantViolation("unknown metric");
}

Metric ParseMetric(const std::string& name) {
  for (const Metric m : {Metric::kAp, Metric::kTpr, Metric::kFpr, Metric::kPrecision,
                         Metric::kRecall, Metric::kAccuracy, Metric::kAucRoc,
                         Metric::kHitRate}) {
    if (name == MetricName(m)) return m;
  }
  throw ConfigError("unknown metric '" + name + "'");
}

bool NeedsThreshold(Metric metric) {
  switch (metric) {
    case Metric::kTpr:
    case Metric::kFpr:
    case Metric::kPrecision:
    case Metric::kRecall:
    case Metric::kAccuracy:
      return true;
    default:
      return false;
  }
}

std::optional<double> EvaluateMetric(Metric metric,
                                     std::span<const LabeledScore> rows,
                                     std::optional<double> threshold) {
  switch (metric) {
    case Metric::kAp:
      return AveragePrecision(rows);
    case Metric::kAucRoc:
      return AucRoc(rows);
    case Metric::kHitRate:
      throw InvariantViolation("hit_rate is an image-level metric");
    default:
      break;
  }
  if (!threshold) return std::nullopt;
  const RateBundle rates = RatesFromConfusion(ConfusionAtThreshold(rows, *threshold));
  switch (metric) {
    case Metric::kTpr:
      return rates.tpr;
    case Metric::kFpr:
      return rates.fpr;
    case Metric::kPrecision:
      return rates.precision;
    case Metric::kRecall:
      return rates.recall;
    case Metric::kAccuracy:
      return rates.accuracy;
    default:
      throw InvariantViolation("unhandled metric");
  }
}

}  // namespace disparity_audit
