#include "disparity_audit/disparity.h"

#include <algorithm>
#include <cmath>

#include "disparity_audit/errors.h"

namespace disparity_audit {
namespace {

MetricEstimate Summarize(std::vector<double> differences,
                         std::uint64_t bootstrap_count) {
  MetricEstimate estimate;
  estimate.bootstrap_count = bootstrap_count;
  estimate.bootstraps_used = differences.size();
  estimate.reliable = 2 * differences.size() >= bootstrap_count &&
                      !differences.empty();
  if (differences.empty()) return estimate;
  double sum = 0.0;
  for (const double d : differences) sum += d;
  estimate.point = sum / static_cast<double>(differences.size());
  std::sort(differences.begin(), differences.end());
  estimate.ci_low = Percentile(differences, 2.5);
  estimate.ci_high = Percentile(differences, 97.5);
  return estimate;
}

}  // namespace

MetricEstimate MetricEstimate::Swapped() const {
  MetricEstimate out = *this;
  std::swap(out.group_a, out.group_b);
  if (point) out.point = -*point;
  if (full_sample) out.full_sample = -*full_sample;
  if (ci_low && ci_high) {
    out.ci_low = -*ci_high;
    out.ci_high = -*ci_low;
  }
  if (n_pos_per_group.size() == 2) {
    std::swap(out.n_pos_per_group[0], out.n_pos_per_group[1]);
  }
  if (n_neg_per_group.size() == 2) {
    std::swap(out.n_neg_per_group[0], out.n_neg_per_group[1]);
  }
  return out;
}

double Percentile(std::span<const double> samples, double q) {
  if (samples.empty()) throw InvariantViolation("percentile of no samples");
  if (!(q >= 0.0 && q <= 100.0)) {
    throw InvariantViolation("percentile q must lie in [0, 100]");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  if (!std::is_sorted(sorted.begin(), sorted.end())) {
    std::sort(sorted.begin(), sorted.end());
  }
  // Upper percentiles are interpolated from the top of the order so that
  // Percentile(-x, q) == -Percentile(x, 100 - q) holds bit for bit.
  const bool from_top = q > 50.0;
  const double tail_q = from_top ? 100.0 - q : q;
  const double rank = tail_q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto offset = static_cast<std::size_t>(std::floor(rank));
  const double weight = rank - static_cast<double>(offset);
  if (from_top) {
    const std::size_t top = sorted.size() - 1 - offset;
    if (weight == 0.0) return sorted[top];
    return sorted[top] - weight * (sorted[top] - sorted[top - 1]);
  }
  if (weight == 0.0) return sorted[offset];
  return sorted[offset] + weight * (sorted[offset + 1] - sorted[offset]);
}

MetricEstimate PerConceptDisparity(const MetricStream& group_a,
                                   const MetricStream& group_b) {
  if (group_a.size() != group_b.size()) {
    throw InvariantViolation("disparity streams differ in bootstrap count");
  }
  std::vector<double> differences;
  differences.reserve(group_a.size());
  for (std::size_t b = 0; b < group_a.size(); ++b) {
    if (group_a[b] && group_b[b]) differences.push_back(*group_a[b] - *group_b[b]);
  }
  return Summarize(std::move(differences), group_a.size());
}

MetricEstimate AggregateDisparity(std::span<const ConceptStreams> concepts) {
  if (concepts.empty()) throw DataError("aggregate disparity over no concepts");
  const std::size_t count = concepts.front().group_a.size();
  for (const ConceptStreams& c : concepts) {
    if (c.group_a.size() != count || c.group_b.size() != count) {
      throw InvariantViolation("aggregate streams differ in bootstrap count");
    }
  }
  std::vector<double> differences;
  for (std::size_t b = 0; b < count; ++b) {
    double sum_a = 0.0;
    double sum_b = 0.0;
    bool defined = true;
    for (const ConceptStreams& c : concepts) {
      if (!c.group_a[b] || !c.group_b[b]) {
        defined = false;
        break;
      }
      sum_a += *c.group_a[b];
      sum_b += *c.group_b[b];
    }
    if (!defined) continue;
    const auto n = static_cast<double>(concepts.size());
    differences.push_back(sum_a / n - sum_b / n);
  }
  MetricEstimate estimate = Summarize(std::move(differences), count);
  estimate.concept_id = "aggregate";
  return estimate;
}

bool IsSignificant(const MetricEstimate& estimate) {
  if (!estimate.ci_low || !estimate.ci_high) return false;
  return !(*estimate.ci_low <= 0.0 && 0.0 <= *estimate.ci_high);
}

DisparityMatrix PairwiseDisparities(std::span<const MetricStream> groups) {
  DisparityMatrix matrix(groups.size(),
                         std::vector<std::optional<double>>(groups.size()));
  for (std::size_t i = 0; i < groups.size(); ++i) {
    matrix[i][i] = 0.0;
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      const MetricEstimate e = PerConceptDisparity(groups[i], groups[j]);
      if (!e.point) continue;
      matrix[i][j] = *e.point;
      matrix[j][i] = -*e.point;
    }
  }
  return matrix;
}

std::optional<double> MaxPairwiseDisparity(const DisparityMatrix& matrix) {
  std::optional<double> best;
  for (const auto& row : matrix) {
    for (const auto& entry : row) {
      if (entry && (!best || *entry > *best)) best = entry;
    }
  }
  return best;
}

}  // namespace disparity_audit
