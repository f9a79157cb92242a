#ifndef DISPARITY_AUDIT_DISPARITY_H_
#define DISPARITY_AUDIT_DISPARITY_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace disparity_audit {

// One metric value per bootstrap replicate; std::nullopt marks an undefined
// replicate.
using MetricStream = std::vector<std::optional<double>>;

struct MetricEstimate {
  std::string metric;
  std::string concept_id;  // "aggregate" for cross-concept estimates
  std::string group_a;
  std::string group_b;
  // Mean and 2.5/97.5 percentiles of the per-bootstrap difference a - b.
  // Absent when no bootstrap had both groups defined.
  std::optional<double> point;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  // Difference of the statistic computed on the full pools, when known.
  std::optional<double> full_sample;
  std::uint64_t bootstrap_count = 0;
  std::uint64_t bootstraps_used = 0;
  // False when more than half of the bootstraps were dropped.
  bool reliable = true;
  std::vector<std::uint64_t> n_pos_per_group;
  std::vector<std::uint64_t> n_neg_per_group;

  // Same estimate seen from (b, a): point negated, interval mirrored.
  MetricEstimate Swapped() const;
};

// Linear interpolation between order statistics at rank q/100 * (n - 1).
// Requires non-empty samples and q in [0, 100].
double Percentile(std::span<const double> samples, double q);

// Bootstraps where either group is undefined are dropped pairwise.
MetricEstimate PerConceptDisparity(const MetricStream& group_a,
                                   const MetricStream& group_b);

// Per concept, the (group_a, group_b) streams over the same bootstraps.
struct ConceptStreams {
  MetricStream group_a;
  MetricStream group_b;
};

// Per bootstrap: mean over concepts for a minus mean over concepts for b. A
// bootstrap is dropped if any concept is undefined in it for either group.
// Throws DataError on an empty concept set.
MetricEstimate AggregateDisparity(std::span<const ConceptStreams> concepts);

// True iff zero lies outside [ci_low, ci_high]. Undefined estimates are not
// significant.
bool IsSignificant(const MetricEstimate& estimate);

// Antisymmetric matrix of point disparities for G groups; entry (i, j) is
// the disparity of group i minus group j. Undefined entries are nullopt.
using DisparityMatrix = std::vector<std::vector<std::optional<double>>>;
DisparityMatrix PairwiseDisparities(std::span<const MetricStream> groups);

// Largest defined entry of the matrix (>= 0 by antisymmetry).
std::optional<double> MaxPairwiseDisparity(const DisparityMatrix& matrix);

}  // namespace disparity_audit

#endif  // DISPARITY_AUDIT_DISPARITY_H_
