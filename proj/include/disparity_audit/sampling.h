#ifndef DISPARITY_AUDIT_SAMPLING_H_
#define DISPARITY_AUDIT_SAMPLING_H_

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "disparity_audit/concept_mapping.h"
#include "disparity_audit/metrics.h"

namespace disparity_audit {

// Positive to negative parts, e.g. 1:5.
struct PrevalenceRatio {
  std::uint64_t pos_parts = 1;
  std::uint64_t neg_parts = 5;

  double Prevalence() const {
    return static_cast<double>(pos_parts) /
           static_cast<double>(pos_parts + neg_parts);
  }
  bool operator==(const PrevalenceRatio&) const = default;
};

struct SampleBudget {
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
  bool operator==(const SampleBudget&) const = default;
};

enum class SamplingMode {
  // Per group: exactly budget.positives and budget.negatives, with
  // replacement, identical across groups.
  kReliable,
  // Per group: an ordinary bootstrap of the whole pool at its own size.
  kBaseline,
};

const char* SamplingModeName(SamplingMode mode);
SamplingMode ParseSamplingMode(const std::string& name);

struct SamplingPlan {
  ConceptId concept_id;
  SamplingMode mode = SamplingMode::kReliable;
  PrevalenceRatio ratio;
  // Meaningful in kReliable mode only.
  SampleBudget budget;
  std::uint64_t seed = 0;
  std::uint64_t bootstrap_count = 250;
};

// Indices into a group's positive and negative pools; repeats allowed.
struct BootstrapDraw {
  std::string group;
  std::uint64_t bootstrap_index = 0;
  std::vector<std::uint32_t> positive_indices;
  std::vector<std::uint32_t> negative_indices;

  double Prevalence() const;
};

// Concepts whose every group has at least `min_per_group` positives.
// Throws ConfigError when min_per_group < 1.
std::set<ConceptId> FilterRareConcepts(
    const std::map<ConceptId, ConceptEvalTable>& tables,
    std::uint64_t min_per_group);

// Largest budget such that every group can supply it:
// k = min_g min(P_g / pos_parts, N_g / neg_parts), budget = k * parts.
// Throws DataError naming the first group that cannot supply one unit.
SampleBudget ComputeBudget(const ConceptEvalTable& table,
                           const PrevalenceRatio& ratio);

// Validates the ratio and bootstrap count, then fills in the budget.
SamplingPlan MakeReliablePlan(const ConceptEvalTable& table,
                              const PrevalenceRatio& ratio, std::uint64_t seed,
                              std::uint64_t bootstrap_count);
SamplingPlan MakeBaselinePlan(const ConceptEvalTable& table, std::uint64_t seed,
                              std::uint64_t bootstrap_count);

// One draw per group, in group order. Each group's draw is a pure function
// of (seed, concept, group, bootstrap_index).
std::vector<BootstrapDraw> DrawBootstrap(const ConceptEvalTable& table,
                                         const SamplingPlan& plan,
                                         std::uint64_t bootstrap_index);

// Baseline draw for one group: pool-size resample of the combined pool.
BootstrapDraw BaselineFullSample(const GroupPool& pool, const std::string& group,
                                 const SamplingPlan& plan,
                                 std::uint64_t bootstrap_index);

// Materializes a draw into rows ready for metric evaluation. Ties are keyed
// by image_id order within the pool.
std::vector<LabeledScore> DrawRows(const GroupPool& pool,
                                   const BootstrapDraw& draw);

}  // namespace disparity_audit

#endif  // DISPARITY_AUDIT_SAMPLING_H_
