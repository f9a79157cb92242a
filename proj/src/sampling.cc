#include "disparity_audit/sampling.h"

#include <algorithm>
#include <limits>

#include "disparity_audit/errors.h"
#include "disparity_audit/rng.h"

namespace disparity_audit {
namespace {

StreamRng DrawStream(const SamplingPlan& plan, const std::string& group,
                     std::uint64_t bootstrap_index) {
  return StreamRng(plan.seed, plan.concept_id.key(), group, bootstrap_index);
}

void CheckBootstrapCount(std::uint64_t bootstrap_count) {
  if (bootstrap_count == 0) throw ConfigError("bootstrap count must be positive");
}

}  // namespace

const char* SamplingModeName(SamplingMode mode) {
  return mode == SamplingMode::kReliable ? "reliable" : "baseline";
}

SamplingMode ParseSamplingMode(const std::string& name) {
  if (name == "reliable") return SamplingMode::kReliable;
  if (name == "baseline") return SamplingMode::kBaseline;
  throw ConfigError("unknown sampling mode '" + name + "'");
}

double BootstrapDraw::Prevalence() const {
  const std::size_t total = positive_indices.size() + negative_indices.size();
  if (total == 0) return 0.0;
  return static_cast<double>(positive_indices.size()) / static_cast<double>(total);
}

std::set<ConceptId> FilterRareConcepts(
    const std::map<ConceptId, ConceptEvalTable>& tables,
    std::uint64_t min_per_group) {
  if (min_per_group < 1) throw ConfigError("min_per_group must be at least 1");
  std::set<ConceptId> retained;
  for (const auto& [concept_id, table] : tables) {
    const bool enough = !table.groups.empty() &&
                        std::all_of(table.groups.begin(), table.groups.end(),
                                    [&](const auto& entry) {
                                      return entry.second.positives.size() >=
                                             min_per_group;
                                    });
    if (enough) retained.insert(concept_id);
  }
  return retained;
}

SampleBudget ComputeBudget(const ConceptEvalTable& table,
                           const PrevalenceRatio& ratio) {
  if (ratio.pos_parts == 0 || ratio.neg_parts == 0) {
    throw ConfigError("sampling ratio parts must be positive");
  }
  if (table.groups.empty()) {
    throw DataError("concept '" + table.concept_id.key() + "' has no groups");
  }
  std::uint64_t units = std::numeric_limits<std::uint64_t>::max();
  for (const auto& [group, pool] : table.groups) {
    const std::uint64_t from_pos = pool.positives.size() / ratio.pos_parts;
    const std::uint64_t from_neg = pool.negatives.size() / ratio.neg_parts;
    if (from_pos == 0 || from_neg == 0) {
      throw DataError("concept '" + table.concept_id.key() + "', group '" + group +
                      "': pool (" + std::to_string(pool.positives.size()) + " pos, " +
                      std::to_string(pool.negatives.size()) +
                      " neg) cannot supply ratio " + std::to_string(ratio.pos_parts) +
                      ":" + std::to_string(ratio.neg_parts));
    }
    units = std::min({units, from_pos, from_neg});
  }
  return {units * ratio.pos_parts, units * ratio.neg_parts};
}

SamplingPlan MakeReliablePlan(const ConceptEvalTable& table,
                              const PrevalenceRatio& ratio, std::uint64_t seed,
                              std::uint64_t bootstrap_count) {
  CheckBootstrapCount(bootstrap_count);
  SamplingPlan plan;
  plan.concept_id = table.concept_id;
  plan.mode = SamplingMode::kReliable;
  plan.ratio = ratio;
  plan.budget = ComputeBudget(table, ratio);
  plan.seed = seed;
  plan.bootstrap_count = bootstrap_count;
  return plan;
}

SamplingPlan MakeBaselinePlan(const ConceptEvalTable& table, std::uint64_t seed,
                              std::uint64_t bootstrap_count) {
  CheckBootstrapCount(bootstrap_count);
  SamplingPlan plan;
  plan.concept_id = table.concept_id;
  plan.mode = SamplingMode::kBaseline;
  plan.seed = seed;
  plan.bootstrap_count = bootstrap_count;
  return plan;
}

BootstrapDraw BaselineFullSample(const GroupPool& pool, const std::string& group,
                                 const SamplingPlan& plan,
                                 std::uint64_t bootstrap_index) {
  BootstrapDraw draw;
  draw.group = group;
  draw.bootstrap_index = bootstrap_index;
  StreamRng rng = DrawStream(plan, group, bootstrap_index);
  const std::size_t n = pool.size();
  const std::size_t p = pool.positives.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto pick = static_cast<std::uint32_t>(rng.Below(n));
    if (pick < p) {
      draw.positive_indices.push_back(pick);
    } else {
      draw.negative_indices.push_back(static_cast<std::uint32_t>(pick - p));
    }
  }
  return draw;
}

std::vector<BootstrapDraw> DrawBootstrap(const ConceptEvalTable& table,
                                         const SamplingPlan& plan,
                                         std::uint64_t bootstrap_index) {
  std::vector<BootstrapDraw> draws;
  draws.reserve(table.groups.size());
  for (const auto& [group, pool] : table.groups) {
    if (plan.mode == SamplingMode::kBaseline) {
      draws.push_back(BaselineFullSample(pool, group, plan, bootstrap_index));
      continue;
    }
    if (pool.positives.empty() || pool.negatives.empty()) {
      throw InvariantViolation("reliable draw from an empty pool for group '" +
                               group + "'");
    }
    BootstrapDraw draw;
    draw.group = group;
    draw.bootstrap_index = bootstrap_index;
    StreamRng rng = DrawStream(plan, group, bootstrap_index);
    draw.positive_indices.resize(plan.budget.positives);
    for (auto& index : draw.positive_indices) {
      index = static_cast<std::uint32_t>(rng.Below(pool.positives.size()));
    }
    draw.negative_indices.resize(plan.budget.negatives);
    for (auto& index : draw.negative_indices) {
      index = static_cast<std::uint32_t>(rng.Below(pool.negatives.size()));
    }
    draws.push_back(std::move(draw));
  }
  return draws;
}

std::vector<LabeledScore> DrawRows(const GroupPool& pool, const BootstrapDraw& draw) {
  // Tie keys follow image_id order across the merged pool. Both pool halves
  // are sorted by image_id, so a merge assigns the ranks.
  std::vector<std::uint64_t> pos_rank(pool.positives.size());
  std::vector<std::uint64_t> neg_rank(pool.negatives.size());
  std::size_t i = 0;
  std::size_t j = 0;
  std::uint64_t rank = 0;
  while (i < pool.positives.size() || j < pool.negatives.size()) {
    const bool take_pos =
        j == pool.negatives.size() ||
        (i < pool.positives.size() &&
         pool.positives[i].image_id < pool.negatives[j].image_id);
    if (take_pos) {
      pos_rank[i++] = rank++;
    } else {
      neg_rank[j++] = rank++;
    }
  }
  std::vector<LabeledScore> rows;
  rows.reserve(draw.positive_indices.size() + draw.negative_indices.size());
  for (const std::uint32_t k : draw.positive_indices) {
    rows.push_back({pool.positives[k].score, true, pos_rank[k]});
  }
  for (const std::uint32_t k : draw.negative_indices) {
    rows.push_back({pool.negatives[k].score, false, neg_rank[k]});
  }
  return rows;
}

}  // namespace disparity_audit
