#ifndef DISPARITY_AUDIT_PIPELINE_H_
#define DISPARITY_AUDIT_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "disparity_audit/concept_mapping.h"
#include "disparity_audit/core_data.h"
#include "disparity_audit/disparity.h"
#include "disparity_audit/errors.h"
#include "disparity_audit/group_ops.h"
#include "disparity_audit/report.h"
#include "disparity_audit/run_config.h"
#include "disparity_audit/sampling.h"
#include "json.hpp"

namespace disparity_audit {

inline constexpr char kToolName[] = "disparity-audit";
inline constexpr char kToolVersion[] = "1.0.0";

// Errors raised inside a stage are re-thrown with a "[stage] " prefix and
// their original type.
template <typename Fn>
auto RunStage(const char* stage, Fn&& fn) -> decltype(fn());

struct LoadedInputs {
  Dataset dataset;
  PredictionSet predictions;
  ValidationReport validation;
  // Images removed for carrying no labels at all.
  std::vector<std::string> dropped_unlabeled;
};

LoadedInputs LoadInputs(const RunConfig& config);

struct GroupingResult {
  std::vector<GroupAssignment> assignments;  // dataset order
  std::vector<std::string> taxonomy;
  std::vector<std::pair<std::string, std::string>> pairs;
  AssignmentSummary summary;
};

GroupingResult AssignGroups(const RunConfig& config, const Dataset& dataset);

struct TargetResult {
  TargetSets targets;
  std::string mapping_name;
  std::vector<std::string> unmapped_labels;  // distinct, sorted
};

TargetResult BuildTargets(const RunConfig& config, const Dataset& dataset);

struct SkippedConcept {
  std::string concept_id;
  std::string stage;
  std::string reason;
};

struct PlanRow {
  std::string concept_id;
  std::string group;
  std::uint64_t pool_positives = 0;
  std::uint64_t pool_negatives = 0;
  std::uint64_t draw_positives = 0;
  std::uint64_t draw_negatives = 0;
  std::string status;  // "planned" or the skip reason
};

struct Evaluation {
  std::vector<ResultRecord> results;
  nlohmann::ordered_json manifest;
  std::vector<GroupAssignment> assignments;
  std::vector<PlanRow> plan;
};

// Runs every stage up to disparity estimation. Nothing is written.
Evaluation Evaluate(const RunConfig& config);

// Evaluate plus results.csv, plotdata/, manifest.json, exclusions.csv and
// report.txt under config.output.
Evaluation Run(const RunConfig& config);

// FNV-1a over the canonical (sorted-key, compact) dump.
std::string ConfigHash(const nlohmann::json& resolved);

void WriteExclusionsCsv(std::ostream& out, std::span<const GroupAssignment> assignments,
                        std::span<const std::string> dropped_unlabeled);
void WritePlanCsv(std::ostream& out, std::span<const PlanRow> plan);

// ---------------------------------------------------------------------------

template <typename Fn>
auto RunStage(const char* stage, Fn&& fn) -> decltype(fn()) {
  const std::string prefix = std::string("[") + stage + "] ";
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const InvariantViolation& e) {
    throw InvariantViolation(prefix + e.what());
  }
}

}  // namespace disparity_audit

#endif  // DISPARITY_AUDIT_PIPELINE_H_
