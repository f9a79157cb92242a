#ifndef DISPARITY_AUDIT_RUN_CONFIG_H_
#define DISPARITY_AUDIT_RUN_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "disparity_audit/concept_mapping.h"
#include "disparity_audit/core_data.h"
#include "disparity_audit/group_ops.h"
#include "disparity_audit/metrics.h"
#include "disparity_audit/sampling.h"
#include "json.hpp"

namespace disparity_audit {

enum class GroupMethod { kBoxes, kCaptions, kMetadata };
enum class ThresholdScope { kPooled, kPerGroup };

struct RunConfig {
  // Data.
  std::filesystem::path annotations;
  std::filesystem::path predictions;
  AnnotationFormat format = AnnotationFormat::kJsonLines;
  bool drop_unlabeled_images = true;

  // Groups.
  GroupMethod group_method = GroupMethod::kBoxes;
  // File path, or "builtin:synset_gender" / "builtin:caption_gender".
  std::string terms_source = "builtin:synset_gender";
  bool apply_excluded_terms = false;
  BoxFilterRule box_filter = NoBoxFilter{};
  std::filesystem::path region;
  std::string metadata_key = "country";
  // Taxonomy order. Empty means: term-config keys or sorted region groups.
  std::vector<std::string> group_order;
  // Disparity pairs (a, b). Empty means every i < j pair of group_order.
  std::vector<std::pair<std::string, std::string>> group_pairs;

  // Concepts. No mapping path means the identity mapping.
  std::optional<std::filesystem::path> mapping;
  MappingStrictness mapping_strictness = MappingStrictness::kLenient;
  std::optional<std::vector<std::string>> concepts;

  // Metrics.
  std::vector<Metric> metrics = {Metric::kAp, Metric::kTpr, Metric::kFpr};
  std::size_t k = 5;
  double validation_fraction = 0.2;
  ThresholdScope threshold_scope = ThresholdScope::kPooled;

  // Sampling.
  SamplingMode sampling_mode = SamplingMode::kBaseline;
  PrevalenceRatio ratio{1, 5};
  std::uint64_t bootstraps = 250;
  std::uint64_t seed = 0;
  std::uint64_t min_per_group = 50;

  std::string evaluation_version = "custom";
  std::filesystem::path output;
  std::size_t report_top_n = 10;
  std::size_t jobs = 1;

  // Fully resolved configuration (preset applied, paths absolute). Output
  // directory and job count are left out: they do not affect results. This
  // is what the manifest records and hashes.
  nlohmann::json resolved;
};

// Names accepted by "preset": baseline, v1, v2, v3, reliable.
std::vector<std::string> PresetNames();
// Preset as a partial config document. Throws ConfigError for unknown names.
nlohmann::json PresetJson(const std::string& name);

struct ConfigOverrides {
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output;
  std::optional<std::size_t> jobs;
};

// The preset (from `overrides` or the document's "preset" key) is applied
// first, then the document on top of it as a JSON merge patch, then the
// overrides. Relative paths resolve against `base_dir`.
RunConfig ParseRunConfig(const nlohmann::json& document,
                         const std::filesystem::path& base_dir,
                         const ConfigOverrides& overrides = {});
RunConfig LoadRunConfig(const std::filesystem::path& path,
                        const ConfigOverrides& overrides = {});

}  // namespace disparity_audit

#endif  // DISPARITY_AUDIT_RUN_CONFIG_H_
