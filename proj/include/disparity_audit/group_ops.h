#ifndef DISPARITY_AUDIT_GROUP_OPS_H_
#define DISPARITY_AUDIT_GROUP_OPS_H_

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "disparity_audit/core_data.h"
#include "json.hpp"

namespace disparity_audit {

// Group taxonomy expressed as proxy terms (synset keys or caption words).
struct GroupTermConfig {
  std::map<std::string, std::set<std::string>> groups;
  // Per group, terms that never count as evidence in this configuration.
  std::map<std::string, std::set<std::string>> excluded_terms;
  // Terms whose presence excludes the image outright ("person", "people").
  std::set<std::string> neutral_exclusion_terms;

  // Throws ConfigError unless term sets are pairwise disjoint and every
  // excluded term belongs to its group.
  void Validate() const;

  // Group whose active (non-excluded) term set contains `term`, if any.
  const std::string* ActiveGroupOf(const std::string& term) const;

  // Same taxonomy with excluded_terms cleared.
  GroupTermConfig WithoutExclusions() const;

  static GroupTermConfig FromJson(const nlohmann::json& json);
  static GroupTermConfig Load(const std::filesystem::path& path);
};

// Gender term lists for box-annotated (synset) and caption datasets. The
// excluded_terms are the parent/child terms that frequently tag animals; they
// are populated but only applied when a configuration asks for them.
GroupTermConfig BuiltinSynsetGenderTerms();
GroupTermConfig BuiltinCaptionGenderTerms();

// How a box is measured against MinAreaPixels.
enum class BoxSizeMeasure {
  kArea,         // w * h >= threshold
  kLongestSide,  // max(w, h) >= threshold
};

struct NoBoxFilter {
  bool operator==(const NoBoxFilter&) const = default;
};

struct MinAreaPixels {
  double threshold = 600.0;
  BoxSizeMeasure measure = BoxSizeMeasure::kArea;
  bool operator==(const MinAreaPixels&) const = default;
};

// Boxes covering at least `use_min` of the image count as evidence; boxes
// below `ignore_max` are ignored; anything in between excludes the image.
struct RelativeArea {
  double use_min = 0.05;
  double ignore_max = 0.02;
  bool operator==(const RelativeArea&) const = default;
};

using BoxFilterRule = std::variant<NoBoxFilter, MinAreaPixels, RelativeArea>;

// Throws ConfigError when parameters violate their ranges.
void ValidateBoxFilter(const BoxFilterRule& filter);
// {"type": "none"|"min_area_pixels"|"relative_area", ...}
BoxFilterRule BoxFilterFromJson(const nlohmann::json& json);
nlohmann::ordered_json BoxFilterToJson(const BoxFilterRule& filter);

// Country (or other metadata value) to group id.
struct RegionGroupConfig {
  std::map<std::string, std::string> country_to_group;

  static RegionGroupConfig FromJson(const nlohmann::json& json);
  static RegionGroupConfig Load(const std::filesystem::path& path);
};

// Exclusion precedence: NeutralTermPresent, then MultipleGroups, then
// MidSizeAmbiguous. An image whose only group-term boxes were removed by the
// size filter is BoxTooSmall rather than NoGroupEvidence.
GroupAssignment AssignGroupFromBoxes(const AnnotatedImage& image,
                                     const GroupTermConfig& terms,
                                     const BoxFilterRule& filter);

// Lowercased alphanumeric runs of `text`. Non-ASCII letters and digits are
// recognized through the C.UTF-8 locale when available.
std::vector<std::string> TokenizeCaption(const std::string& text);

GroupAssignment AssignGroupFromCaptions(const AnnotatedImage& image,
                                        const GroupTermConfig& terms);

// Throws DataError when the metadata value has no configured group. Images
// without the key are Excluded(NoGroupEvidence).
GroupAssignment AssignGroupFromMetadata(const AnnotatedImage& image,
                                        const RegionGroupConfig& config,
                                        const std::string& key);

struct AssignmentSummary {
  std::map<std::string, std::size_t> per_group;
  std::map<ExclusionReason, std::size_t> per_reason;
  std::size_t total = 0;

  std::size_t assigned() const;
  std::size_t excluded() const;
  nlohmann::ordered_json ToJson() const;
  bool operator==(const AssignmentSummary&) const = default;
};

// Every exclusion reason, and every group in `taxonomy`, is present even
// when its count is zero.
AssignmentSummary SummarizeAssignments(
    std::span<const GroupAssignment> assignments,
    std::span<const std::string> taxonomy = {});

// CSV with header image_id,outcome,group_or_reason.
void WriteAssignmentsCsv(std::ostream& out,
                         std::span<const GroupAssignment> assignments);
std::vector<GroupAssignment> ReadAssignmentsCsv(std::istream& in);

}  // namespace disparity_audit

#endif  // DISPARITY_AUDIT_GROUP_OPS_H_
