#ifndef DISPARITY_AUDIT_CONCEPT_MAPPING_H_
#define DISPARITY_AUDIT_CONCEPT_MAPPING_H_

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "disparity_audit/core_data.h"
#include "json.hpp"

namespace disparity_audit {

// Canonical concept key in model-class space ("necktie.n.01", "bookcase").
class ConceptId {
 public:
  ConceptId() = default;
  // Throws DataError on an empty (or all-whitespace) string.
  explicit ConceptId(std::string_view raw);

  const std::string& key() const { return key_; }
  // Synset part-of-speech suffix stripped, underscores turned into spaces:
  // "male_child.n.01" -> "male child".
  std::string Display() const;

  auto operator<=>(const ConceptId&) const = default;

 private:
  std::string key_;
};

ConceptId CanonicalizeLabel(std::string_view raw);

// Dataset label -> model classes.
class ClassMapping {
 public:
  // Dataset labels map to themselves. Used for zero-shot models.
  static ClassMapping Identity(std::string name = "identity");

  // Classes outside `model_class_whitelist` (when given) are dropped; labels
  // left with no class are recorded in dropped_labels() and map to nothing.
  static ClassMapping FromJson(const nlohmann::json& json);
  static ClassMapping Load(const std::filesystem::path& path);

  ClassMapping(std::string name,
               std::map<std::string, std::vector<ConceptId>> table,
               std::optional<std::set<ConceptId>> whitelist = std::nullopt);

  const std::string& name() const { return name_; }
  bool is_identity() const { return identity_; }
  const std::map<std::string, std::vector<ConceptId>>& table() const {
    return table_;
  }
  const std::set<std::string>& dropped_labels() const { return dropped_labels_; }
  const std::vector<ConceptId>* Lookup(const std::string& label) const;

 private:
  ClassMapping() = default;

  std::string name_;
  bool identity_ = false;
  std::map<std::string, std::vector<ConceptId>> table_;
  std::set<std::string> dropped_labels_;
};

enum class MappingStrictness { kStrict, kLenient };

struct MappedLabels {
  std::set<ConceptId> concepts;
  // Labels with no entry in the mapping (lenient mode only).
  std::vector<std::string> unmapped;
};

// Union of the mapped class lists. In strict mode an unmapped label throws
// DataError; labels whose classes were all dropped as incompatible are
// skipped in both modes.
MappedLabels MapToModelClasses(const std::set<std::string>& labels,
                               const ClassMapping& mapping,
                               MappingStrictness strictness);

struct ScoredRow {
  std::string image_id;
  double score = 0.0;
  bool positive = false;

  bool operator==(const ScoredRow&) const = default;
};

// Rows for one (concept, group), sorted by image_id.
struct GroupPool {
  std::vector<ScoredRow> positives;
  std::vector<ScoredRow> negatives;

  std::size_t size() const { return positives.size() + negatives.size(); }
  std::vector<ScoredRow> AllRows() const;
};

struct ConceptEvalTable {
  ConceptId concept_id;
  std::map<std::string, GroupPool> groups;
  // Assigned images omitted because they carry no score for this concept.
  std::vector<std::string> unscored_images;

  const GroupPool& Pool(const std::string& group) const;
};

// image_id -> target concepts.
using TargetSets = std::map<std::string, std::set<ConceptId>>;

// Builds one table per concept over Assigned images. Every group in
// `taxonomy` gets a pool (possibly empty); assignments naming other groups
// are an InvariantViolation. A concept with no scored assigned image throws
// DataError.
std::map<ConceptId, ConceptEvalTable> BuildConceptTables(
    std::span<const GroupAssignment> assignments, const TargetSets& targets,
    const PredictionSet& predictions, const std::set<ConceptId>& concepts,
    std::span<const std::string> taxonomy);

}  // namespace disparity_audit

#endif  // DISPARITY_AUDIT_CONCEPT_MAPPING_H_
