#ifndef DISPARITY_AUDIT_CORE_DATA_H_
#define DISPARITY_AUDIT_CORE_DATA_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace disparity_audit {

struct BoxAnnotation {
  std::string raw_label;
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t w = 0;
  std::int64_t h = 0;

  std::int64_t Area() const { return w * h; }

  bool operator==(const BoxAnnotation&) const = default;
};

struct AnnotatedImage {
  std::string image_id;
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<BoxAnnotation> boxes;
  std::vector<std::string> captions;
  // Set semantics: duplicates collapse on load.
  std::set<std::string> direct_labels;
  std::map<std::string, std::string> metadata;

  // Fraction of the image covered by `box`. Requires positive dimensions.
  double AreaFraction(const BoxAnnotation& box) const;

  // Direct labels plus box labels: everything the image is annotated with.
  std::set<std::string> AllLabels() const;

  bool HasLabels() const { return !direct_labels.empty() || !boxes.empty(); }

  bool operator==(const AnnotatedImage&) const = default;
};

struct PredictionRecord {
  std::string image_id;
  std::map<std::string, double> scores;

  bool operator==(const PredictionRecord&) const = default;
};

enum class ExclusionReason {
  kMultipleGroups,
  kNoGroupEvidence,
  kBoxTooSmall,
  kMidSizeAmbiguous,
  kNeutralTermPresent,
};

inline constexpr ExclusionReason kAllExclusionReasons[] = {
    ExclusionReason::kMultipleGroups, ExclusionReason::kNoGroupEvidence,
    ExclusionReason::kBoxTooSmall, ExclusionReason::kMidSizeAmbiguous,
    ExclusionReason::kNeutralTermPresent};

const char* ExclusionReasonName(ExclusionReason reason);
ExclusionReason ParseExclusionReason(const std::string& name);

// Outcome of group operationalization for a single image: either a group id
// or an exclusion reason, never both.
class GroupAssignment {
 public:
  static GroupAssignment Assigned(std::string image_id, std::string group_id);
  static GroupAssignment Excluded(std::string image_id, ExclusionReason reason);

  const std::string& image_id() const { return image_id_; }
  bool is_assigned() const { return group_.has_value(); }
  // Requires is_assigned().
  const std::string& group() const { return *group_; }
  // Requires !is_assigned().
  ExclusionReason reason() const { return reason_; }
  // Group id or reason name; the `group_or_reason` CSV column.
  std::string Describe() const;

  bool operator==(const GroupAssignment&) const = default;

 private:
  GroupAssignment() = default;

  std::string image_id_;
  std::optional<std::string> group_;
  ExclusionReason reason_ = ExclusionReason::kNoGroupEvidence;
};

// Images keyed by id. Immutable once built.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<AnnotatedImage> images);

  const std::vector<AnnotatedImage>& images() const { return images_; }
  const AnnotatedImage* Find(const std::string& image_id) const;
  std::size_t size() const { return images_.size(); }

 private:
  std::vector<AnnotatedImage> images_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Predictions keyed by image id. Every id resolves into the Dataset it was
// validated against and every score is finite.
class PredictionSet {
 public:
  PredictionSet() = default;

  // Validates referential integrity and finiteness. Records for the same
  // image are merged; a concept scored twice with different values is an
  // error.
  static PredictionSet FromRecords(std::vector<PredictionRecord> records,
                                   const Dataset& dataset);

  const std::vector<PredictionRecord>& records() const { return records_; }
  const PredictionRecord* Find(const std::string& image_id) const;
  std::optional<double> Score(const std::string& image_id,
                              const std::string& concept_id) const;
  // Every concept scored on at least one image, sorted.
  std::set<std::string> Concepts() const;

 private:
  std::vector<PredictionRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class AnnotationFormat { kJsonLines };

AnnotationFormat ParseAnnotationFormat(const std::string& name);

// Reads one AnnotatedImage per JSON line. Records sharing an image_id are
// merged when they agree on everything except labels (label lists are
// unioned); any other disagreement is an error. Output is sorted by image_id.
std::vector<AnnotatedImage> ParseAnnotations(std::istream& in);
std::vector<AnnotatedImage> LoadAnnotations(
    const std::filesystem::path& path,
    AnnotationFormat format = AnnotationFormat::kJsonLines);

std::vector<PredictionRecord> ParsePredictionRecords(std::istream& in);
PredictionSet LoadPredictions(const std::filesystem::path& path,
                              const Dataset& dataset);

nlohmann::ordered_json AnnotationToJson(const AnnotatedImage& image);
nlohmann::ordered_json PredictionToJson(const PredictionRecord& record);

struct ValidationReport {
  std::vector<std::string> images_without_labels;
  // concept -> image ids lacking a score for it.
  std::map<std::string, std::vector<std::string>> unscored;
  std::vector<std::string> zero_positive_concepts;

  bool empty() const {
    return images_without_labels.empty() && unscored.empty() &&
           zero_positive_concepts.empty();
  }
  nlohmann::ordered_json ToJson() const;
};

// Reporting only. A concept is anything scored by at least one prediction;
// it has positives when some image carries it as a direct or box label.
ValidationReport ValidateDataset(const Dataset& dataset,
                                 const PredictionSet& predictions);

}  // namespace disparity_audit

#endif  // DISPARITY_AUDIT_CORE_DATA_H_
