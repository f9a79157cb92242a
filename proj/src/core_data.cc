#include "disparity_audit/core_data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "disparity_audit/errors.h"
#include "disparity_audit/log.h"

namespace disparity_audit {
namespace {

using nlohmann::json;

std::string LineError(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

const json* OptionalField(const json& object, const char* key) {
  const auto it = object.find(key);
  if (it == object.end() || it->is_null()) return nullptr;
  return &*it;
}

std::string RequireString(const json& value, std::size_t line,
                          const std::string& what) {
  if (!value.is_string()) {
    throw DataError(LineError(line, what + " must be a string"));
  }
  return value.get<std::string>();
}

std::int64_t RequireInteger(const json& value, std::size_t line,
                            const std::string& what) {
  if (!value.is_number_integer()) {
    throw DataError(LineError(line, what + " must be an integer"));
  }
  return value.get<std::int64_t>();
}

const json& RequireArray(const json& value, std::size_t line,
                         const std::string& what) {
  if (!value.is_array()) {
    throw DataError(LineError(line, what + " must be an array"));
  }
  return value;
}

AnnotatedImage ParseAnnotationLine(const json& object, std::size_t line) {
  if (!object.is_object()) {
    throw DataError(LineError(line, "expected a JSON object"));
  }
  AnnotatedImage image;
  const json* id = OptionalField(object, "image_id");
  if (id == nullptr) throw DataError(LineError(line, "missing image_id"));
  image.image_id = RequireString(*id, line, "image_id");
  if (image.image_id.empty()) {
    throw DataError(LineError(line, "image_id is empty"));
  }
  if (const json* w = OptionalField(object, "width")) {
    image.width = RequireInteger(*w, line, "width");
  }
  if (const json* h = OptionalField(object, "height")) {
    image.height = RequireInteger(*h, line, "height");
  }
  if (image.width < 0 || image.height < 0) {
    throw DataError(LineError(line, "negative image dimensions"));
  }
  if (const json* boxes = OptionalField(object, "boxes")) {
    for (const json& b : RequireArray(*boxes, line, "boxes")) {
      if (!b.is_object()) {
        throw DataError(LineError(line, "box must be an object"));
      }
      BoxAnnotation box;
      const json* label = OptionalField(b, "label");
      if (label == nullptr) throw DataError(LineError(line, "box missing label"));
      box.raw_label = RequireString(*label, line, "box label");
      for (auto [key, field] : {std::pair{"x", &box.x}, std::pair{"y", &box.y},
                                std::pair{"w", &box.w}, std::pair{"h", &box.h}}) {
        const json* v = OptionalField(b, key);
        if (v == nullptr) {
          throw DataError(LineError(line, std::string("box missing ") + key));
        }
        *field = RequireInteger(*v, line, std::string("box ") + key);
      }
      if (box.x < 0 || box.y < 0 || box.w <= 0 || box.h <= 0) {
        throw DataError(LineError(
            line, "box '" + box.raw_label + "' has invalid geometry"));
      }
      image.boxes.push_back(std::move(box));
    }
  }
  if (!image.boxes.empty()) {
    if (image.width <= 0 || image.height <= 0) {
      throw DataError(LineError(line, "image '" + image.image_id +
                                          "' has boxes but no dimensions"));
    }
    for (const BoxAnnotation& box : image.boxes) {
      if (box.x + box.w > image.width || box.y + box.h > image.height) {
        throw DataError(LineError(line, "box '" + box.raw_label +
                                            "' lies outside image '" +
                                            image.image_id + "'"));
      }
    }
  }
  if (const json* captions = OptionalField(object, "captions")) {
    for (const json& c : RequireArray(*captions, line, "captions")) {
      image.captions.push_back(RequireString(c, line, "caption"));
    }
  }
  if (const json* labels = OptionalField(object, "labels")) {
    for (const json& l : RequireArray(*labels, line, "labels")) {
      image.direct_labels.insert(RequireString(l, line, "label"));
    }
  }
  if (const json* metadata = OptionalField(object, "metadata")) {
    if (!metadata->is_object()) {
      throw DataError(LineError(line, "metadata must be an object"));
    }
    for (const auto& [key, value] : metadata->items()) {
      image.metadata[key] = RequireString(value, line, "metadata." + key);
    }
  }
  return image;
}

bool SameExceptLabels(const AnnotatedImage& a, const AnnotatedImage& b) {
  return a.width == b.width && a.height == b.height && a.boxes == b.boxes &&
         a.captions == b.captions && a.metadata == b.metadata;
}

template <typename Fn>
void ForEachJsonLine(std::istream& in, Fn&& fn) {
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json object;
    try {
      object = json::parse(text);
    } catch (const json::parse_error& e) {
      throw DataError(LineError(line, std::string("malformed JSON: ") + e.what()));
    }
    fn(object, line);
  }
}

std::ifstream OpenInput(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

double AnnotatedImage::AreaFraction(const BoxAnnotation& box) const {
  return static_cast<double>(box.Area()) /
         (static_cast<double>(width) * static_cast<double>(height));
}

std::set<std::string> AnnotatedImage::AllLabels() const {
  std::set<std::string> labels = direct_labels;
  for (const BoxAnnotation& box : boxes) labels.insert(box.raw_label);
  return labels;
}

const char* ExclusionReasonName(ExclusionReason reason) {
  switch (reason) {
    case ExclusionReason::kMultipleGroups:
      return "MultipleGroups";
    case ExclusionReason::kNoGroupEvidence:
      return "NoGroupEvidence";
    case ExclusionReason::kBoxTooSmall:
      return "BoxTooSmall";
    case ExclusionReason::kMidSizeAmbiguous:
      return "MidSizeAmbiguous";
    case ExclusionReason::kNeutralTermPresent:
      return "NeutralTermPresent";
  }
  throw InvariantViolation("unknown exclusion reason");
}

ExclusionReason ParseExclusionReason(const std::string& name) {
  for (const ExclusionReason reason : kAllExclusionReasons) {
    if (name == ExclusionReasonName(reason)) return reason;
  }
  throw DataError("unknown exclusion reason '" + name + "'");
}

GroupAssignment GroupAssignment::Assigned(std::string image_id,
                                          std::string group_id) {
  GroupAssignment a;
  a.image_id_ = std::move(image_id);
  a.group_ = std::move(group_id);
  return a;
}

GroupAssignment GroupAssignment::Excluded(std::string image_id,
                                          ExclusionReason reason) {
  GroupAssignment a;
  a.image_id_ = std::move(image_id);
  a.reason_ = reason;
  return a;
}

std::string GroupAssignment::Describe() const {
  return is_assigned() ? *group_ : ExclusionReasonName(reason_);
}

Dataset::Dataset(std::vector<AnnotatedImage> images)
    : images_(std::move(images)) {
  for (std::size_t i = 0; i < images_.size(); ++i) {
    if (!index_.emplace(images_[i].image_id, i).second) {
      throw DataError("duplicate image_id '" + images_[i].image_id + "'");
    }
  }
}

const AnnotatedImage* Dataset::Find(const std::string& image_id) const {
  const auto it = index_.find(image_id);
  return it == index_.end() ? nullptr : &images_[it->second];
}

PredictionSet PredictionSet::FromRecords(std::vector<PredictionRecord> records,
                                         const Dataset& dataset) {
  std::vector<std::string> unresolved;
  std::map<std::string, PredictionRecord> merged;
  for (PredictionRecord& record : records) {
    if (dataset.Find(record.image_id) == nullptr) {
      unresolved.push_back(record.image_id);
      continue;
    }
    for (const auto& [concept_id, score] : record.scores) {
      if (!std::isfinite(score)) {
        throw DataError("non-finite score for image '" + record.image_id +
                        "', concept '" + concept_id + "'");
      }
    }
    auto [it, inserted] = merged.try_emplace(record.image_id, record);
    if (inserted) continue;
    for (const auto& [concept_id, score] : record.scores) {
      auto [slot, fresh] = it->second.scores.try_emplace(concept_id, score);
      if (!fresh && slot->second != score) {
        throw DataError("conflicting scores for image '" + record.image_id +
                        "', concept '" + concept_id + "'");
      }
    }
  }
  if (!unresolved.empty()) {
    std::sort(unresolved.begin(), unresolved.end());
    unresolved.erase(std::unique(unresolved.begin(), unresolved.end()),
                     unresolved.end());
    std::string list;
    constexpr std::size_t kListed = 10;
    for (std::size_t i = 0; i < unresolved.size() && i < kListed; ++i) {
      if (!list.empty()) list += ", ";
      list += unresolved[i];
    }
    if (unresolved.size() > kListed) {
      list += " (and " + std::to_string(unresolved.size() - kListed) + " more)";
    }
    throw DataError("predictions reference " + std::to_string(unresolved.size()) +
                    " unknown image ids: " + list);
  }
  PredictionSet set;
  for (auto& [id, record] : merged) {
    set.index_.emplace(id, set.records_.size());
    set.records_.push_back(std::move(record));
  }
  return set;
}

const PredictionRecord* PredictionSet::Find(const std::string& image_id) const {
  const auto it = index_.find(image_id);
  return it == index_.end() ? nullptr : &records_[it->second];
}

std::optional<double> PredictionSet::Score(const std::string& image_id,
                                           const std::string& concept_id) const {
  const PredictionRecord* record = Find(image_id);
  if (record == nullptr) return std::nullopt;
  const auto it = record->scores.find(concept_id);
  if (it == record->scores.end()) return std::nullopt;
  return it->second;
}

std::set<std::string> PredictionSet::Concepts() const {
  std::set<std::string> concepts;
  for (const PredictionRecord& record : records_) {
    for (const auto& [concept_id, score] : record.scores) {
      concepts.insert(concept_id);
    }
  }
  return concepts;
}

AnnotationFormat ParseAnnotationFormat(const std::string& name) {
  if (name == "jsonl" || name == "jsonlines") return AnnotationFormat::kJsonLines;
  throw ConfigError("unknown annotation format '" + name + "'");
}

std::vector<AnnotatedImage> ParseAnnotations(std::istream& in) {
  std::map<std::string, std::pair<AnnotatedImage, std::size_t>> by_id;
  ForEachJsonLine(in, [&](const json& object, std::size_t line) {
    AnnotatedImage image = ParseAnnotationLine(object, line);
    std::string id = image.image_id;
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      by_id.emplace(std::move(id), std::pair{std::move(image), line});
      return;
    }
    AnnotatedImage& existing = it->second.first;
    if (!SameExceptLabels(existing, image)) {
      throw DataError(LineError(
          line, "duplicate image_id '" + image.image_id +
                    "' conflicts with line " +
                    std::to_string(it->second.second)));
    }
    existing.direct_labels.insert(image.direct_labels.begin(),
                                  image.direct_labels.end());
  });
  std::vector<AnnotatedImage> images;
  images.reserve(by_id.size());
  for (auto& [id, entry] : by_id) images.push_back(std::move(entry.first));
  return images;
}

std::vector<AnnotatedImage> LoadAnnotations(const std::filesystem::path& path,
                                            AnnotationFormat format) {
  switch (format) {
    case AnnotationFormat::kJsonLines: {
      std::ifstream in = OpenInput(path);
      try {
        return ParseAnnotations(in);
      } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
      }
    }
  }
  throw ConfigError("unsupported annotation format");
}

std::vector<PredictionRecord> ParsePredictionRecords(std::istream& in) {
  std::vector<PredictionRecord> records;
  ForEachJsonLine(in, [&](const json& object, std::size_t line) {
    if (!object.is_object()) {
      throw DataError(LineError(line, "expected a JSON object"));
    }
    PredictionRecord record;
    const json* id = OptionalField(object, "image_id");
    if (id == nullptr) throw DataError(LineError(line, "missing image_id"));
    record.image_id = RequireString(*id, line, "image_id");
    const json* scores = OptionalField(object, "scores");
    if (scores == nullptr || !scores->is_object()) {
      throw DataError(LineError(line, "scores must be an object"));
    }
    for (const auto& [concept_id, value] : scores->items()) {
      if (!value.is_number()) {
        throw DataError(LineError(line, "score for '" + concept_id +
                                            "' is not a number"));
      }
      const double score = value.get<double>();
      if (!std::isfinite(score)) {
        throw DataError(LineError(line, "non-finite score for '" +
                                            concept_id + "'"));
      }
      record.scores[concept_id] = score;
    }
    records.push_back(std::move(record));
  });
  return records;
}

PredictionSet LoadPredictions(const std::filesystem::path& path,
                              const Dataset& dataset) {
  std::ifstream in = OpenInput(path);
  try {
    return PredictionSet::FromRecords(ParsePredictionRecords(in), dataset);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

nlohmann::ordered_json AnnotationToJson(const AnnotatedImage& image) {
  nlohmann::ordered_json out;
  out["image_id"] = image.image_id;
  out["width"] = image.width;
  out["height"] = image.height;
  out["boxes"] = nlohmann::ordered_json::array();
  for (const BoxAnnotation& box : image.boxes) {
    out["boxes"].push_back({{"label", box.raw_label},
                            {"x", box.x},
                            {"y", box.y},
                            {"w", box.w},
                            {"h", box.h}});
  }
  out["captions"] = image.captions;
  out["labels"] = image.direct_labels;
  out["metadata"] = nlohmann::ordered_json::object();
  for (const auto& [key, value] : image.metadata) out["metadata"][key] = value;
  return out;
}

nlohmann::ordered_json PredictionToJson(const PredictionRecord& record) {
  nlohmann::ordered_json out;
  out["image_id"] = record.image_id;
  out["scores"] = nlohmann::ordered_json::object();
  for (const auto& [concept_id, score] : record.scores) {
    out["scores"][concept_id] = score;
  }
  return out;
}

nlohmann::ordered_json ValidationReport::ToJson() const {
  nlohmann::ordered_json out;
  out["images_without_labels"] = images_without_labels;
  out["unscored"] = nlohmann::ordered_json::object();
  for (const auto& [concept_id, ids] : unscored) out["unscored"][concept_id] = ids;
  out["zero_positive_concepts"] = zero_positive_concepts;
  return out;
}

ValidationReport ValidateDataset(const Dataset& dataset,
                                 const PredictionSet& predictions) {
  ValidationReport report;
  const std::set<std::string> concepts = predictions.Concepts();
  std::set<std::string> with_positives;
  for (const AnnotatedImage& image : dataset.images()) {
    if (!image.HasLabels()) report.images_without_labels.push_back(image.image_id);
    for (const std::string& label : image.AllLabels()) {
      if (concepts.contains(label)) with_positives.insert(label);
    }
    const PredictionRecord* record = predictions.Find(image.image_id);
    for (const std::string& concept_id : concepts) {
      if (record == nullptr || !record->scores.contains(concept_id)) {
        report.unscored[concept_id].push_back(image.image_id);
      }
    }
  }
  for (const std::string& concept_id : concepts) {
    if (!with_positives.contains(concept_id)) {
      report.zero_positive_concepts.push_back(concept_id);
    }
  }
  std::sort(report.images_without_labels.begin(),
            report.images_without_labels.end());
  for (auto& [concept_id, ids] : report.unscored) std::sort(ids.begin(), ids.end());
  if (!report.empty()) {
    log::Debug("validation: " + std::to_string(report.images_without_labels.size()) +
               " unlabeled images, " + std::to_string(report.unscored.size()) +
               " concepts with coverage gaps");
  }
  return report;
}

}  // namespace disparity_audit
