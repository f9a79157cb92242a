#include "disparity_audit/concept_mapping.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>

#include "disparity_audit/errors.h"
#include "disparity_audit/log.h"

namespace disparity_audit {
namespace {

std::string_view Trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

}  // namespace

ConceptId::ConceptId(std::string_view raw) : key_(Trim(raw)) {
  if (key_.empty()) throw DataError("empty concept label");
}

std::string ConceptId::Display() const {
  static const std::regex kSynsetSuffix(R"(\.[a-z]\.\d+$)");
  std::string display = std::regex_replace(key_, kSynsetSuffix, "");
  std::replace(display.begin(), display.end(), '_', ' ');
  return display;
}

ConceptId CanonicalizeLabel(std::string_view raw) { return ConceptId(raw); }

ClassMapping ClassMapping::Identity(std::string name) {
  ClassMapping mapping;
  mapping.name_ = std::move(name);
  mapping.identity_ = true;
  return mapping;
}

ClassMapping::ClassMapping(std::string name,
                           std::map<std::string, std::vector<ConceptId>> table,
                           std::optional<std::set<ConceptId>> whitelist)
    : name_(std::move(name)) {
  for (auto& [label, classes] : table) {
    if (classes.empty()) {
      throw ConfigError("mapping '" + name_ + "': label '" + label +
                        "' maps to no class");
    }
    std::vector<ConceptId> kept;
    for (ConceptId& c : classes) {
      if (whitelist && !whitelist->contains(c)) {
        log::Warn("mapping '" + name_ + "': dropping class '" + c.key() +
                  "' not predicted by the model");
        continue;
      }
      if (std::find(kept.begin(), kept.end(), c) == kept.end()) {
        kept.push_back(std::move(c));
      }
    }
    if (kept.empty()) {
      dropped_labels_.insert(label);
    } else {
      table_.emplace(label, std::move(kept));
    }
  }
}

ClassMapping ClassMapping::FromJson(const nlohmann::json& json) {
  if (!json.is_object()) throw ConfigError("mapping file must be a JSON object");
  const std::string name = json.value("name", std::string("mapping"));
  const auto map = json.find("map");
  if (map == json.end() || !map->is_object()) {
    throw ConfigError("mapping '" + name + "' needs a 'map' object");
  }
  std::map<std::string, std::vector<ConceptId>> table;
  for (const auto& [label, classes] : map->items()) {
    if (!classes.is_array()) {
      throw ConfigError("mapping for '" + label + "' must be an array");
    }
    auto& out = table[label];
    for (const auto& c : classes) {
      if (!c.is_string()) {
        throw ConfigError("mapping for '" + label + "' must contain strings");
      }
      try {
        out.push_back(CanonicalizeLabel(c.get<std::string>()));
      } catch (const DataError& e) {
        throw ConfigError("mapping for '" + label + "': " + e.what());
      }
    }
  }
  std::optional<std::set<ConceptId>> whitelist;
  if (const auto w = json.find("model_class_whitelist"); w != json.end()) {
    if (!w->is_array()) throw ConfigError("model_class_whitelist must be an array");
    whitelist.emplace();
    for (const auto& c : *w) {
      if (!c.is_string()) {
        throw ConfigError("model_class_whitelist must contain strings");
      }
      whitelist->insert(CanonicalizeLabel(c.get<std::string>()));
    }
  }
  return ClassMapping(name, std::move(table), std::move(whitelist));
}

ClassMapping ClassMapping::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return FromJson(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

const std::vector<ConceptId>* ClassMapping::Lookup(const std::string& label) const {
  const auto it = table_.find(label);
  return it == table_.end() ? nullptr : &it->second;
}

MappedLabels MapToModelClasses(const std::set<std::string>& labels,
                               const ClassMapping& mapping,
                               MappingStrictness strictness) {
  MappedLabels out;
  for (const std::string& label : labels) {
    if (mapping.is_identity()) {
      out.concepts.insert(CanonicalizeLabel(label));
      continue;
    }
    if (const auto* classes = mapping.Lookup(label)) {
      out.concepts.insert(classes->begin(), classes->end());
      continue;
    }
    if (mapping.dropped_labels().contains(label)) continue;
    if (strictness == MappingStrictness::kStrict) {
      throw DataError("label '" + label + "' is not in mapping '" +
                      mapping.name() + "'");
    }
    out.unmapped.push_back(label);
  }
  return out;
}

std::vector<ScoredRow> GroupPool::AllRows() const {
  std::vector<ScoredRow> rows = positives;
  rows.insert(rows.end(), negatives.begin(), negatives.end());
  std::sort(rows.begin(), rows.end(), [](const ScoredRow& a, const ScoredRow& b) {
    return a.image_id < b.image_id;
  });
  return rows;
}

const GroupPool& ConceptEvalTable::Pool(const std::string& group) const {
  const auto it = groups.find(group);
  if (it == groups.end()) {
    throw InvariantViolation("concept '" + concept_id.key() +
                             "' has no pool for group '" + group + "'");
  }
  return it->second;
}

std::map<ConceptId, ConceptEvalTable> BuildConceptTables(
    std::span<const GroupAssignment> assignments, const TargetSets& targets,
    const PredictionSet& predictions, const std::set<ConceptId>& concepts,
    std::span<const std::string> taxonomy) {
  std::vector<const GroupAssignment*> assigned;
  for (const GroupAssignment& a : assignments) {
    if (!a.is_assigned()) continue;
    if (std::find(taxonomy.begin(), taxonomy.end(), a.group()) == taxonomy.end()) {
      throw InvariantViolation("image '" + a.image_id() +
                               "' assigned to unknown group '" + a.group() + "'");
    }
    assigned.push_back(&a);
  }
  std::sort(assigned.begin(), assigned.end(),
            [](const GroupAssignment* a, const GroupAssignment* b) {
              return a->image_id() < b->image_id();
            });

  static const std::set<ConceptId> kNoTargets;
  std::map<ConceptId, ConceptEvalTable> tables;
  for (const ConceptId& concept_id : concepts) {
    ConceptEvalTable table;
    table.concept_id = concept_id;
    for (const std::string& group : taxonomy) table.groups[group];
    std::size_t scored = 0;
    for (const GroupAssignment* a : assigned) {
      const std::optional<double> score =
          predictions.Score(a->image_id(), concept_id.key());
      if (!score) {
        table.unscored_images.push_back(a->image_id());
        continue;
      }
      const auto t = targets.find(a->image_id());
      const std::set<ConceptId>& target = t == targets.end() ? kNoTargets : t->second;
      ScoredRow row{a->image_id(), *score, target.contains(concept_id)};
      GroupPool& pool = table.groups[a->group()];
      (row.positive ? pool.positives : pool.negatives).push_back(std::move(row));
      ++scored;
    }
    if (scored == 0) {
      throw DataError("concept '" + concept_id.key() + "' has no scored images");
    }
    if (!table.unscored_images.empty()) {
      log::Warn("concept '" + concept_id.key() + "': " +
                std::to_string(table.unscored_images.size()) +
                " assigned images without a score were omitted");
    }
    tables.emplace(concept_id, std::move(table));
  }
  return tables;
}

}  // namespace disparity_audit
