#include "disparity_audit/group_ops.h"

#include <algorithm>
#include <fstream>
#include <locale>
#include <ostream>

#include "disparity_audit/csv.h"
#include "disparity_audit/errors.h"

namespace disparity_audit {
namespace {

using nlohmann::json;

json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
}

std::set<std::string> StringSet(const json& value, const std::string& what) {
  if (!value.is_array()) throw ConfigError(what + " must be an array of strings");
  std::set<std::string> out;
  for (const json& item : value) {
    if (!item.is_string()) throw ConfigError(what + " must contain strings");
    out.insert(item.get<std::string>());
  }
  return out;
}

GroupAssignment SingleGroupRule(const std::string& image_id,
                                const std::set<std::string>& evidence) {
  if (evidence.size() > 1) {
    return GroupAssignment::Excluded(image_id, ExclusionReason::kMultipleGroups);
  }
  if (evidence.size() == 1) {
    return GroupAssignment::Assigned(image_id, *evidence.begin());
  }
  return GroupAssignment::Excluded(image_id, ExclusionReason::kNoGroupEvidence);
}

enum class BoxVerdict { kEvidence, kTooSmall, kMidSize };

BoxVerdict JudgeBox(const AnnotatedImage& image, const BoxAnnotation& box,
                    const BoxFilterRule& filter) {
  return std::visit(
      [&](const auto& rule) -> BoxVerdict {
        using Rule = std::decay_t<decltype(rule)>;
        if constexpr (std::is_same_v<Rule, NoBoxFilter>) {
          return BoxVerdict::kEvidence;
        } else if constexpr (std::is_same_v<Rule, MinAreaPixels>) {
          const double size =
              rule.measure == BoxSizeMeasure::kArea
                  ? static_cast<double>(box.Area())
                  : static_cast<double>(std::max(box.w, box.h));
          return size >= rule.threshold ? BoxVerdict::kEvidence
                                        : BoxVerdict::kTooSmall;
        } else {
          const double fraction = image.AreaFraction(box);
          if (fraction >= rule.use_min) return BoxVerdict::kEvidence;
          if (fraction < rule.ignore_max) return BoxVerdict::kTooSmall;
          return BoxVerdict::kMidSize;
        }
      },
      filter);
}

// UTF-8 decoding that maps malformed sequences to U+FFFD.
std::u32string DecodeUtf8(const std::string& text) {
  std::u32string out;
  for (std::size_t i = 0; i < text.size();) {
    const auto lead = static_cast<unsigned char>(text[i]);
    int length = 1;
    char32_t cp = lead;
    if (lead >= 0xF0 && lead < 0xF8) {
      length = 4;
      cp = lead & 0x07;
    } else if (lead >= 0xE0) {
      length = 3;
      cp = lead & 0x0F;
    } else if (lead >= 0xC0) {
      length = 2;
      cp = lead & 0x1F;
    } else if (lead >= 0x80) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    if (lead >= 0xF8 || i + length > text.size()) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    bool valid = true;
    for (int k = 1; k < length; ++k) {
      const auto next = static_cast<unsigned char>(text[i + k]);
      if ((next & 0xC0) != 0x80) {
        valid = false;
        break;
      }
      cp = (cp << 6) | (next & 0x3F);
    }
    if (!valid) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += length;
  }
  return out;
}

void AppendUtf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

const std::locale& UnicodeLocale() {
  static const std::locale locale = [] {
    try {
      return std::locale("C.UTF-8");
    } catch (const std::runtime_error&) {
      return std::locale::classic();
    }
  }();
  return locale;
}

}  // namespace

void GroupTermConfig::Validate() const {
  std::map<std::string, std::string> owner;
  for (const auto& [group, terms] : groups) {
    for (const std::string& term : terms) {
      auto [it, inserted] = owner.emplace(term, group);
      if (!inserted) {
        throw ConfigError("term '" + term + "' belongs to both '" + it->second +
                          "' and '" + group + "'");
      }
    }
  }
  for (const auto& [group, terms] : excluded_terms) {
    const auto it = groups.find(group);
    if (it == groups.end()) {
      throw ConfigError("excluded_terms names unknown group '" + group + "'");
    }
    for (const std::string& term : terms) {
      if (!it->second.contains(term)) {
        throw ConfigError("excluded term '" + term + "' is not a term of '" +
                          group + "'");
      }
    }
  }
}

const std::string* GroupTermConfig::ActiveGroupOf(const std::string& term) const {
  for (const auto& [group, terms] : groups) {
    if (!terms.contains(term)) continue;
    const auto excluded = excluded_terms.find(group);
    if (excluded != excluded_terms.end() && excluded->second.contains(term)) {
      return nullptr;
    }
    return &group;
  }
  return nullptr;
}

GroupTermConfig GroupTermConfig::WithoutExclusions() const {
  GroupTermConfig copy = *this;
  copy.excluded_terms.clear();
  return copy;
}

GroupTermConfig GroupTermConfig::FromJson(const json& value) {
  if (!value.is_object()) throw ConfigError("terms config must be an object");
  GroupTermConfig config;
  const auto groups = value.find("groups");
  if (groups == value.end() || !groups->is_object() || groups->empty()) {
    throw ConfigError("terms config needs a non-empty 'groups' object");
  }
  for (const auto& [group, terms] : groups->items()) {
    config.groups[group] = StringSet(terms, "groups." + group);
  }
  if (const auto excluded = value.find("excluded_terms"); excluded != value.end()) {
    if (!excluded->is_object()) throw ConfigError("excluded_terms must be an object");
    for (const auto& [group, terms] : excluded->items()) {
      config.excluded_terms[group] = StringSet(terms, "excluded_terms." + group);
    }
  }
  if (const auto neutral = value.find("neutral_exclusion_terms");
      neutral != value.end()) {
    config.neutral_exclusion_terms = StringSet(*neutral, "neutral_exclusion_terms");
  }
  config.Validate();
  return config;
}

GroupTermConfig GroupTermConfig::Load(const std::filesystem::path& path) {
  try {
    return FromJson(ReadJsonFile(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

GroupTermConfig BuiltinSynsetGenderTerms() {
  GroupTermConfig config;
  config.groups["man"] = {
      "man.n.01",     "male_child.n.01", "guy.n.01",        "male.n.01",
      "groom.n.01",   "husband.n.01",    "grandfather.n.01", "father.n.01",
      "son.n.01",     "boyfriend.n.01",  "brother.n.01",    "grandson.n.01",
      "groomsman.n.01", "ex-husband.n.01", "uncle.n.01",    "godfather.n.01"};
  config.groups["woman"] = {
      "maid.n.02",        "woman.n.01",       "girl.n.01",
      "lady.n.01",        "female.n.01",      "mother.n.01",
      "lass.n.01",        "ma.n.01",          "widow.n.01",
      "bride.n.01",       "daughter.n.01",    "grandma.n.01",
      "granddaughter.n.01", "bridesmaid.n.01", "girlfriend.n.01",
      "sister.n.01",      "wife.n.01",        "female_child.n.01",
      "white_woman.n.01", "dame.n.01",        "matriarch.n.01",
      "mother_figure.n.01", "dame.n.02",      "great-aunt.n.01",
      "donna.n.01"};
  config.excluded_terms["man"] = {"father.n.01", "son.n.01"};
  config.excluded_terms["woman"] = {"mother.n.01", "ma.n.01", "daughter.n.01",
                                    "mother_figure.n.01"};
  config.neutral_exclusion_terms = {"person.n.01", "people.n.01"};
  return config;
}

GroupTermConfig BuiltinCaptionGenderTerms() {
  GroupTermConfig config;
  config.groups["man"] = {"man",     "mans", "men", "boy", "boys", "father",
                          "fathers", "son",  "sons", "he", "his",  "him"};
  config.groups["woman"] = {"woman",  "womans",  "women",    "girl",   "girls",
                            "lady",   "ladies",  "mother",   "mothers", "daughter",
                            "daughters", "she",  "her",      "hers"};
  config.excluded_terms["man"] = {"father", "fathers", "son", "sons"};
  config.excluded_terms["woman"] = {"mother", "mothers", "daughter", "daughters"};
  config.neutral_exclusion_terms = {"person", "people"};
  return config;
}

void ValidateBoxFilter(const BoxFilterRule& filter) {
  if (const auto* min_area = std::get_if<MinAreaPixels>(&filter)) {
    if (!(min_area->threshold > 0)) {
      throw ConfigError("min_area_pixels threshold must be positive");
    }
  } else if (const auto* relative = std::get_if<RelativeArea>(&filter)) {
    if (!(0 < relative->ignore_max && relative->ignore_max < relative->use_min &&
          relative->use_min <= 1)) {
      throw ConfigError("relative_area requires 0 < ignore_max < use_min <= 1");
    }
  }
}

BoxFilterRule BoxFilterFromJson(const json& value) {
  if (value.is_null()) return NoBoxFilter{};
  if (!value.is_object() || !value.contains("type") || !value["type"].is_string()) {
    throw ConfigError("box_filter must be an object with a string 'type'");
  }
  const std::string type = value["type"].get<std::string>();
  BoxFilterRule rule;
  if (type == "none") {
    rule = NoBoxFilter{};
  } else if (type == "min_area_pixels") {
    MinAreaPixels min_area;
    min_area.threshold = value.value("threshold", min_area.threshold);
    const std::string measure = value.value("measure", std::string("area"));
    if (measure == "area") {
      min_area.measure = BoxSizeMeasure::kArea;
    } else if (measure == "longest_side") {
      min_area.measure = BoxSizeMeasure::kLongestSide;
    } else {
      throw ConfigError("unknown min_area_pixels measure '" + measure + "'");
    }
    rule = min_area;
  } else if (type == "relative_area") {
    RelativeArea relative;
    relative.use_min = value.value("use_min", relative.use_min);
    relative.ignore_max = value.value("ignore_max", relative.ignore_max);
    rule = relative;
  } else {
    throw ConfigError("unknown box filter variant '" + type + "'");
  }
  ValidateBoxFilter(rule);
  return rule;
}

nlohmann::ordered_json BoxFilterToJson(const BoxFilterRule& filter) {
  nlohmann::ordered_json out;
  std::visit(
      [&](const auto& rule) {
        using Rule = std::decay_t<decltype(rule)>;
        if constexpr (std::is_same_v<Rule, NoBoxFilter>) {
          out["type"] = "none";
        } else if constexpr (std::is_same_v<Rule, MinAreaPixels>) {
          out["type"] = "min_area_pixels";
          out["threshold"] = rule.threshold;
          out["measure"] =
              rule.measure == BoxSizeMeasure::kArea ? "area" : "longest_side";
        } else {
          out["type"] = "relative_area";
          out["use_min"] = rule.use_min;
          out["ignore_max"] = rule.ignore_max;
        }
      },
      filter);
  return out;
}

RegionGroupConfig RegionGroupConfig::FromJson(const json& value) {
  const auto map = value.find("country_to_group");
  if (!value.is_object() || map == value.end() || !map->is_object()) {
    throw ConfigError("region config needs a 'country_to_group' object");
  }
  RegionGroupConfig config;
  for (const auto& [country, group] : map->items()) {
    if (!group.is_string()) {
      throw ConfigError("group for '" + country + "' must be a string");
    }
    config.country_to_group[country] = group.get<std::string>();
  }
  return config;
}

RegionGroupConfig RegionGroupConfig::Load(const std::filesystem::path& path) {
  try {
    return FromJson(ReadJsonFile(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

GroupAssignment AssignGroupFromBoxes(const AnnotatedImage& image,
                                     const GroupTermConfig& terms,
                                     const BoxFilterRule& filter) {
  std::set<std::string> evidence;
  bool neutral = false;
  bool mid_size = false;
  bool too_small = false;
  for (const BoxAnnotation& box : image.boxes) {
    const bool is_neutral = terms.neutral_exclusion_terms.contains(box.raw_label);
    const std::string* group = terms.ActiveGroupOf(box.raw_label);
    if (!is_neutral && group == nullptr) continue;
    switch (JudgeBox(image, box, filter)) {
      case BoxVerdict::kEvidence:
        if (is_neutral) {
          neutral = true;
        } else {
          evidence.insert(*group);
        }
        break;
      case BoxVerdict::kMidSize:
        if (!is_neutral) mid_size = true;
        break;
      case BoxVerdict::kTooSmall:
        if (!is_neutral) too_small = true;
        break;
    }
  }
  if (neutral) {
    return GroupAssignment::Excluded(image.image_id,
                                     ExclusionReason::kNeutralTermPresent);
  }
  if (evidence.size() > 1) {
    return GroupAssignment::Excluded(image.image_id,
                                     ExclusionReason::kMultipleGroups);
  }
  if (mid_size) {
    return GroupAssignment::Excluded(image.image_id,
                                     ExclusionReason::kMidSizeAmbiguous);
  }
  if (evidence.empty() && too_small) {
    return GroupAssignment::Excluded(image.image_id, ExclusionReason::kBoxTooSmall);
  }
  return SingleGroupRule(image.image_id, evidence);
}

std::vector<std::string> TokenizeCaption(const std::string& text) {
  const auto& ctype = std::use_facet<std::ctype<wchar_t>>(UnicodeLocale());
  std::vector<std::string> tokens;
  std::string current;
  for (const char32_t cp : DecodeUtf8(text)) {
    const auto wide = static_cast<wchar_t>(cp);
    const bool alnum = cp != 0xFFFD && ctype.is(std::ctype_base::alnum, wide);
    if (alnum) {
      AppendUtf8(current, static_cast<char32_t>(ctype.tolower(wide)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

GroupAssignment AssignGroupFromCaptions(const AnnotatedImage& image,
                                        const GroupTermConfig& terms) {
  std::set<std::string> evidence;
  bool neutral = false;
  for (const std::string& caption : image.captions) {
    for (const std::string& token : TokenizeCaption(caption)) {
      if (terms.neutral_exclusion_terms.contains(token)) neutral = true;
      if (const std::string* group = terms.ActiveGroupOf(token)) {
        evidence.insert(*group);
      }
    }
  }
  if (neutral) {
    return GroupAssignment::Excluded(image.image_id,
                                     ExclusionReason::kNeutralTermPresent);
  }
  return SingleGroupRule(image.image_id, evidence);
}

GroupAssignment AssignGroupFromMetadata(const AnnotatedImage& image,
                                        const RegionGroupConfig& config,
                                        const std::string& key) {
  const auto value = image.metadata.find(key);
  if (value == image.metadata.end()) {
    return GroupAssignment::Excluded(image.image_id,
                                     ExclusionReason::kNoGroupEvidence);
  }
  const auto group = config.country_to_group.find(value->second);
  if (group == config.country_to_group.end()) {
    throw DataError("'" + value->second + "' (image '" + image.image_id +
                    "') has no configured group");
  }
  return GroupAssignment::Assigned(image.image_id, group->second);
}

std::size_t AssignmentSummary::assigned() const {
  std::size_t n = 0;
  for (const auto& [group, count] : per_group) n += count;
  return n;
}

std::size_t AssignmentSummary::excluded() const {
  std::size_t n = 0;
  for (const auto& [reason, count] : per_reason) n += count;
  return n;
}

nlohmann::ordered_json AssignmentSummary::ToJson() const {
  nlohmann::ordered_json out;
  out["total"] = total;
  out["assigned"] = nlohmann::ordered_json::object();
  for (const auto& [group, count] : per_group) out["assigned"][group] = count;
  out["excluded"] = nlohmann::ordered_json::object();
  for (const auto& [reason, count] : per_reason) {
    out["excluded"][ExclusionReasonName(reason)] = count;
  }
  return out;
}

AssignmentSummary SummarizeAssignments(
    std::span<const GroupAssignment> assignments,
    std::span<const std::string> taxonomy) {
  AssignmentSummary summary;
  for (const std::string& group : taxonomy) summary.per_group[group] = 0;
  for (const ExclusionReason reason : kAllExclusionReasons) {
    summary.per_reason[reason] = 0;
  }
  for (const GroupAssignment& a : assignments) {
    if (a.is_assigned()) {
      ++summary.per_group[a.group()];
    } else {
      ++summary.per_reason[a.reason()];
    }
  }
  summary.total = assignments.size();
  return summary;
}

void WriteAssignmentsCsv(std::ostream& out,
                         std::span<const GroupAssignment> assignments) {
  csv::WriteRow(out, {"image_id", "outcome", "group_or_reason"});
  for (const GroupAssignment& a : assignments) {
    csv::WriteRow(out, {a.image_id(), a.is_assigned() ? "assigned" : "excluded",
                        a.Describe()});
  }
}

std::vector<GroupAssignment> ReadAssignmentsCsv(std::istream& in) {
  const std::vector<csv::Row> rows = csv::Parse(in);
  if (rows.empty() || rows[0] != csv::Row{"image_id", "outcome", "group_or_reason"}) {
    throw DataError("assignments CSV must start with image_id,outcome,group_or_reason");
  }
  std::vector<GroupAssignment> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const csv::Row& row = rows[i];
    if (row.size() != 3) {
      throw DataError("assignments CSV row " + std::to_string(i + 1) +
                      " has " + std::to_string(row.size()) + " fields");
    }
    if (row[1] == "assigned") {
      out.push_back(GroupAssignment::Assigned(row[0], row[2]));
    } else if (row[1] == "excluded") {
      out.push_back(GroupAssignment::Excluded(row[0], ParseExclusionReason(row[2])));
    } else {
      throw DataError("unknown outcome '" + row[1] + "'");
    }
  }
  return out;
}

}  // namespace disparity_audit
