#include "disparity_audit/run_config.h"

#include <algorithm>
#include <fstream>
#include <set>

#include "disparity_audit/errors.h"

namespace disparity_audit {
namespace {

using nlohmann::json;

const json& Section(const json& document, const char* name) {
  static const json kEmpty = json::object();
  const auto it = document.find(name);
  if (it == document.end() || it->is_null()) return kEmpty;
  if (!it->is_object()) throw ConfigError(std::string("'") + name + "' must be an object");
  return *it;
}

template <typename T>
T Get(const json& section, const char* key, T fallback, const char* where) {
  const auto it = section.find(key);
  if (it == section.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(where) + "." + key + " has the wrong type");
  }
}

std::filesystem::path Resolve(const std::filesystem::path& base,
                              const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

void ResolvePathField(json& section, const char* key,
                      const std::filesystem::path& base) {
  const auto it = section.find(key);
  if (it == section.end() || !it->is_string()) return;
  const std::string value = it->get<std::string>();
  if (value.rfind("builtin:", 0) == 0) return;
  *it = Resolve(base, value).string();
}

void CheckKeys(const json& object, std::initializer_list<const char*> allowed,
               const std::string& where) {
  if (!object.is_object()) return;
  for (const auto& [key, value] : object.items()) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

void CheckAllKeys(const json& merged) {
  CheckKeys(merged,
            {"preset", "data", "groups", "mapping", "concepts", "metrics", "sampling",
             "evaluation_version", "output", "report", "jobs"},
            "config");
  const auto section = [&](const char* name, std::initializer_list<const char*> keys) {
    if (merged.contains(name)) CheckKeys(merged[name], keys, name);
  };
  section("data", {"annotations", "predictions", "format", "drop_unlabeled_images"});
  section("groups", {"method", "terms", "apply_excluded_terms", "box_filter", "region",
                     "metadata_key", "order", "pairs"});
  section("mapping", {"path", "strict"});
  section("metrics", {"metrics", "k", "validation_fraction", "threshold_scope"});
  section("sampling", {"mode", "ratio", "bootstraps", "seed", "min_per_group"});
  section("report", {"top_n"});
}

}  // namespace

std::vector<std::string> PresetNames() {
  return {"baseline", "v1", "v2", "v3", "reliable"};
}

json PresetJson(const std::string& name) {
  json preset = {
      {"evaluation_version", name},
      {"groups",
       {{"box_filter", {{"type", "none"}}}, {"apply_excluded_terms", false}}},
      {"metrics", {{"metrics", {"ap", "tpr", "fpr"}}, {"validation_fraction", 0.2}}},
      {"sampling",
       {{"mode", "baseline"},
        {"ratio", {1, 5}},
        {"bootstraps", 250},
        {"min_per_group", 50}}},
  };
  if (name == "baseline") return preset;
  preset["groups"]["box_filter"] = {
      {"type", "min_area_pixels"}, {"threshold", 600}, {"measure", "area"}};
  if (name == "v1") return preset;
  preset["groups"]["box_filter"] = {
      {"type", "relative_area"}, {"use_min", 0.05}, {"ignore_max", 0.02}};
  if (name == "v2") return preset;
  preset["groups"]["apply_excluded_terms"] = true;
  if (name == "v3") return preset;
  preset["sampling"]["mode"] = "reliable";
  if (name == "reliable") return preset;
  throw ConfigError("unknown preset '" + name + "'");
}

RunConfig ParseRunConfig(const json& document, const std::filesystem::path& base_dir,
                         const ConfigOverrides& overrides) {
  if (!document.is_object()) throw ConfigError("run config must be a JSON object");
  std::optional<std::string> preset = overrides.preset;
  if (!preset && document.contains("preset")) {
    if (!document["preset"].is_string()) throw ConfigError("'preset' must be a string");
    preset = document["preset"].get<std::string>();
  }
  json merged = json::object();
  if (preset && *preset != "custom") merged = PresetJson(*preset);
  merged.merge_patch(document);
  merged.erase("preset");
  if (preset) merged["preset"] = *preset;
  if (overrides.seed) merged["sampling"]["seed"] = *overrides.seed;
  CheckAllKeys(merged);

  RunConfig config;
  // Data.
  {
    json& data = merged["data"];
    if (!data.is_object()) throw ConfigError("'data' must be an object");
    ResolvePathField(data, "annotations", base_dir);
    ResolvePathField(data, "predictions", base_dir);
    const auto annotations = Get<std::string>(data, "annotations", "", "data");
    const auto predictions = Get<std::string>(data, "predictions", "", "data");
    if (annotations.empty() || predictions.empty()) {
      throw ConfigError("data.annotations and data.predictions are required");
    }
    config.annotations = annotations;
    config.predictions = predictions;
    config.format = ParseAnnotationFormat(Get<std::string>(data, "format", "jsonl", "data"));
    config.drop_unlabeled_images =
        Get<bool>(data, "drop_unlabeled_images", true, "data");
  }
  // Groups.
  {
    if (!merged.contains("groups")) merged["groups"] = json::object();
    json& groups = merged["groups"];
    if (!groups.is_object()) throw ConfigError("'groups' must be an object");
    ResolvePathField(groups, "terms", base_dir);
    ResolvePathField(groups, "region", base_dir);
    const auto method = Get<std::string>(groups, "method", "boxes", "groups");
    if (method == "boxes") {
      config.group_method = GroupMethod::kBoxes;
    } else if (method == "captions") {
      config.group_method = GroupMethod::kCaptions;
    } else if (method == "metadata") {
      config.group_method = GroupMethod::kMetadata;
    } else {
      throw ConfigError("unknown group method '" + method + "'");
    }
    config.terms_source = Get<std::string>(
        groups, "terms",
        config.group_method == GroupMethod::kCaptions ? "builtin:caption_gender"
                                                      : "builtin:synset_gender",
        "groups");
    config.apply_excluded_terms = Get<bool>(groups, "apply_excluded_terms", false, "groups");
    config.box_filter = BoxFilterFromJson(
        groups.contains("box_filter") ? groups["box_filter"] : json(nullptr));
    config.region = Get<std::string>(groups, "region", "", "groups");
    if (config.group_method == GroupMethod::kMetadata && config.region.empty()) {
      throw ConfigError("groups.region is required for the metadata method");
    }
    config.metadata_key = Get<std::string>(groups, "metadata_key", "country", "groups");
    config.group_order =
        Get<std::vector<std::string>>(groups, "order", {}, "groups");
    const auto pairs = Get<std::vector<std::vector<std::string>>>(groups, "pairs", {}, "groups");
    for (const auto& pair : pairs) {
      if (pair.size() != 2 || pair[0] == pair[1]) {
        throw ConfigError("groups.pairs entries must be two distinct group ids");
      }
      config.group_pairs.emplace_back(pair[0], pair[1]);
    }
  }
  // Mapping and concepts.
  {
    const json& mapping = Section(merged, "mapping");
    if (mapping.contains("path")) {
      ResolvePathField(merged["mapping"], "path", base_dir);
      config.mapping = merged["mapping"]["path"].get<std::string>();
    }
    config.mapping_strictness = Get<bool>(mapping, "strict", false, "mapping")
                                    ? MappingStrictness::kStrict
                                    : MappingStrictness::kLenient;
    if (merged.contains("concepts") && !merged["concepts"].is_null()) {
      config.concepts = Get<std::vector<std::string>>(merged, "concepts", {}, "config");
    }
  }
  // Metrics.
  {
    const json& metrics = Section(merged, "metrics");
    const auto names = Get<std::vector<std::string>>(
        metrics, "metrics", {"ap", "tpr", "fpr"}, "metrics");
    if (names.empty()) throw ConfigError("metrics.metrics must not be empty");
    config.metrics.clear();
    std::set<std::string> seen;
    for (const std::string& name : names) {
      if (!seen.insert(name).second) continue;
      config.metrics.push_back(ParseMetric(name));
    }
    const auto k = Get<std::int64_t>(metrics, "k", 5, "metrics");
    if (k < 1) throw ConfigError("metrics.k must be at least 1");
    config.k = static_cast<std::size_t>(k);
    config.validation_fraction =
        Get<double>(metrics, "validation_fraction", 0.2, "metrics");
    if (!(config.validation_fraction > 0 && config.validation_fraction < 1)) {
      throw ConfigError("metrics.validation_fraction must lie in (0, 1)");
    }
    const auto scope = Get<std::string>(metrics, "threshold_scope", "pooled", "metrics");
    if (scope == "pooled") {
      config.threshold_scope = ThresholdScope::kPooled;
    } else if (scope == "per_group") {
      config.threshold_scope = ThresholdScope::kPerGroup;
    } else {
      throw ConfigError("unknown threshold_scope '" + scope + "'");
    }
  }
  // Sampling.
  {
    const json& sampling = Section(merged, "sampling");
    config.sampling_mode =
        ParseSamplingMode(Get<std::string>(sampling, "mode", "baseline", "sampling"));
    const auto ratio = Get<std::vector<std::int64_t>>(sampling, "ratio", {1, 5}, "sampling");
    if (ratio.size() != 2 || ratio[0] < 1 || ratio[1] < 1) {
      throw ConfigError("sampling.ratio must be two positive integers");
    }
    config.ratio = {static_cast<std::uint64_t>(ratio[0]),
                    static_cast<std::uint64_t>(ratio[1])};
    const auto bootstraps = Get<std::int64_t>(sampling, "bootstraps", 250, "sampling");
    if (bootstraps < 1) throw ConfigError("sampling.bootstraps must be positive");
    config.bootstraps = static_cast<std::uint64_t>(bootstraps);
    config.seed = Get<std::uint64_t>(sampling, "seed", 0, "sampling");
    const auto k = Get<std::int64_t>(sampling, "min_per_group", 50, "sampling");
    if (k < 1) throw ConfigError("sampling.min_per_group must be at least 1");
    config.min_per_group = static_cast<std::uint64_t>(k);
  }
  config.evaluation_version = Get<std::string>(
      merged, "evaluation_version", preset.value_or("custom"), "config");
  if (!merged.contains("evaluation_version")) {
    merged["evaluation_version"] = config.evaluation_version;
  }
  config.report_top_n = static_cast<std::size_t>(
      Get<std::int64_t>(Section(merged, "report"), "top_n", 10, "report"));

  if (overrides.output) {
    config.output = *overrides.output;
  } else if (merged.contains("output")) {
    config.output = Resolve(base_dir, Get<std::string>(merged, "output", "", "config"));
  }
  config.jobs = overrides.jobs.value_or(
      static_cast<std::size_t>(Get<std::int64_t>(merged, "jobs", 1, "config")));
  if (config.jobs < 1) config.jobs = 1;

  merged.erase("output");
  merged.erase("jobs");
  config.resolved = std::move(merged);
  return config;
}

RunConfig LoadRunConfig(const std::filesystem::path& path,
                        const ConfigOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json document;
  try {
    document = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
  return ParseRunConfig(document, std::filesystem::absolute(path).parent_path(),
                        overrides);
}

}  // namespace disparity_audit
