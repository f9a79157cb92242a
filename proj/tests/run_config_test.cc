#include "disparity_audit/run_config.h"

#include "disparity_audit/errors.h"
#include "gtest/gtest.h"
#include "test_support.h"

namespace disparity_audit {
namespace {

using nlohmann::json;

json Minimal() {
  return {{"data", {{"annotations", "ann.jsonl"}, {"predictions", "pred.jsonl"}}}};
}

TEST(RunConfig, DefaultsWithoutPreset) {
  const RunConfig c = ParseRunConfig(Minimal(), "/base");
  EXPECT_EQ(c.annotations, std::filesystem::path("/base/ann.jsonl"));
  EXPECT_EQ(c.predictions, std::filesystem::path("/base/pred.jsonl"));
  EXPECT_EQ(c.group_method, GroupMethod::kBoxes);
  EXPECT_EQ(c.k, 5u);
  EXPECT_EQ(c.sampling_mode, SamplingMode::kBaseline);
  EXPECT_EQ(c.evaluation_version, "custom");
  EXPECT_TRUE(std::holds_alternative<NoBoxFilter>(c.box_filter));
}

TEST(RunConfig, PresetsExpand) {
  ConfigOverrides o;
  o.preset = "baseline";
  RunConfig c = ParseRunConfig(Minimal(), "/b", o);
  EXPECT_TRUE(std::holds_alternative<NoBoxFilter>(c.box_filter));
  EXPECT_FALSE(c.apply_excluded_terms);
  EXPECT_EQ(c.evaluation_version, "baseline");

  o.preset = "v1";
  c = ParseRunConfig(Minimal(), "/b", o);
  ASSERT_TRUE(std::holds_alternative<MinAreaPixels>(c.box_filter));
  EXPECT_EQ(std::get<MinAreaPixels>(c.box_filter).threshold, 600.0);
  EXPECT_FALSE(c.apply_excluded_terms);

  o.preset = "v2";
  c = ParseRunConfig(Minimal(), "/b", o);
  EXPECT_EQ(c.box_filter, BoxFilterRule(RelativeArea{0.05, 0.02}));
  EXPECT_FALSE(c.apply_excluded_terms);

  o.preset = "v3";
  c = ParseRunConfig(Minimal(), "/b", o);
  EXPECT_EQ(c.box_filter, BoxFilterRule(RelativeArea{0.05, 0.02}));
  EXPECT_TRUE(c.apply_excluded_terms);
  EXPECT_EQ(c.sampling_mode, SamplingMode::kBaseline);

  o.preset = "reliable";
  c = ParseRunConfig(Minimal(), "/b", o);
  EXPECT_EQ(c.box_filter, BoxFilterRule(RelativeArea{0.05, 0.02}));
  EXPECT_TRUE(c.apply_excluded_terms);
  EXPECT_EQ(c.sampling_mode, SamplingMode::kReliable);
  EXPECT_EQ(c.ratio.pos_parts, 1u);
  EXPECT_EQ(c.ratio.neg_parts, 5u);
  EXPECT_EQ(c.min_per_group, 50u);
  EXPECT_EQ(c.bootstraps, 250u);
}

TEST(RunConfig, DocumentOverridesPresetAndCliOverridesDocument) {
  json doc = Minimal();
  doc["preset"] = "v1";
  doc["groups"] = {{"apply_excluded_terms", true}};
  doc["sampling"] = {{"seed", 7}, {"bootstraps", 10}};
  doc["jobs"] = 2;
  doc["output"] = "out";
  RunConfig c = ParseRunConfig(doc, "/b");
  EXPECT_TRUE(std::holds_alternative<MinAreaPixels>(c.box_filter));
  EXPECT_TRUE(c.apply_excluded_terms);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.bootstraps, 10u);
  EXPECT_EQ(c.jobs, 2u);
  EXPECT_EQ(c.output, std::filesystem::path("/b/out"));

  ConfigOverrides o;
  o.preset = "reliable";
  o.seed = 99;
  o.jobs = 4;
  o.output = "/elsewhere";
  c = ParseRunConfig(doc, "/b", o);
  EXPECT_EQ(c.sampling_mode, SamplingMode::kReliable);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.jobs, 4u);
  EXPECT_EQ(c.output, std::filesystem::path("/elsewhere"));
  EXPECT_EQ(c.resolved["sampling"]["seed"], 99);
  EXPECT_FALSE(c.resolved.contains("jobs"));
  EXPECT_FALSE(c.resolved.contains("output"));
}

TEST(RunConfig, AbsolutePathsAreKept) {
  json doc = Minimal();
  doc["data"]["annotations"] = "/abs/a.jsonl";
  doc["mapping"] = {{"path", "maps/m.json"}};
  const RunConfig c = ParseRunConfig(doc, "/b");
  EXPECT_EQ(c.annotations, std::filesystem::path("/abs/a.jsonl"));
  ASSERT_TRUE(c.mapping.has_value());
  EXPECT_EQ(*c.mapping, std::filesystem::path("/b/maps/m.json"));
}

TEST(RunConfig, Rejections) {
  ConfigOverrides o;
  o.preset = "v9";
  EXPECT_THROW(ParseRunConfig(Minimal(), "/b", o), ConfigError);
  EXPECT_THROW(ParseRunConfig(json::array(), "/b"), ConfigError);
  EXPECT_THROW(ParseRunConfig(json{{"data", json::object()}}, "/b"), ConfigError);

  const auto with = [](const json& patch) {
    json doc = Minimal();
    doc.merge_patch(patch);
    return doc;
  };
  EXPECT_THROW(ParseRunConfig(with({{"bogus", 1}}), "/b"), ConfigError);
  EXPECT_THROW(ParseRunConfig(with({{"metrics", {{"list", {"ap"}}}}}), "/b"), ConfigError);
  EXPECT_THROW(ParseRunConfig(with({{"metrics", {{"metrics", {"apx"}}}}}), "/b"), ConfigError);
  EXPECT_THROW(ParseRunConfig(with({{"metrics", {{"k", 0}}}}), "/b"), ConfigError);
  EXPECT_THROW(ParseRunConfig(with({{"metrics", {{"validation_fraction", 1.0}}}}), "/b"),
               ConfigError);
  EXPECT_THROW(ParseRunConfig(with({{"sampling", {{"ratio", {1, 0}}}}}), "/b"), ConfigError);
  EXPECT_THROW(ParseRunConfig(with({{"sampling", {{"mode", "weird"}}}}), "/b"), ConfigError);
  EXPECT_THROW(ParseRunConfig(with({{"groups", {{"method", "metadata"}}}}), "/b"), ConfigError);
  EXPECT_THROW(ParseRunConfig(with({{"groups", {{"pairs", {{"a", "a"}}}}}}), "/b"), ConfigError);
  EXPECT_THROW(
      ParseRunConfig(with({{"groups", {{"box_filter", {{"type", "relative_area"},
                                                       {"use_min", 0.01},
                                                       {"ignore_max", 0.02}}}}}}),
                     "/b"),
      ConfigError);
}

TEST(RunConfig, LoadResolvesAgainstConfigDirectory) {
  testing_support::TempDir dir("config");
  testing_support::WriteText(dir.path() / "run.json", Minimal().dump());
  const RunConfig c = LoadRunConfig(dir.path() / "run.json");
  EXPECT_EQ(c.annotations, dir.path() / "ann.jsonl");
  testing_support::WriteText(dir.path() / "bad.json", "{ not json");
  EXPECT_THROW(LoadRunConfig(dir.path() / "bad.json"), ConfigError);
  EXPECT_THROW(LoadRunConfig(dir.path() / "missing.json"), ConfigError);
}

TEST(RunConfig, EveryPresetNameResolves) {
  for (const std::string& name : PresetNames()) {
    EXPECT_NO_THROW(PresetJson(name)) << name;
  }
}

}  // namespace
}  // namespace disparity_audit
