#include "disparity_audit/pipeline.h"

#include <set>
#include <sstream>

#include "disparity_audit/synth.h"
#include "gtest/gtest.h"
#include "test_support.h"

namespace disparity_audit {
namespace {

using nlohmann::json;
using testing_support::TempDir;

// Two groups of 600. "dog" has equal score laws but prevalence 0.5 vs 0.1;
// "cat" is identical in both groups; "rare" has 12 positives per group.
ScenarioSpec Scenario() {
  return ScenarioSpec::FromJson(json::parse(R"({
    "seed": 7, "groups": [{"name": "a", "n": 600}, {"name": "b", "n": 600}],
    "concepts": [
      {"concept": "dog", "laws": {
        "a": {"prevalence": 0.5, "mu_pos": 1, "sigma_pos": 1, "mu_neg": 0, "sigma_neg": 1},
        "b": {"prevalence": 0.1, "mu_pos": 1, "sigma_pos": 1, "mu_neg": 0, "sigma_neg": 1}}},
      {"concept": "cat", "law": {"prevalence": 0.2, "mu_pos": 1.5, "sigma_pos": 1, "mu_neg": 0, "sigma_neg": 1}},
      {"concept": "rare", "law": {"prevalence": 0.02, "mu_pos": 2, "sigma_pos": 1, "mu_neg": 0, "sigma_neg": 1}}
    ]})"));
}

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("pipeline");
    const ScenarioSpec spec = Scenario();
    WriteSyntheticDataset(spec, Generate(spec), dir_->path() / "data");
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static RunConfig Config(const std::string& preset, std::uint64_t seed = 3,
                          std::size_t jobs = 1) {
    const json doc = {
        {"data",
         {{"annotations", "data/annotations.jsonl"},
          {"predictions", "data/predictions.jsonl"},
          {"drop_unlabeled_images", false}}},
        {"groups",
         {{"method", "metadata"}, {"region", "data/region.json"}, {"metadata_key", "group"}}},
        {"metrics", {{"metrics", {"ap", "tpr", "auc_roc"}}}},
        {"sampling", {{"bootstraps", 100}}},
    };
    ConfigOverrides o;
    o.preset = preset;
    o.seed = seed;
    o.jobs = jobs;
    o.output = dir_->path() / ("out_" + preset + "_" + std::to_string(seed));
    return ParseRunConfig(doc, dir_->path(), o);
  }

  static const ResultRecord& Find(const Evaluation& e, const std::string& metric,
                                  const std::string& concept_id) {
    for (const ResultRecord& r : e.results) {
      if (r.metric == metric && r.concept_id == concept_id) return r;
    }
    throw std::runtime_error("missing row " + metric + "/" + concept_id);
  }

  static inline TempDir* dir_ = nullptr;
};

TEST_F(PipelineTest, OneRowPerMetricConceptAndPair) {
  const Evaluation e = Evaluate(Config("baseline"));
  std::set<std::pair<std::string, std::string>> keys;
  for (const ResultRecord& r : e.results) {
    EXPECT_EQ(r.group_a, "a");
    EXPECT_EQ(r.group_b, "b");
    EXPECT_TRUE(keys.emplace(r.metric, r.concept_id).second);
  }
  // The rare concept falls under the 50-positive floor.
  const std::set<std::pair<std::string, std::string>> expected = {
      {"ap", "aggregate"},      {"ap", "cat"},      {"ap", "dog"},
      {"tpr", "aggregate"},     {"tpr", "cat"},     {"tpr", "dog"},
      {"auc_roc", "aggregate"}, {"auc_roc", "cat"}, {"auc_roc", "dog"}};
  EXPECT_EQ(keys, expected);
  ASSERT_EQ(e.manifest["skipped_concepts"].size(), 1u);
  EXPECT_EQ(e.manifest["skipped_concepts"][0]["concept"], "rare");
  EXPECT_EQ(e.manifest["skipped_concepts"][0]["stage"], "filter");
}

TEST_F(PipelineTest, ManifestCountsAreConsistent) {
  const Evaluation e = Evaluate(Config("baseline"));
  const auto& counts = e.manifest["counts"];
  EXPECT_EQ(counts["images_total"], 1200);
  std::uint64_t assigned = 0;
  std::uint64_t excluded = 0;
  for (const auto& [g, n] : counts["assignments"]["assigned"].items()) assigned += n.get<std::uint64_t>();
  for (const auto& [r, n] : counts["assignments"]["excluded"].items()) excluded += n.get<std::uint64_t>();
  EXPECT_EQ(assigned + excluded, counts["images_considered"].get<std::uint64_t>());
  EXPECT_EQ(counts["concepts_retained"], 2);
  EXPECT_EQ(counts["concepts_evaluated"], 2);
  EXPECT_EQ(e.manifest["seed"], 3);
  EXPECT_EQ(e.manifest["evaluation_version"], "baseline");
  EXPECT_EQ(e.manifest["config_hash"], ConfigHash(Config("baseline").resolved));
}

TEST_F(PipelineTest, DeterministicForAnyJobCount) {
  const Evaluation one = Evaluate(Config("reliable", 11, 1));
  const Evaluation again = Evaluate(Config("reliable", 11, 1));
  const Evaluation three = Evaluate(Config("reliable", 11, 3));
  EXPECT_EQ(one.results, again.results);
  EXPECT_EQ(one.results, three.results);
  EXPECT_EQ(one.manifest.dump(), three.manifest.dump());
  const Evaluation other_seed = Evaluate(Config("reliable", 12, 1));
  EXPECT_NE(one.results, other_seed.results);
  EXPECT_NE(one.manifest["config_hash"], other_seed.manifest["config_hash"]);
}

TEST_F(PipelineTest, ReliableSamplingRemovesPrevalenceArtifact) {
  const Evaluation baseline = Evaluate(Config("baseline"));
  const Evaluation reliable = Evaluate(Config("reliable"));
  EXPECT_TRUE(Find(baseline, "ap", "dog").significant);
  EXPECT_GT(*Find(baseline, "ap", "dog").point, 0.2);
  EXPECT_FALSE(Find(reliable, "ap", "dog").significant);
  // Reliable draws are equal-sized and at the 1:5 ratio.
  const ResultRecord& dog = Find(reliable, "ap", "dog");
  ASSERT_EQ(dog.n_pos_per_group.size(), 2u);
  EXPECT_EQ(dog.n_pos_per_group[0], dog.n_pos_per_group[1]);
  EXPECT_EQ(dog.n_neg_per_group[0], 5 * dog.n_pos_per_group[0]);
}

TEST_F(PipelineTest, RunWritesEveryOutput) {
  const RunConfig config = Config("v3");
  const Evaluation e = disparity_audit::Run(config);
  for (const char* name : {"results.csv", "exclusions.csv", "report.txt", "manifest.json",
                           "plotdata/ap__a_vs_b.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(config.output / name)) << name;
  }
  EXPECT_EQ(LoadResultsCsv(config.output / "results.csv"), e.results);
  const json manifest = json::parse(testing_support::ReadText(config.output / "manifest.json"));
  EXPECT_FALSE(manifest.contains("dropped_unlabeled"));
  EXPECT_TRUE(manifest.contains("outputs"));
  EXPECT_EQ(testing_support::ReadText(config.output / "exclusions.csv"), "image_id,reason\n");
}

TEST(PipelineUnit, ExclusionsCsvIsSorted) {
  const std::vector<GroupAssignment> assignments = {
      GroupAssignment::Excluded("z", ExclusionReason::kNoGroupEvidence),
      GroupAssignment::Assigned("m", "a"),
      GroupAssignment::Excluded("b", ExclusionReason::kMultipleGroups)};
  const std::vector<std::string> dropped = {"q"};
  std::ostringstream out;
  WriteExclusionsCsv(out, assignments, dropped);
  EXPECT_EQ(out.str(),
            "image_id,reason\nb,MultipleGroups\nq,NoLabels\nz,NoGroupEvidence\n");
}

TEST(PipelineUnit, StageErrorsKeepTheirType) {
  EXPECT_THROW(RunStage("x", []() -> int { throw DataError("boom"); }), DataError);
  try {
    RunStage("load", []() -> int { throw ConfigError("bad"); });
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()), "[load] bad");
  }
}

TEST(PipelineUnit, ConfigHashIsStable) {
  const json a = json::parse(R"({"b": 1, "a": [1, 2]})");
  const json b = json::parse(R"({"a": [1, 2], "b": 1})");
  EXPECT_EQ(ConfigHash(a), ConfigHash(b));
  EXPECT_NE(ConfigHash(a), ConfigHash(json::parse(R"({"a": [2, 1], "b": 1})")));
  EXPECT_EQ(ConfigHash(a).rfind("fnv1a64:", 0), 0u);
}

}  // namespace
}  // namespace disparity_audit
