#include "disparity_audit/synth.h"

#include <cmath>
#include <numbers>

#include "disparity_audit/errors.h"
#include "gtest/gtest.h"
#include "test_support.h"

namespace disparity_audit {
namespace {

using testing_support::ReadText;
using testing_support::TempDir;

ScenarioSpec OneGroup(std::uint64_t n, const ScoreLaw& law, std::uint64_t seed = 1) {
  ScenarioSpec spec;
  spec.seed = seed;
  spec.groups = {{"g", n}};
  spec.concepts = {{"c", {{"g", law}}}};
  return spec;
}

// E[logistic(X)], X ~ Normal(mu, sigma), by composite Simpson over +-10 sigma.
double SquashedMean(double mu, double sigma) {
  const int steps = 20000;
  const double lo = mu - 10 * sigma;
  const double h = 20 * sigma / steps;
  double sum = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double x = lo + i * h;
    const double density = std::exp(-0.5 * std::pow((x - mu) / sigma, 2)) /
                           (sigma * std::sqrt(2 * std::numbers::pi));
    const double f = density / (1.0 + std::exp(-x));
    sum += f * (i == 0 || i == steps ? 1 : (i % 2 == 1 ? 4 : 2));
  }
  return sum * h / 3.0;
}

TEST(Generate, CountsPositives) {
  const SyntheticDataset data = Generate(OneGroup(100, {0.2, 1, 1, 0, 1}));
  ASSERT_EQ(data.images.size(), 100u);
  std::size_t positives = 0;
  for (const auto& image : data.images) positives += image.direct_labels.count("c");
  EXPECT_EQ(positives, 20u);
  EXPECT_EQ(PositiveCount(100, 0.2), 20u);
  EXPECT_EQ(PositiveCount(30, 1.0 / 6.0), 5u);
  EXPECT_EQ(PositiveCount(10, 0.25), 3u);  // 2.5 rounds away from zero
  for (const auto& a : data.assignments) EXPECT_EQ(a.group(), "g");
  EXPECT_EQ(data.images[0].metadata.at("group"), "g");
}

TEST(Generate, SameSeedSameFiles) {
  ScenarioSpec spec = OneGroup(300, {0.3, 1, 1, 0, 1}, 9);
  spec.groups.push_back({"h", 200});
  spec.concepts[0].laws["h"] = {0.1, 2, 0.5, 0, 1};
  TempDir first("synth_a");
  TempDir second("synth_b");
  WriteSyntheticDataset(spec, Generate(spec), first.path());
  WriteSyntheticDataset(spec, Generate(spec), second.path());
  for (const char* name : {"annotations.jsonl", "predictions.jsonl", "assignments.csv",
                           "region.json", "scenario.json"}) {
    const std::string a = ReadText(first.path() / name);
    EXPECT_FALSE(a.empty()) << name;
    EXPECT_EQ(a, ReadText(second.path() / name)) << name;
  }
  spec.seed = 10;
  TempDir third("synth_c");
  WriteSyntheticDataset(spec, Generate(spec), third.path());
  EXPECT_NE(ReadText(first.path() / "predictions.jsonl"),
            ReadText(third.path() / "predictions.jsonl"));
  EXPECT_EQ(ScenarioSpec::Load(third.path() / "scenario.json").ToJson(), spec.ToJson());
}

TEST(Generate, PositiveScoreMeanMatchesSquashedNormal) {
  const ScoreLaw law{0.5, 0.8, 1.3, -0.4, 0.7};
  const std::uint64_t n = 200000;
  const SyntheticDataset data = Generate(OneGroup(n, law, 4));
  double sum_pos = 0, sum_sq_pos = 0, sum_neg = 0, sum_sq_neg = 0;
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    const double s = data.predictions[i].scores.at("c");
    if (data.images[i].direct_labels.contains("c")) {
      sum_pos += s;
      sum_sq_pos += s * s;
      ++n_pos;
    } else {
      sum_neg += s;
      sum_sq_neg += s * s;
      ++n_neg;
    }
  }
  ASSERT_EQ(n_pos, 100000u);
  const double mean_pos = sum_pos / n_pos;
  const double sd_pos = std::sqrt(sum_sq_pos / n_pos - mean_pos * mean_pos);
  EXPECT_NEAR(mean_pos, SquashedMean(law.mu_pos, law.sigma_pos), 4 * sd_pos / std::sqrt(n_pos));
  const double mean_neg = sum_neg / n_neg;
  const double sd_neg = std::sqrt(sum_sq_neg / n_neg - mean_neg * mean_neg);
  EXPECT_NEAR(mean_neg, SquashedMean(law.mu_neg, law.sigma_neg), 4 * sd_neg / std::sqrt(n_neg));
}

TEST(Generate, EmpiricalAucNearClosedForm) {
  const ScoreLaw law{0.3, 1.0, 1.0, 0.0, 1.0};
  const SyntheticDataset data = Generate(OneGroup(20000, law, 6));
  std::vector<LabeledScore> rows;
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    rows.push_back({data.predictions[i].scores.at("c"),
                    data.images[i].direct_labels.contains("c"), i});
  }
  // AUC standard error at these sizes is about 0.004.
  EXPECT_NEAR(*AucRoc(rows), ClosedFormAuc(1, 1, 0, 1), 0.016);
}

TEST(ClosedFormAuc, Examples) {
  EXPECT_DOUBLE_EQ(ClosedFormAuc(0.3, 1, 0.3, 2), 0.5);
  EXPECT_NEAR(ClosedFormAuc(1, 1, 0, 1), 0.760249938, 1e-8);
  EXPECT_NEAR(ClosedFormAuc(0, 1.5, 1, 0.5), 1.0 - ClosedFormAuc(1, 0.5, 0, 1.5), 1e-15);
  EXPECT_NEAR(StandardNormalCdf(0), 0.5, 1e-16);
  EXPECT_NEAR(Logistic(0), 0.5, 1e-16);
}

TEST(PrevalenceSweep, RatesStableAndApFalls) {
  const ScoreLaw law{0.5, 1.0, 1.0, 0.0, 1.0};
  const std::vector<double> prevalences = {0.5, 0.1};
  const std::uint64_t n = 20000;
  const double t = Logistic(0.5);
  const auto rows = PrevalenceSweep(law, n, prevalences, t, 3);
  ASSERT_EQ(rows.size(), 2u);
  // Binomial standard errors of each rate, combined across the two rows.
  const auto bound = [](double p, double n1, double n2) {
    return 3 * std::sqrt(p * (1 - p) / n1 + p * (1 - p) / n2);
  };
  const double tpr = *rows[0].tpr;
  const double fpr = *rows[0].fpr;
  EXPECT_NEAR(*rows[1].tpr, tpr, bound(tpr, rows[0].positives, rows[1].positives));
  EXPECT_NEAR(*rows[1].fpr, fpr, bound(fpr, rows[0].negatives, rows[1].negatives));
  EXPECT_GT(fpr, 0.0);
  EXPECT_GT(*rows[0].ap - *rows[1].ap, 0.1);
}

TEST(PrevalenceSweep, SeparatedLawsGivePerfectAp) {
  const ScoreLaw law{0.5, 20.0, 0.1, -20.0, 0.1};
  const std::vector<double> prevalences = {0.5, 0.2, 0.01};
  for (const auto& row : PrevalenceSweep(law, 1000, prevalences, 0.5, 1)) {
    EXPECT_EQ(row.ap, 1.0);
  }
  const std::vector<double> single = {0.3};
  const auto one = PrevalenceSweep(law, 100, single, 0.5, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].positives, 30u);
  EXPECT_EQ(one[0].negatives, 70u);
}

TEST(ScenarioSpec, Validation) {
  EXPECT_THROW(OneGroup(100, {0.0, 1, 1, 0, 1}).Validate(), ConfigError);
  EXPECT_THROW(OneGroup(100, {1.0, 1, 1, 0, 1}).Validate(), ConfigError);
  EXPECT_THROW(OneGroup(100, {0.2, 1, 0, 0, 1}).Validate(), ConfigError);
  EXPECT_THROW(OneGroup(0, {0.2, 1, 1, 0, 1}).Validate(), ConfigError);
  EXPECT_THROW(OneGroup(10, {0.01, 1, 1, 0, 1}).Validate(), ConfigError);
  ScenarioSpec missing = OneGroup(100, {0.2, 1, 1, 0, 1});
  missing.groups.push_back({"h", 10});
  EXPECT_THROW(missing.Validate(), ConfigError);
  EXPECT_THROW(ScenarioSpec::FromJson(nlohmann::json::parse(R"({"groups":[]})")), ConfigError);
}

}  // namespace
}  // namespace disparity_audit
