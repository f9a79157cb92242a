#include "disparity_audit/synth.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "disparity_audit/errors.h"
#include "disparity_audit/group_ops.h"
#include "disparity_audit/metrics.h"
#include "disparity_audit/rng.h"

namespace disparity_audit {
namespace {

constexpr std::uint64_t kLabelStream = 0;
constexpr std::uint64_t kPositiveScoreStream = 1;
constexpr std::uint64_t kNegativeScoreStream = 2;

std::string ImageId(const std::string& group, std::uint64_t index) {
  char suffix[32];
  std::snprintf(suffix, sizeof(suffix), "-%06llu",
                static_cast<unsigned long long>(index));
  return group + suffix;
}

double DrawScore(StreamRng& rng, double mu, double sigma) {
  return Logistic(mu + sigma * rng.Normal());
}

void CheckLaw(const ScoreLaw& law, const std::string& where) {
  if (!(law.prevalence > 0.0 && law.prevalence < 1.0)) {
    throw ConfigError(where + ": prevalence must lie in (0, 1)");
  }
  if (!(law.sigma_pos > 0.0 && law.sigma_neg > 0.0)) {
    throw ConfigError(where + ": sigma must be positive");
  }
  if (!std::isfinite(law.mu_pos) || !std::isfinite(law.mu_neg)) {
    throw ConfigError(where + ": mu must be finite");
  }
}

ScoreLaw LawFromJson(const nlohmann::json& json) {
  ScoreLaw law;
  law.prevalence = json.at("prevalence").get<double>();
  law.mu_pos = json.at("mu_pos").get<double>();
  law.sigma_pos = json.at("sigma_pos").get<double>();
  law.mu_neg = json.at("mu_neg").get<double>();
  law.sigma_neg = json.at("sigma_neg").get<double>();
  return law;
}

}  // namespace

void ScenarioSpec::Validate() const {
  if (groups.empty()) throw ConfigError("scenario needs at least one group");
  if (concepts.empty()) throw ConfigError("scenario needs at least one concept");
  std::set<std::string> names;
  for (const SyntheticGroup& g : groups) {
    if (g.name.empty()) throw ConfigError("scenario group name is empty");
    if (g.n < 1) throw ConfigError("group '" + g.name + "' needs n >= 1");
    if (!names.insert(g.name).second) {
      throw ConfigError("duplicate scenario group '" + g.name + "'");
    }
  }
  std::set<std::string> concept_names;
  for (const SyntheticConcept& c : concepts) {
    if (c.concept_id.empty()) throw ConfigError("scenario concept id is empty");
    if (!concept_names.insert(c.concept_id).second) {
      throw ConfigError("duplicate scenario concept '" + c.concept_id + "'");
    }
    for (const SyntheticGroup& g : groups) {
      const auto law = c.laws.find(g.name);
      const std::string where = "concept '" + c.concept_id + "', group '" + g.name + "'";
      if (law == c.laws.end()) throw ConfigError(where + ": no score law");
      CheckLaw(law->second, where);
      if (PositiveCount(g.n, law->second.prevalence) == 0) {
        throw ConfigError(where + ": n * prevalence rounds to zero positives");
      }
    }
  }
}

ScenarioSpec ScenarioSpec::FromJson(const nlohmann::json& json) {
  ScenarioSpec spec;
  try {
    spec.seed = json.value("seed", std::uint64_t{0});
    for (const auto& g : json.at("groups")) {
      spec.groups.push_back({g.at("name").get<std::string>(), g.at("n").get<std::uint64_t>()});
    }
    for (const auto& c : json.at("concepts")) {
      SyntheticConcept concept_spec;
      concept_spec.concept_id = c.at("concept").get<std::string>();
      if (const auto shared = c.find("law"); shared != c.end()) {
        for (const SyntheticGroup& g : spec.groups) {
          concept_spec.laws[g.name] = LawFromJson(*shared);
        }
      }
      if (const auto laws = c.find("laws"); laws != c.end()) {
        for (const auto& [group, law] : laws->items()) {
          concept_spec.laws[group] = LawFromJson(law);
        }
      }
      spec.concepts.push_back(std::move(concept_spec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  spec.Validate();
  return spec;
}

ScenarioSpec ScenarioSpec::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return FromJson(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
}

nlohmann::ordered_json ScenarioSpec::ToJson() const {
  nlohmann::ordered_json out;
  out["seed"] = seed;
  out["groups"] = nlohmann::ordered_json::array();
  for (const SyntheticGroup& g : groups) {
    out["groups"].push_back({{"name", g.name}, {"n", g.n}});
  }
  out["concepts"] = nlohmann::ordered_json::array();
  for (const SyntheticConcept& c : concepts) {
    nlohmann::ordered_json laws = nlohmann::ordered_json::object();
    for (const auto& [group, law] : c.laws) {
      laws[group] = {{"prevalence", law.prevalence}, {"mu_pos", law.mu_pos},
                     {"sigma_pos", law.sigma_pos},   {"mu_neg", law.mu_neg},
                     {"sigma_neg", law.sigma_neg}};
    }
    out["concepts"].push_back({{"concept", c.concept_id}, {"laws", laws}});
  }
  return out;
}

std::uint64_t PositiveCount(std::uint64_t n, double prevalence) {
  return static_cast<std::uint64_t>(std::llround(static_cast<double>(n) * prevalence));
}

SyntheticDataset Generate(const ScenarioSpec& spec) {
  spec.Validate();
  SyntheticDataset out;
  for (const SyntheticGroup& group : spec.groups) {
    const std::size_t first = out.images.size();
    for (std::uint64_t i = 0; i < group.n; ++i) {
      AnnotatedImage image;
      image.image_id = ImageId(group.name, i);
      image.metadata["group"] = group.name;
      out.images.push_back(std::move(image));
      PredictionRecord record;
      record.image_id = out.images.back().image_id;
      out.predictions.push_back(std::move(record));
      out.assignments.push_back(
          GroupAssignment::Assigned(out.images.back().image_id, group.name));
    }
    for (const SyntheticConcept& c : spec.concepts) {
      const ScoreLaw& law = c.laws.at(group.name);
      std::vector<std::uint64_t> order(group.n);
      std::iota(order.begin(), order.end(), 0);
      StreamRng label_rng(spec.seed, c.concept_id, group.name, kLabelStream);
      label_rng.Shuffle(order);
      std::vector<bool> positive(group.n, false);
      const std::uint64_t k = PositiveCount(group.n, law.prevalence);
      for (std::uint64_t i = 0; i < k; ++i) positive[order[i]] = true;
      StreamRng pos_rng(spec.seed, c.concept_id, group.name, kPositiveScoreStream);
      StreamRng neg_rng(spec.seed, c.concept_id, group.name, kNegativeScoreStream);
      for (std::uint64_t i = 0; i < group.n; ++i) {
        const double score = positive[i] ? DrawScore(pos_rng, law.mu_pos, law.sigma_pos)
                                         : DrawScore(neg_rng, law.mu_neg, law.sigma_neg);
        out.predictions[first + i].scores[c.concept_id] = score;
        if (positive[i]) out.images[first + i].direct_labels.insert(c.concept_id);
      }
    }
  }
  return out;
}

void WriteSyntheticDataset(const ScenarioSpec& spec,
                           const SyntheticDataset& dataset,
                           const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  auto open = [&](const char* name) {
    std::ofstream out(directory / name, std::ios::binary);
    if (!out) throw DataError("cannot write '" + (directory / name).string() + "'");
    return out;
  };
  {
    std::ofstream out = open("annotations.jsonl");
    for (const AnnotatedImage& image : dataset.images) {
      out << AnnotationToJson(image).dump() << '\n';
    }
  }
  {
    std::ofstream out = open("predictions.jsonl");
    for (const PredictionRecord& record : dataset.predictions) {
      out << PredictionToJson(record).dump() << '\n';
    }
  }
  {
    std::ofstream out = open("assignments.csv");
    WriteAssignmentsCsv(out, dataset.assignments);
  }
  {
    nlohmann::ordered_json region;
    region["country_to_group"] = nlohmann::ordered_json::object();
    for (const SyntheticGroup& g : spec.groups) region["country_to_group"][g.name] = g.name;
    std::ofstream out = open("region.json");
    out << region.dump(2) << '\n';
  }
  {
    std::ofstream out = open("scenario.json");
    out << spec.ToJson().dump(2) << '\n';
  }
}

double Logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double StandardNormalCdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ClosedFormAuc(double mu_pos, double sigma_pos, double mu_neg,
                     double sigma_neg) {
  return StandardNormalCdf((mu_pos - mu_neg) /
                           std::sqrt(sigma_pos * sigma_pos + sigma_neg * sigma_neg));
}

std::vector<SweepRow> PrevalenceSweep(const ScoreLaw& law, std::uint64_t n,
                                      std::span<const double> prevalences,
                                      double threshold, std::uint64_t seed) {
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < prevalences.size(); ++i) {
    ScenarioSpec spec;
    spec.seed = StreamRng::Combine(seed, i);
    spec.groups = {{"sweep", n}};
    ScoreLaw at = law;
    at.prevalence = prevalences[i];
    spec.concepts = {{"concept", {{"sweep", at}}}};
    const SyntheticDataset data = Generate(spec);

    std::vector<LabeledScore> scores;
    scores.reserve(n);
    for (std::size_t j = 0; j < data.predictions.size(); ++j) {
      scores.push_back({data.predictions[j].scores.at("concept"),
                        data.images[j].direct_labels.contains("concept"), j});
    }
    const RateBundle rates =
        RatesFromConfusion(ConfusionAtThreshold(scores, threshold));
    SweepRow row;
    row.prevalence = prevalences[i];
    row.positives = PositiveCount(n, prevalences[i]);
    row.negatives = n - row.positives;
    row.ap = AveragePrecision(scores);
    row.tpr = rates.tpr;
    row.fpr = rates.fpr;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace disparity_audit
