#ifndef DISPARITY_AUDIT_SYNTH_H_
#define DISPARITY_AUDIT_SYNTH_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "disparity_audit/core_data.h"
#include "json.hpp"

namespace disparity_audit {

// Scores are logistic(Normal(mu, sigma)) for each class.
struct ScoreLaw {
  double prevalence = 0.1;
  double mu_pos = 1.0;
  double sigma_pos = 1.0;
  double mu_neg = 0.0;
  double sigma_neg = 1.0;
};

struct SyntheticGroup {
  std::string name;
  std::uint64_t n = 0;
};

struct SyntheticConcept {
  std::string concept_id;
  std::map<std::string, ScoreLaw> laws;  // by group name
};

struct ScenarioSpec {
  std::uint64_t seed = 0;
  std::vector<SyntheticGroup> groups;
  std::vector<SyntheticConcept> concepts;

  // Throws ConfigError on prevalence outside (0, 1), sigma <= 0, n < 1,
  // missing laws, or a (concept, group) that would round to zero positives.
  void Validate() const;

  static ScenarioSpec FromJson(const nlohmann::json& json);
  static ScenarioSpec Load(const std::filesystem::path& path);
  nlohmann::ordered_json ToJson() const;
};

// round(n * prevalence), half away from zero.
std::uint64_t PositiveCount(std::uint64_t n, double prevalence);

struct SyntheticDataset {
  std::vector<AnnotatedImage> images;
  std::vector<GroupAssignment> assignments;
  std::vector<PredictionRecord> predictions;
};

// Images are "<group>-<index>" with metadata {"group": <group>} and their
// positive concepts as direct labels. Exactly PositiveCount(n, prevalence)
// positives per (concept, group); labels are independent across concepts.
SyntheticDataset Generate(const ScenarioSpec& spec);

// Writes annotations.jsonl, predictions.jsonl, assignments.csv, region.json
// (identity group map for metadata key "group") and scenario.json.
void WriteSyntheticDataset(const ScenarioSpec& spec,
                           const SyntheticDataset& dataset,
                           const std::filesystem::path& directory);

double Logistic(double x);
double StandardNormalCdf(double x);

// AUC of Normal(mu_pos, sigma_pos) against Normal(mu_neg, sigma_neg); the
// logistic squash is monotone so the same value holds for squashed scores.
double ClosedFormAuc(double mu_pos, double sigma_pos, double mu_neg,
                     double sigma_neg);

struct SweepRow {
  double prevalence = 0.0;
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
  std::optional<double> ap;
  std::optional<double> tpr;
  std::optional<double> fpr;
};

// One freshly generated single-group pool of `n` rows per prevalence, all
// sharing `law`'s score distributions (its prevalence field is ignored);
// TPR/FPR use the fixed `threshold`.
std::vector<SweepRow> PrevalenceSweep(const ScoreLaw& law, std::uint64_t n,
                                      std::span<const double> prevalences,
                                      double threshold, std::uint64_t seed);

}  // namespace disparity_audit

#endif  // DISPARITY_AUDIT_SYNTH_H_
