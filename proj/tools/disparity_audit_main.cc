// Command-line front end for the disparity audit pipeline.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "disparity_audit/csv.h"
#include "disparity_audit/pipeline.h"
#include "disparity_audit/synth.h"

namespace da = disparity_audit;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInvariant = 4;

struct CommonFlags {
  std::string config;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
  std::optional<std::size_t> jobs;
};

void AddCommonFlags(CLI::App* app, CommonFlags& flags, bool config_required) {
  auto* config = app->add_option("--config", flags.config, "Run configuration (JSON)");
  if (config_required) config->required();
  app->add_option("--output", flags.output, "Output directory");
  app->add_option("--seed", flags.seed, "Seed, overrides the config");
  app->add_option("--preset", flags.preset, "Evaluation preset: baseline, v1, v2, v3, reliable");
  app->add_option("--jobs", flags.jobs, "Worker threads");
}

da::RunConfig LoadConfig(const CommonFlags& flags) {
  da::ConfigOverrides overrides;
  overrides.preset = flags.preset;
  overrides.seed = flags.seed;
  overrides.jobs = flags.jobs;
  if (!flags.output.empty()) overrides.output = flags.output;
  return da::RunStage("config", [&] { return da::LoadRunConfig(flags.config, overrides); });
}

// Opens <output>/<name>, or returns nullptr when no output directory was
// given so the caller writes to stdout.
std::unique_ptr<std::ofstream> OpenOutput(const std::string& output, const std::string& name) {
  if (output.empty()) return nullptr;
  std::filesystem::create_directories(output);
  auto out = std::make_unique<std::ofstream>(std::filesystem::path(output) / name,
                                             std::ios::binary);
  if (!*out) throw da::DataError("[write] cannot write " + name);
  return out;
}

std::ostream& Sink(const std::unique_ptr<std::ofstream>& file) {
  return file ? static_cast<std::ostream&>(*file) : std::cout;
}

int AssignGroupsCommand(const CommonFlags& flags) {
  const da::RunConfig config = LoadConfig(flags);
  const da::LoadedInputs inputs = da::RunStage("load", [&] { return da::LoadInputs(config); });
  const da::GroupingResult grouping =
      da::RunStage("assign-groups", [&] { return da::AssignGroups(config, inputs.dataset); });
  auto out = OpenOutput(flags.output, "assignments.csv");
  da::WriteAssignmentsCsv(Sink(out), grouping.assignments);
  auto summary = OpenOutput(flags.output, "assignment_summary.json");
  if (summary) {
    *summary << grouping.summary.ToJson().dump(2) << "\n";
  } else {
    std::cerr << grouping.summary.ToJson().dump(2) << "\n";
  }
  return 0;
}

int MapCommand(const CommonFlags& flags) {
  const da::RunConfig config = LoadConfig(flags);
  const da::LoadedInputs inputs = da::RunStage("load", [&] { return da::LoadInputs(config); });
  const da::TargetResult targets =
      da::RunStage("map", [&] { return da::BuildTargets(config, inputs.dataset); });
  auto out = OpenOutput(flags.output, "targets.csv");
  std::ostream& sink = Sink(out);
  da::csv::WriteRow(sink, {"image_id", "concepts"});
  for (const auto& [image_id, concepts] : targets.targets) {
    std::string joined;
    for (const da::ConceptId& c : concepts) {
      if (!joined.empty()) joined += ';';
      joined += c.key();
    }
    da::csv::WriteRow(sink, {image_id, joined});
  }
  if (!targets.unmapped_labels.empty()) {
    std::cerr << targets.unmapped_labels.size() << " unmapped labels\n";
  }
  return 0;
}

int SamplePlanCommand(const CommonFlags& flags) {
  const da::RunConfig config = LoadConfig(flags);
  const da::Evaluation evaluation = da::Evaluate(config);
  auto out = OpenOutput(flags.output, "plan.csv");
  da::WritePlanCsv(Sink(out), evaluation.plan);
  return 0;
}

int EvaluateCommand(const CommonFlags& flags) {
  const da::RunConfig config = LoadConfig(flags);
  const da::Evaluation evaluation = da::Evaluate(config);
  auto out = OpenOutput(flags.output, "results.csv");
  da::WriteResultsCsv(Sink(out), evaluation.results);
  return 0;
}

int RunCommand(const CommonFlags& flags) {
  const da::RunConfig config = LoadConfig(flags);
  if (config.output.empty()) {
    throw da::ConfigError("[config] run needs --output or an \"output\" entry");
  }
  const da::Evaluation evaluation = da::Run(config);
  std::cerr << "wrote " << evaluation.results.size() << " result rows to "
            << config.output.string() << "\n";
  return 0;
}

int CompareCommand(const std::string& a, const std::string& b, const std::string& output) {
  const auto results_a = da::RunStage("load", [&] { return da::LoadResultsCsv(a); });
  const auto results_b = da::RunStage("load", [&] { return da::LoadResultsCsv(b); });
  const auto rows =
      da::RunStage("compare", [&] { return da::CompareResults(results_a, results_b); });
  auto out = OpenOutput(output, "compare.csv");
  da::WriteCompareCsv(Sink(out), rows);
  return 0;
}

int ReportCommand(const std::string& results_path, const std::string& manifest_path,
                  std::size_t top_n, const std::string& output) {
  const auto results = da::RunStage("load", [&] { return da::LoadResultsCsv(results_path); });
  std::optional<nlohmann::ordered_json> manifest;
  if (!manifest_path.empty()) {
    manifest = da::RunStage("load", [&] {
      std::ifstream in(manifest_path);
      if (!in) throw da::DataError("cannot open '" + manifest_path + "'");
      try {
        return nlohmann::ordered_json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw da::DataError("'" + manifest_path + "': " + e.what());
      }
    });
  }
  const std::string report =
      da::BuildReport(results, top_n, manifest ? &*manifest : nullptr);
  auto out = OpenOutput(output, "report.txt");
  Sink(out) << report;
  if (!output.empty()) {
    da::WritePlotData(results, std::filesystem::path(output) / "plotdata");
  }
  return 0;
}

int SynthCommand(const CommonFlags& flags) {
  if (flags.output.empty()) throw da::ConfigError("[config] synth needs --output");
  da::ScenarioSpec spec =
      da::RunStage("config", [&] { return da::ScenarioSpec::Load(flags.config); });
  if (flags.seed) spec.seed = *flags.seed;
  const da::SyntheticDataset dataset =
      da::RunStage("synth", [&] { return da::Generate(spec); });
  const std::filesystem::path dir = flags.output;
  da::WriteSyntheticDataset(spec, dataset, dir);

  // A run configuration that evaluates the generated data as-is.
  nlohmann::ordered_json run = {
      {"preset", flags.preset.value_or("reliable")},
      {"data",
       {{"annotations", "annotations.jsonl"},
        {"predictions", "predictions.jsonl"},
        {"drop_unlabeled_images", false}}},
      {"groups", {{"method", "metadata"}, {"region", "region.json"}, {"metadata_key", "group"}}},
      {"sampling", {{"seed", spec.seed}}},
      {"output", "out"}};
  std::ofstream out(dir / "run.json", std::ios::binary);
  if (!out) throw da::DataError("[write] cannot write run.json");
  out << run.dump(2) << "\n";
  std::cerr << "wrote " << dataset.images.size() << " images to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disaggregated performance audit for multi-label image classifiers"};
  app.set_version_flag("--version", std::string(da::kToolVersion));
  app.require_subcommand(1);

  CommonFlags flags;
  auto* assign = app.add_subcommand("assign-groups", "Assign each image to a group or an exclusion reason");
  AddCommonFlags(assign, flags, true);
  auto* map = app.add_subcommand("map", "Map dataset labels to model classes");
  AddCommonFlags(map, flags, true);
  auto* plan = app.add_subcommand("sample-plan", "Show per-concept pool sizes and sampling budgets");
  AddCommonFlags(plan, flags, true);
  auto* evaluate = app.add_subcommand("evaluate", "Compute disparity estimates and write results.csv");
  AddCommonFlags(evaluate, flags, true);
  auto* run = app.add_subcommand("run", "Full pipeline with manifest, plot data and report");
  AddCommonFlags(run, flags, true);
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset from a scenario file");
  AddCommonFlags(synth, flags, true);

  std::string compare_a, compare_b, compare_output;
  auto* compare = app.add_subcommand("compare", "Per-concept deltas between two results files");
  compare->add_option("results_a", compare_a)->required()->check(CLI::ExistingFile);
  compare->add_option("results_b", compare_b)->required()->check(CLI::ExistingFile);
  compare->add_option("--output", compare_output, "Output directory");

  std::string report_results, report_manifest, report_output;
  std::size_t top_n = 10;
  auto* report = app.add_subcommand("report", "Summarize a results file");
  report->add_option("results", report_results)->required()->check(CLI::ExistingFile);
  report->add_option("--manifest", report_manifest, "manifest.json for exclusion counts");
  report->add_option("--top-n", top_n, "Concepts listed per metric");
  report->add_option("--output", report_output, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*assign) return AssignGroupsCommand(flags);
    if (*map) return MapCommand(flags);
    if (*plan) return SamplePlanCommand(flags);
    if (*evaluate) return EvaluateCommand(flags);
    if (*run) return RunCommand(flags);
    if (*synth) return SynthCommand(flags);
    if (*compare) return CompareCommand(compare_a, compare_b, compare_output);
    if (*report) return ReportCommand(report_results, report_manifest, top_n, report_output);
  } catch (const da::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const da::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const da::InvariantViolation& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return 0;
}
