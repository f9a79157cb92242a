#include "disparity_audit/pipeline.h"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include "disparity_audit/csv.h"
#include "disparity_audit/log.h"
#include "disparity_audit/metrics.h"
#include "disparity_audit/rng.h"

namespace disparity_audit {
namespace {

using nlohmann::ordered_json;

constexpr char kNoLabelsReason[] = "NoLabels";

struct ConceptOutcome {
  ConceptId concept_id;
  std::optional<SkippedConcept> skipped;
  // metric -> group -> per-bootstrap values
  std::map<Metric, std::map<std::string, MetricStream>> streams;
  std::map<Metric, std::map<std::string, std::optional<double>>> full_sample;
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> draw_sizes;
  std::optional<ordered_json> threshold;
  std::vector<PlanRow> plan_rows;
};

std::uint64_t SplitSeed(std::uint64_t seed, const ConceptId& concept_id,
                        const std::string& group) {
  std::uint64_t h = StreamRng::Combine(seed, Fnv1a64("validation-split"));
  h = StreamRng::Combine(h, Fnv1a64(concept_id.key()));
  return StreamRng::Combine(h, Fnv1a64(group));
}

GroupPool PoolFromRows(const std::vector<ScoredRow>& rows) {
  GroupPool pool;
  for (const ScoredRow& row : rows) {
    (row.positive ? pool.positives : pool.negatives).push_back(row);
  }
  return pool;
}

std::optional<ThresholdChoice> TrySelectThreshold(const std::vector<ScoredRow>& rows) {
  try {
    return SelectThreshold(ToLabeledScores(rows));
  } catch (const DataError&) {
    return std::nullopt;
  }
}

ordered_json ThresholdJson(const std::optional<ThresholdChoice>& choice) {
  if (!choice) return ordered_json{{"threshold", nullptr}, {"validation_f1", nullptr}};
  return ordered_json{{"threshold", choice->threshold}, {"validation_f1", choice->f1}};
}

std::vector<PlanRow> PlanRows(const ConceptEvalTable& table,
                              const std::optional<SamplingPlan>& plan,
                              const std::string& status) {
  std::vector<PlanRow> rows;
  for (const auto& [group, pool] : table.groups) {
    PlanRow row{table.concept_id.key(), group, pool.positives.size(),
                pool.negatives.size(), 0, 0, status};
    if (plan && plan->mode == SamplingMode::kReliable) {
      row.draw_positives = plan->budget.positives;
      row.draw_negatives = plan->budget.negatives;
    } else if (plan) {
      row.draw_positives = pool.positives.size();
      row.draw_negatives = pool.negatives.size();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

ConceptOutcome EvaluateConcept(const RunConfig& config, const ConceptEvalTable& table,
                               const std::vector<Metric>& metrics) {
  ConceptOutcome outcome;
  outcome.concept_id = table.concept_id;
  const bool needs_threshold =
      std::any_of(metrics.begin(), metrics.end(), NeedsThreshold);

  ConceptEvalTable eval;
  eval.concept_id = table.concept_id;
  std::map<std::string, std::optional<double>> thresholds;
  if (needs_threshold) {
    std::map<std::string, std::vector<ScoredRow>> validation;
    for (const auto& [group, pool] : table.groups) {
      const std::vector<ScoredRow> rows = pool.AllRows();
      ValidationTestSplit split = SplitValidationTest(
          rows, config.validation_fraction, SplitSeed(config.seed, table.concept_id, group));
      eval.groups[group] = PoolFromRows(split.test);
      validation[group] = std::move(split.validation);
    }
    if (config.threshold_scope == ThresholdScope::kPooled) {
      std::vector<ScoredRow> pooled;
      for (const auto& [group, rows] : validation) {
        pooled.insert(pooled.end(), rows.begin(), rows.end());
      }
      const auto choice = TrySelectThreshold(pooled);
      for (const auto& [group, rows] : validation) {
        thresholds[group] = choice ? std::optional(choice->threshold) : std::nullopt;
      }
      outcome.threshold = ThresholdJson(choice);
    } else {
      ordered_json per_group = ordered_json::object();
      for (const auto& [group, rows] : validation) {
        const auto choice = TrySelectThreshold(rows);
        thresholds[group] = choice ? std::optional(choice->threshold) : std::nullopt;
        per_group[group] = ThresholdJson(choice);
      }
      outcome.threshold = per_group;
    }
  } else {
    eval.groups = table.groups;
  }

  std::optional<SamplingPlan> plan;
  try {
    plan = config.sampling_mode == SamplingMode::kReliable
               ? MakeReliablePlan(eval, config.ratio, config.seed, config.bootstraps)
               : MakeBaselinePlan(eval, config.seed, config.bootstraps);
  } catch (const DataError& e) {
    outcome.skipped = SkippedConcept{table.concept_id.key(), "sampling", e.what()};
    outcome.plan_rows = PlanRows(eval, std::nullopt, std::string("skipped: ") + e.what());
    return outcome;
  }
  outcome.plan_rows = PlanRows(eval, plan, "planned");

  for (const Metric m : metrics) {
    for (const auto& [group, pool] : eval.groups) {
      outcome.streams[m][group].resize(config.bootstraps);
    }
  }
  for (std::uint64_t b = 0; b < config.bootstraps; ++b) {
    for (const BootstrapDraw& draw : DrawBootstrap(eval, *plan, b)) {
      const std::vector<LabeledScore> rows = DrawRows(eval.Pool(draw.group), draw);
      for (const Metric m : metrics) {
        outcome.streams[m][draw.group][b] = EvaluateMetric(m, rows, thresholds[draw.group]);
      }
    }
  }
  for (const auto& [group, pool] : eval.groups) {
    const std::vector<LabeledScore> rows = ToLabeledScores(pool.AllRows());
    for (const Metric m : metrics) {
      outcome.full_sample[m][group] = EvaluateMetric(m, rows, thresholds[group]);
    }
    outcome.draw_sizes[group] =
        plan->mode == SamplingMode::kReliable
            ? std::pair{plan->budget.positives, plan->budget.negatives}
            : std::pair<std::uint64_t, std::uint64_t>{pool.positives.size(),
                                                      pool.negatives.size()};
  }
  return outcome;
}

template <typename Fn>
void ParallelFor(std::size_t count, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

std::optional<double> Difference(const std::optional<double>& a,
                                 const std::optional<double>& b) {
  if (!a || !b) return std::nullopt;
  return *a - *b;
}

struct HitRateGroup {
  std::vector<bool> hits;
};

std::vector<MetricEstimate> HitRateEstimates(
    const RunConfig& config, const GroupingResult& grouping,
    const LoadedInputs& inputs, const TargetResult& targets,
    ordered_json& hit_counts) {
  std::map<std::string, HitRateGroup> groups;
  for (const std::string& g : grouping.taxonomy) groups[g];
  std::uint64_t no_targets = 0;
  std::uint64_t too_few_scores = 0;
  for (const GroupAssignment& a : grouping.assignments) {
    if (!a.is_assigned()) continue;
    const auto t = targets.targets.find(a.image_id());
    if (t == targets.targets.end() || t->second.empty()) {
      ++no_targets;
      continue;
    }
    const PredictionRecord* record = inputs.predictions.Find(a.image_id());
    if (record == nullptr || record->scores.size() < config.k) {
      ++too_few_scores;
      continue;
    }
    groups[a.group()].hits.push_back(IsHitAtK(record->scores, t->second, config.k));
  }
  if (no_targets + too_few_scores > 0) {
    log::Warn("hit_rate: excluded " + std::to_string(no_targets) +
              " images without targets and " + std::to_string(too_few_scores) +
              " images with fewer than k scores");
  }
  hit_counts = ordered_json{{"excluded_no_targets", no_targets},
                            {"excluded_too_few_scores", too_few_scores},
                            {"evaluated", ordered_json::object()}};

  std::map<std::string, MetricStream> streams;
  std::map<std::string, std::optional<double>> full;
  for (const auto& [group, data] : groups) {
    hit_counts["evaluated"][group] = data.hits.size();
    const std::size_t n = data.hits.size();
    MetricStream& stream = streams[group];
    stream.resize(config.bootstraps);
    if (n == 0) continue;
    const auto total = std::count(data.hits.begin(), data.hits.end(), true);
    full[group] = static_cast<double>(total) / static_cast<double>(n);
    for (std::uint64_t b = 0; b < config.bootstraps; ++b) {
      StreamRng rng(config.seed, "hit_rate", group, b);
      std::uint64_t hits = 0;
      for (std::size_t i = 0; i < n; ++i) hits += data.hits[rng.Below(n)] ? 1 : 0;
      stream[b] = static_cast<double>(hits) / static_cast<double>(n);
    }
  }
  std::vector<MetricEstimate> out;
  for (const auto& [a, b] : grouping.pairs) {
    MetricEstimate e = PerConceptDisparity(streams[a], streams[b]);
    e.metric = MetricName(Metric::kHitRate);
    e.concept_id = kAggregateConcept;
    e.group_a = a;
    e.group_b = b;
    e.full_sample = Difference(full[a], full[b]);
    e.n_pos_per_group = {groups[a].hits.size(), groups[b].hits.size()};
    out.push_back(std::move(e));
  }
  return out;
}

void WriteFile(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
}

}  // namespace

LoadedInputs LoadInputs(const RunConfig& config) {
  LoadedInputs inputs;
  Dataset full(LoadAnnotations(config.annotations, config.format));
  inputs.predictions = LoadPredictions(config.predictions, full);
  inputs.validation = ValidateDataset(full, inputs.predictions);
  if (!config.drop_unlabeled_images) {
    inputs.dataset = std::move(full);
    return inputs;
  }
  std::vector<AnnotatedImage> kept;
  for (const AnnotatedImage& image : full.images()) {
    if (image.HasLabels()) {
      kept.push_back(image);
    } else {
      inputs.dropped_unlabeled.push_back(image.image_id);
    }
  }
  inputs.dataset = Dataset(std::move(kept));
  return inputs;
}

GroupingResult AssignGroups(const RunConfig& config, const Dataset& dataset) {
  GroupingResult result;
  std::optional<GroupTermConfig> terms;
  std::optional<RegionGroupConfig> region;
  if (config.group_method == GroupMethod::kMetadata) {
    region = RegionGroupConfig::Load(config.region);
    std::set<std::string> groups;
    for (const auto& [country, group] : region->country_to_group) groups.insert(group);
    result.taxonomy.assign(groups.begin(), groups.end());
  } else {
    if (config.terms_source == "builtin:synset_gender") {
      terms = BuiltinSynsetGenderTerms();
    } else if (config.terms_source == "builtin:caption_gender") {
      terms = BuiltinCaptionGenderTerms();
    } else if (config.terms_source.rfind("builtin:", 0) == 0) {
      throw ConfigError("unknown builtin term list '" + config.terms_source + "'");
    } else {
      terms = GroupTermConfig::Load(config.terms_source);
    }
    if (!config.apply_excluded_terms) terms = terms->WithoutExclusions();
    for (const auto& [group, t] : terms->groups) result.taxonomy.push_back(group);
  }
  if (!config.group_order.empty()) {
    for (const std::string& g : config.group_order) {
      if (std::find(result.taxonomy.begin(), result.taxonomy.end(), g) ==
          result.taxonomy.end()) {
        throw ConfigError("groups.order names unknown group '" + g + "'");
      }
    }
    if (config.group_order.size() != result.taxonomy.size()) {
      throw ConfigError("groups.order must list every configured group");
    }
    result.taxonomy = config.group_order;
  }
  if (config.group_pairs.empty()) {
    for (std::size_t i = 0; i < result.taxonomy.size(); ++i) {
      for (std::size_t j = i + 1; j < result.taxonomy.size(); ++j) {
        result.pairs.emplace_back(result.taxonomy[i], result.taxonomy[j]);
      }
    }
  } else {
    for (const auto& [a, b] : config.group_pairs) {
      for (const std::string& g : {a, b}) {
        if (std::find(result.taxonomy.begin(), result.taxonomy.end(), g) ==
            result.taxonomy.end()) {
          throw ConfigError("groups.pairs names unknown group '" + g + "'");
        }
      }
    }
    result.pairs = config.group_pairs;
  }
  if (result.pairs.empty()) throw ConfigError("need at least two groups to compare");

  for (const AnnotatedImage& image : dataset.images()) {
    switch (config.group_method) {
      case GroupMethod::kBoxes:
        result.assignments.push_back(AssignGroupFromBoxes(image, *terms, config.box_filter));
        break;
      case GroupMethod::kCaptions:
        result.assignments.push_back(AssignGroupFromCaptions(image, *terms));
        break;
      case GroupMethod::kMetadata:
        result.assignments.push_back(
            AssignGroupFromMetadata(image, *region, config.metadata_key));
        break;
    }
  }
  result.summary = SummarizeAssignments(result.assignments, result.taxonomy);
  return result;
}

TargetResult BuildTargets(const RunConfig& config, const Dataset& dataset) {
  TargetResult result;
  const ClassMapping mapping =
      config.mapping ? ClassMapping::Load(*config.mapping) : ClassMapping::Identity();
  result.mapping_name = mapping.name();
  std::set<std::string> unmapped;
  for (const AnnotatedImage& image : dataset.images()) {
    MappedLabels mapped =
        MapToModelClasses(image.AllLabels(), mapping, config.mapping_strictness);
    unmapped.insert(mapped.unmapped.begin(), mapped.unmapped.end());
    result.targets.emplace(image.image_id, std::move(mapped.concepts));
  }
  if (!unmapped.empty()) {
    log::Warn(std::to_string(unmapped.size()) + " dataset labels have no mapping in '" +
              mapping.name() + "' and were skipped");
  }
  result.unmapped_labels.assign(unmapped.begin(), unmapped.end());
  return result;
}

std::string ConfigHash(const nlohmann::json& resolved) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "fnv1a64:%016llx",
                static_cast<unsigned long long>(Fnv1a64(resolved.dump())));
  return buffer;
}

Evaluation Evaluate(const RunConfig& config) {
  Evaluation evaluation;
  const LoadedInputs inputs = RunStage("load", [&] { return LoadInputs(config); });
  GroupingResult grouping =
      RunStage("assign-groups", [&] { return AssignGroups(config, inputs.dataset); });
  const TargetResult targets =
      RunStage("map", [&] { return BuildTargets(config, inputs.dataset); });

  std::vector<SkippedConcept> skipped;
  std::vector<Metric> concept_metrics;
  for (const Metric m : config.metrics) {
    if (m != Metric::kHitRate) concept_metrics.push_back(m);
  }

  std::set<ConceptId> universe;
  RunStage("map", [&] {
    if (config.concepts) {
      for (const std::string& c : *config.concepts) universe.insert(CanonicalizeLabel(c));
    } else {
      for (const std::string& c : inputs.predictions.Concepts()) {
        universe.insert(CanonicalizeLabel(c));
      }
    }
  });

  std::map<ConceptId, ConceptEvalTable> tables;
  std::set<ConceptId> retained;
  std::vector<ConceptOutcome> outcomes;
  if (!concept_metrics.empty()) {
    RunStage("tables", [&] {
      for (const ConceptId& c : universe) {
        try {
          auto built = BuildConceptTables(grouping.assignments, targets.targets,
                                          inputs.predictions, {c}, grouping.taxonomy);
          tables.insert(built.begin(), built.end());
        } catch (const DataError& e) {
          skipped.push_back({c.key(), "tables", e.what()});
        }
      }
    });
    retained = RunStage("filter", [&] {
      return tables.empty() ? std::set<ConceptId>{}
                            : FilterRareConcepts(tables, config.min_per_group);
    });
    std::vector<const ConceptEvalTable*> to_evaluate;
    for (const auto& [c, table] : tables) {
      if (retained.contains(c)) {
        to_evaluate.push_back(&table);
        continue;
      }
      std::string counts;
      for (const auto& [g, pool] : table.groups) {
        if (!counts.empty()) counts += ", ";
        counts += g + "=" + std::to_string(pool.positives.size());
      }
      skipped.push_back({c.key(), "filter",
                         "fewer than " + std::to_string(config.min_per_group) +
                             " positives in some group (" + counts + ")"});
      for (PlanRow& row : PlanRows(table, std::nullopt, "skipped: rare concept")) {
        evaluation.plan.push_back(std::move(row));
      }
    }
    outcomes.resize(to_evaluate.size());
    RunStage("evaluate", [&] {
      ParallelFor(to_evaluate.size(), config.jobs, [&](std::size_t i) {
        outcomes[i] = EvaluateConcept(config, *to_evaluate[i], concept_metrics);
      });
    });
  }

  std::vector<MetricEstimate> estimates;
  ordered_json hit_counts;
  ordered_json thresholds = ordered_json::object();
  std::size_t evaluated = 0;
  for (const ConceptOutcome& o : outcomes) {
    for (const PlanRow& row : o.plan_rows) evaluation.plan.push_back(row);
    if (o.skipped) {
      skipped.push_back(*o.skipped);
      continue;
    }
    ++evaluated;
    if (o.threshold) thresholds[o.concept_id.key()] = *o.threshold;
  }
  RunStage("disparity", [&] {
    for (const Metric m : config.metrics) {
      if (m == Metric::kHitRate) {
        for (MetricEstimate& e : HitRateEstimates(config, grouping, inputs, targets, hit_counts)) {
          estimates.push_back(std::move(e));
        }
        continue;
      }
      for (const auto& [a, b] : grouping.pairs) {
        std::vector<ConceptStreams> streams;
        std::optional<double> full_a = 0.0;
        std::optional<double> full_b = 0.0;
        for (const ConceptOutcome& o : outcomes) {
          if (o.skipped) continue;
          streams.push_back({o.streams.at(m).at(a), o.streams.at(m).at(b)});
          const auto& fa = o.full_sample.at(m).at(a);
          const auto& fb = o.full_sample.at(m).at(b);
          full_a = full_a && fa ? std::optional(*full_a + *fa) : std::nullopt;
          full_b = full_b && fb ? std::optional(*full_b + *fb) : std::nullopt;
        }
        if (streams.empty()) continue;
        MetricEstimate e = AggregateDisparity(streams);
        e.metric = MetricName(m);
        e.group_a = a;
        e.group_b = b;
        const auto n = static_cast<double>(streams.size());
        if (full_a && full_b) e.full_sample = *full_a / n - *full_b / n;
        estimates.push_back(std::move(e));
      }
      for (const ConceptOutcome& o : outcomes) {
        if (o.skipped) continue;
        for (const auto& [a, b] : grouping.pairs) {
          MetricEstimate e =
              PerConceptDisparity(o.streams.at(m).at(a), o.streams.at(m).at(b));
          e.metric = MetricName(m);
          e.concept_id = o.concept_id.key();
          e.group_a = a;
          e.group_b = b;
          e.full_sample =
              Difference(o.full_sample.at(m).at(a), o.full_sample.at(m).at(b));
          e.n_pos_per_group = {o.draw_sizes.at(a).first, o.draw_sizes.at(b).first};
          e.n_neg_per_group = {o.draw_sizes.at(a).second, o.draw_sizes.at(b).second};
          if (!e.reliable) {
            log::Warn(std::string(MetricName(m)) + " for '" + o.concept_id.key() +
                      "': more than half of the bootstraps were undefined");
          }
          estimates.push_back(std::move(e));
        }
      }
    }
  });
  for (const MetricEstimate& e : estimates) {
    evaluation.results.push_back(ResultRecord::FromEstimate(e, config.evaluation_version));
  }

  std::sort(skipped.begin(), skipped.end(), [](const auto& x, const auto& y) {
    return std::tie(x.concept_id, x.stage) < std::tie(y.concept_id, y.stage);
  });
  ordered_json& manifest = evaluation.manifest;
  manifest["tool"] = kToolName;
  manifest["tool_version"] = kToolVersion;
  manifest["evaluation_version"] = config.evaluation_version;
  manifest["seed"] = config.seed;
  manifest["config_hash"] = ConfigHash(config.resolved);
  manifest["config"] = ordered_json::parse(config.resolved.dump());
  ordered_json counts;
  counts["images_total"] = inputs.dataset.size() + inputs.dropped_unlabeled.size();
  counts["images_dropped_unlabeled"] = inputs.dropped_unlabeled.size();
  counts["images_considered"] = inputs.dataset.size();
  counts["assignments"] = grouping.summary.ToJson();
  counts["concepts_scored"] = universe.size();
  counts["concepts_with_tables"] = tables.size();
  counts["concepts_retained"] = retained.size();
  counts["concepts_evaluated"] = evaluated;
  if (!hit_counts.is_null()) counts["hit_rate"] = hit_counts;
  manifest["counts"] = counts;
  manifest["validation"] = {
      {"images_without_labels", inputs.validation.images_without_labels.size()},
      {"concepts_with_coverage_gaps", inputs.validation.unscored.size()},
      {"zero_positive_concepts", inputs.validation.zero_positive_concepts}};
  manifest["mapping"] = {{"name", targets.mapping_name},
                         {"unmapped_labels", targets.unmapped_labels}};
  manifest["group_pairs"] = ordered_json::array();
  for (const auto& [a, b] : grouping.pairs) manifest["group_pairs"].push_back({a, b});
  manifest["thresholds"] = thresholds;
  manifest["skipped_concepts"] = ordered_json::array();
  for (const SkippedConcept& s : skipped) {
    manifest["skipped_concepts"].push_back(
        {{"concept", s.concept_id}, {"stage", s.stage}, {"reason", s.reason}});
  }
  evaluation.assignments = std::move(grouping.assignments);
  // Images dropped before grouping are listed with their own reason.
  evaluation.manifest["dropped_unlabeled"] = inputs.dropped_unlabeled;
  return evaluation;
}

void WriteExclusionsCsv(std::ostream& out, std::span<const GroupAssignment> assignments,
                        std::span<const std::string> dropped_unlabeled) {
  std::vector<csv::Row> rows;
  for (const std::string& id : dropped_unlabeled) rows.push_back({id, kNoLabelsReason});
  for (const GroupAssignment& a : assignments) {
    if (!a.is_assigned()) rows.push_back({a.image_id(), ExclusionReasonName(a.reason())});
  }
  std::sort(rows.begin(), rows.end());
  csv::WriteRow(out, {"image_id", "reason"});
  for (const csv::Row& row : rows) csv::WriteRow(out, row);
}

void WritePlanCsv(std::ostream& out, std::span<const PlanRow> plan) {
  std::vector<PlanRow> rows(plan.begin(), plan.end());
  std::sort(rows.begin(), rows.end(), [](const PlanRow& x, const PlanRow& y) {
    return std::tie(x.concept_id, x.group) < std::tie(y.concept_id, y.group);
  });
  csv::WriteRow(out, {"concept", "group", "pool_positives", "pool_negatives",
                      "draw_positives", "draw_negatives", "status"});
  for (const PlanRow& r : rows) {
    csv::WriteRow(out, {r.concept_id, r.group, std::to_string(r.pool_positives),
                        std::to_string(r.pool_negatives), std::to_string(r.draw_positives),
                        std::to_string(r.draw_negatives), r.status});
  }
}

Evaluation Run(const RunConfig& config) {
  if (config.output.empty()) throw ConfigError("[config] no output directory");
  Evaluation evaluation = Evaluate(config);
  RunStage("write", [&] {
    std::filesystem::create_directories(config.output);
    {
      std::ofstream out(config.output / "results.csv", std::ios::binary);
      if (!out) throw DataError("cannot write results.csv");
      WriteResultsCsv(out, evaluation.results);
    }
    const std::vector<std::string> plots =
        WritePlotData(evaluation.results, config.output / "plotdata");
    {
      std::ofstream out(config.output / "exclusions.csv", std::ios::binary);
      if (!out) throw DataError("cannot write exclusions.csv");
      std::vector<std::string> dropped =
          evaluation.manifest["dropped_unlabeled"].get<std::vector<std::string>>();
      WriteExclusionsCsv(out, evaluation.assignments, dropped);
    }
    evaluation.manifest.erase("dropped_unlabeled");
    ordered_json outputs = {"results.csv", "exclusions.csv", "report.txt"};
    for (const std::string& p : plots) outputs.push_back("plotdata/" + p);
    evaluation.manifest["outputs"] = outputs;
    WriteFile(config.output / "report.txt",
              BuildReport(evaluation.results, config.report_top_n, &evaluation.manifest));
    WriteFile(config.output / "manifest.json", evaluation.manifest.dump(2) + "\n");
  });
  return evaluation;
}

}  // namespace disparity_audit
