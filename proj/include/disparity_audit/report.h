#ifndef DISPARITY_AUDIT_REPORT_H_
#define DISPARITY_AUDIT_REPORT_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "disparity_audit/disparity.h"
#include "json.hpp"

namespace disparity_audit {

inline constexpr char kAggregateConcept[] = "aggregate";

// One row of results.csv.
struct ResultRecord {
  std::string metric;
  std::string concept_id;
  std::string group_a;
  std::string group_b;
  std::optional<double> point;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  bool significant = false;
  std::vector<std::uint64_t> n_pos_per_group;
  std::vector<std::uint64_t> n_neg_per_group;
  std::uint64_t bootstraps_used = 0;
  std::string evaluation_version;
  std::optional<double> full_sample;

  static ResultRecord FromEstimate(const MetricEstimate& estimate,
                                   const std::string& evaluation_version);
  bool operator==(const ResultRecord&) const = default;
};

// Columns: metric, concept, group_a, group_b, point, ci_low, ci_high,
// significant, n_pos_per_group, n_neg_per_group, bootstraps_used,
// evaluation_version, full_sample. Undefined values are empty fields;
// per-group counts are ';'-separated.
void WriteResultsCsv(std::ostream& out, std::span<const ResultRecord> records);
std::vector<ResultRecord> ReadResultsCsv(std::istream& in);
std::vector<ResultRecord> LoadResultsCsv(const std::filesystem::path& path);

struct CompareRow {
  std::string metric;
  std::string concept_id;
  std::string group_a;
  std::string group_b;
  std::optional<double> point_a;
  std::optional<double> point_b;
  // Strictly opposite signs.
  bool sign_flip = false;
  // |point_b| - |point_a|.
  std::optional<double> magnitude_delta;
};

// Inner join on (metric, concept, group_a, group_b), sorted by that key.
// Throws DataError when the runs share no row.
std::vector<CompareRow> CompareResults(std::span<const ResultRecord> a,
                                       std::span<const ResultRecord> b);
void WriteCompareCsv(std::ostream& out, std::span<const CompareRow> rows);

// Concept rows (aggregate excluded) for one metric and pair with a defined
// point, sorted by point, ties by concept.
std::vector<ResultRecord> PlotSeries(std::span<const ResultRecord> records,
                                     const std::string& metric,
                                     const std::string& group_a,
                                     const std::string& group_b);

// One CSV per (metric, pair): <dir>/<metric>__<a>_vs_<b>.csv with columns
// concept, point, ci_low, ci_high. Returns file names written.
std::vector<std::string> WritePlotData(std::span<const ResultRecord> records,
                                       const std::filesystem::path& directory);

// Per metric: aggregate rows, then the top_n concept rows by |point|
// (ties by concept key). `manifest`, when given, adds exclusion accounting.
std::string BuildReport(std::span<const ResultRecord> records, std::size_t top_n,
                        const nlohmann::ordered_json* manifest = nullptr);

// The concept rows BuildReport lists for `metric`, in order.
std::vector<ResultRecord> TopDisparities(std::span<const ResultRecord> records,
                                         const std::string& metric,
                                         std::size_t top_n);

}  // namespace disparity_audit

#endif  // DISPARITY_AUDIT_REPORT_H_
