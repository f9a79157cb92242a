#include "disparity_audit/report.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "disparity_audit/csv.h"
#include "disparity_audit/errors.h"

namespace disparity_audit {
namespace {

const csv::Row kResultsHeader = {
    "metric",          "concept",         "group_a",        "group_b",
    "point",           "ci_low",          "ci_high",        "significant",
    "n_pos_per_group", "n_neg_per_group", "bootstraps_used", "evaluation_version",
    "full_sample"};

std::string FormatOptional(const std::optional<double>& value) {
  return value ? csv::FormatDouble(*value) : std::string();
}

std::optional<double> ParseOptional(const std::string& text) {
  if (text.empty()) return std::nullopt;
  return csv::ParseDouble(text);
}

std::string JoinCounts(const std::vector<std::uint64_t>& counts) {
  std::string out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i > 0) out += ';';
    out += std::to_string(counts[i]);
  }
  return out;
}

std::vector<std::uint64_t> SplitCounts(const std::string& text) {
  std::vector<std::uint64_t> out;
  if (text.empty()) return out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ';')) {
    try {
      out.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw DataError("bad per-group count '" + text + "'");
    }
  }
  return out;
}

std::string SafeName(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
  }
  return out;
}

std::string Fixed(const std::optional<double>& value) {
  if (!value) return "undefined";
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%+.4f", *value);
  return buffer;
}

using RowKey = std::tuple<std::string, std::string, std::string, std::string>;

RowKey KeyOf(const ResultRecord& r) {
  return {r.metric, r.concept_id, r.group_a, r.group_b};
}

}  // namespace

ResultRecord ResultRecord::FromEstimate(const MetricEstimate& estimate,
                                        const std::string& evaluation_version) {
  ResultRecord r;
  r.metric = estimate.metric;
  r.concept_id = estimate.concept_id;
  r.group_a = estimate.group_a;
  r.group_b = estimate.group_b;
  r.point = estimate.point;
  r.ci_low = estimate.ci_low;
  r.ci_high = estimate.ci_high;
  r.significant = IsSignificant(estimate);
  r.n_pos_per_group = estimate.n_pos_per_group;
  r.n_neg_per_group = estimate.n_neg_per_group;
  r.bootstraps_used = estimate.bootstraps_used;
  r.evaluation_version = evaluation_version;
  r.full_sample = estimate.full_sample;
  return r;
}

void WriteResultsCsv(std::ostream& out, std::span<const ResultRecord> records) {
  csv::WriteRow(out, kResultsHeader);
  for (const ResultRecord& r : records) {
    csv::WriteRow(out, {r.metric, r.concept_id, r.group_a, r.group_b,
                        FormatOptional(r.point), FormatOptional(r.ci_low),
                        FormatOptional(r.ci_high), r.significant ? "true" : "false",
                        JoinCounts(r.n_pos_per_group), JoinCounts(r.n_neg_per_group),
                        std::to_string(r.bootstraps_used), r.evaluation_version,
                        FormatOptional(r.full_sample)});
  }
}

std::vector<ResultRecord> ReadResultsCsv(std::istream& in) {
  const std::vector<csv::Row> rows = csv::Parse(in);
  if (rows.empty()) throw DataError("results CSV is empty");
  // Files without the trailing full_sample column are accepted.
  const csv::Row& header = rows[0];
  const bool has_full = header == kResultsHeader;
  if (!has_full && header != csv::Row(kResultsHeader.begin(), kResultsHeader.end() - 1)) {
    throw DataError("results CSV has an unexpected header");
  }
  std::vector<ResultRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const csv::Row& row = rows[i];
    if (row.size() != header.size()) {
      throw DataError("results CSV row " + std::to_string(i + 1) + " has " +
                      std::to_string(row.size()) + " fields");
    }
    ResultRecord r;
    r.metric = row[0];
    r.concept_id = row[1];
    r.group_a = row[2];
    r.group_b = row[3];
    r.point = ParseOptional(row[4]);
    r.ci_low = ParseOptional(row[5]);
    r.ci_high = ParseOptional(row[6]);
    if (row[7] != "true" && row[7] != "false") {
      throw DataError("significant must be true or false, got '" + row[7] + "'");
    }
    r.significant = row[7] == "true";
    r.n_pos_per_group = SplitCounts(row[8]);
    r.n_neg_per_group = SplitCounts(row[9]);
    r.bootstraps_used = SplitCounts(row[10]).empty() ? 0 : SplitCounts(row[10])[0];
    r.evaluation_version = row[11];
    if (has_full) r.full_sample = ParseOptional(row[12]);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ResultRecord> LoadResultsCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return ReadResultsCsv(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<CompareRow> CompareResults(std::span<const ResultRecord> a,
                                       std::span<const ResultRecord> b) {
  std::map<RowKey, const ResultRecord*> index_b;
  for (const ResultRecord& r : b) index_b[KeyOf(r)] = &r;
  std::map<RowKey, CompareRow> joined;
  for (const ResultRecord& ra : a) {
    const auto it = index_b.find(KeyOf(ra));
    if (it == index_b.end()) continue;
    const ResultRecord& rb = *it->second;
    CompareRow row{ra.metric, ra.concept_id, ra.group_a, ra.group_b,
                   ra.point, rb.point, false, std::nullopt};
    if (ra.point && rb.point) {
      row.sign_flip = (*ra.point > 0 && *rb.point < 0) || (*ra.point < 0 && *rb.point > 0);
      row.magnitude_delta = std::abs(*rb.point) - std::abs(*ra.point);
    }
    joined[KeyOf(ra)] = std::move(row);
  }
  if (joined.empty()) throw DataError("the two result sets share no concepts");
  std::vector<CompareRow> out;
  out.reserve(joined.size());
  for (auto& [key, row] : joined) out.push_back(std::move(row));
  return out;
}

void WriteCompareCsv(std::ostream& out, std::span<const CompareRow> rows) {
  csv::WriteRow(out, {"metric", "concept", "group_a", "group_b", "point_a", "point_b",
                      "sign_flip", "magnitude_delta"});
  for (const CompareRow& r : rows) {
    csv::WriteRow(out, {r.metric, r.concept_id, r.group_a, r.group_b,
                        FormatOptional(r.point_a), FormatOptional(r.point_b),
                        r.sign_flip ? "true" : "false", FormatOptional(r.magnitude_delta)});
  }
}

std::vector<ResultRecord> PlotSeries(std::span<const ResultRecord> records,
                                     const std::string& metric,
                                     const std::string& group_a,
                                     const std::string& group_b) {
  std::vector<ResultRecord> series;
  for (const ResultRecord& r : records) {
    if (r.metric == metric && r.group_a == group_a && r.group_b == group_b &&
        r.concept_id != kAggregateConcept && r.point) {
      series.push_back(r);
    }
  }
  std::sort(series.begin(), series.end(), [](const ResultRecord& x, const ResultRecord& y) {
    if (*x.point != *y.point) return *x.point < *y.point;
    return x.concept_id < y.concept_id;
  });
  return series;
}

std::vector<std::string> WritePlotData(std::span<const ResultRecord> records,
                                       const std::filesystem::path& directory) {
  std::set<std::tuple<std::string, std::string, std::string>> series_keys;
  for (const ResultRecord& r : records) {
    if (r.concept_id != kAggregateConcept) {
      series_keys.emplace(r.metric, r.group_a, r.group_b);
    }
  }
  std::filesystem::create_directories(directory);
  std::vector<std::string> written;
  for (const auto& [metric, a, b] : series_keys) {
    const std::string name = SafeName(metric) + "__" + SafeName(a) + "_vs_" + SafeName(b) + ".csv";
    std::ofstream out(directory / name, std::ios::binary);
    if (!out) throw DataError("cannot write '" + (directory / name).string() + "'");
    csv::WriteRow(out, {"concept", "point", "ci_low", "ci_high"});
    for (const ResultRecord& r : PlotSeries(records, metric, a, b)) {
      csv::WriteRow(out, {r.concept_id, FormatOptional(r.point), FormatOptional(r.ci_low),
                          FormatOptional(r.ci_high)});
    }
    written.push_back(name);
  }
  return written;
}

std::vector<ResultRecord> TopDisparities(std::span<const ResultRecord> records,
                                         const std::string& metric,
                                         std::size_t top_n) {
  std::vector<ResultRecord> rows;
  for (const ResultRecord& r : records) {
    if (r.metric == metric && r.concept_id != kAggregateConcept && r.point) {
      rows.push_back(r);
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRecord& x, const ResultRecord& y) {
    const double ax = std::abs(*x.point);
    const double ay = std::abs(*y.point);
    if (ax != ay) return ax > ay;
    return std::tie(x.concept_id, x.group_a, x.group_b) <
           std::tie(y.concept_id, y.group_a, y.group_b);
  });
  if (rows.size() > top_n) rows.resize(top_n);
  return rows;
}

std::string BuildReport(std::span<const ResultRecord> records, std::size_t top_n,
                        const nlohmann::ordered_json* manifest) {
  std::ostringstream out;
  out << "Disparity audit report\n";
  if (records.empty()) {
    out << "\nWARNING: no results to report.\n";
    return out.str();
  }
  out << "evaluation version: " << records.front().evaluation_version << "\n";
  std::vector<std::string> metrics;
  for (const ResultRecord& r : records) {
    if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end()) {
      metrics.push_back(r.metric);
    }
  }
  for (const std::string& metric : metrics) {
    out << "\n== " << metric << " ==\n";
    for (const ResultRecord& r : records) {
      if (r.metric != metric || r.concept_id != kAggregateConcept) continue;
      out << "  aggregate " << r.group_a << " - " << r.group_b << ": "
          << Fixed(r.point) << " [" << Fixed(r.ci_low) << ", " << Fixed(r.ci_high)
          << "]" << (r.significant ? " *" : "") << "\n";
    }
    const auto top = TopDisparities(records, metric, top_n);
    if (!top.empty()) out << "  largest per-concept disparities:\n";
    for (const ResultRecord& r : top) {
      out << "    " << r.concept_id << " (" << r.group_a << " - " << r.group_b
          << "): " << Fixed(r.point) << " [" << Fixed(r.ci_low) << ", "
          << Fixed(r.ci_high) << "]" << (r.significant ? " *" : "") << "\n";
    }
  }
  out << "\n* 95% percentile interval excludes zero\n";
  if (manifest != nullptr && manifest->contains("counts")) {
    const auto& counts = (*manifest)["counts"];
    out << "\n== exclusions ==\n";
    if (counts.contains("images_total")) {
      out << "  images: " << counts["images_total"].get<std::uint64_t>() << "\n";
    }
    if (counts.contains("images_dropped_unlabeled")) {
      out << "  dropped without labels: "
          << counts["images_dropped_unlabeled"].get<std::uint64_t>() << "\n";
    }
    if (counts.contains("assignments")) {
      const auto& a = counts["assignments"];
      for (const auto& [group, n] : a["assigned"].items()) {
        out << "  assigned " << group << ": " << n.get<std::uint64_t>() << "\n";
      }
      for (const auto& [reason, n] : a["excluded"].items()) {
        out << "  excluded " << reason << ": " << n.get<std::uint64_t>() << "\n";
      }
    }
    for (const char* key : {"concepts_scored", "concepts_with_tables",
                            "concepts_retained", "concepts_evaluated"}) {
      if (counts.contains(key)) {
        out << "  " << key << ": " << counts[key].get<std::uint64_t>() << "\n";
      }
    }
  }
  return out.str();
}

}  // namespace disparity_audit
