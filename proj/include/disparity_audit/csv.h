#ifndef DISPARITY_AUDIT_CSV_H_
#define DISPARITY_AUDIT_CSV_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace disparity_audit::csv {

using Row = std::vector<std::string>;

// RFC 4180 quoting: fields containing a comma, quote or newline are quoted.
void WriteRow(std::ostream& out, const Row& row);
std::vector<Row> Parse(std::istream& in);
std::vector<Row> ReadFile(const std::filesystem::path& path);

// Shortest round-trip representation of a double ("0.8333333333333334").
std::string FormatDouble(double value);
double ParseDouble(const std::string& text);

}  // namespace disparity_audit::csv

#endif  // DISPARITY_AUDIT_CSV_H_
