#pragma once

// Report files: results.csv, results.json and shiftsweep.csv.
//
// results.csv (schema 1): one line per repeat plus "mean" and "std" lines
// per (dataset, method). Empty numeric fields mean "not available" (a
// failed repeat, or tau for a non-selective method).

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shiftuq/harness.hpp"

namespace shiftuq::report {

inline constexpr int kSchemaVersion = 1;

std::string library_version();

/// Shortest round-trip decimal; empty for NaN.
std::string format_number(double v);

std::string results_csv(const std::vector<harness::ReportRow>& rows);
std::string sweep_csv(const std::vector<harness::SweepPoint>& points);

nlohmann::json to_json(const std::vector<harness::ReportRow>& rows, const std::string& config_echo,
                       const std::vector<harness::SweepPoint>* sweep = nullptr);
std::vector<harness::ReportRow> rows_from_json(const nlohmann::json& j);
std::vector<harness::SweepPoint> sweep_from_json(const nlohmann::json& j);

/// Writes results.csv and results.json (and shiftsweep.csv when `sweep` is
/// given) into `dir`, creating it. Output is byte-deterministic.
void emit_report(const std::vector<harness::ReportRow>& rows, const std::filesystem::path& dir,
                 const std::string& config_echo,
                 const std::vector<harness::SweepPoint>* sweep = nullptr);

/// Human-readable summary table (means with std).
std::string summary_table(const std::vector<harness::ReportRow>& rows);

}  // namespace shiftuq::report
