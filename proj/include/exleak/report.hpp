#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exleak/audit.hpp"

namespace exleak {

enum class ReportFormat { Json, Csv, Svg };

std::vector<ReportFormat> parse_formats(std::string_view list);

/// Canonical JSON: sorted keys, shortest round-trip floats, inf as "inf".
nlohmann::json to_json(const AuditReport& report);
nlohmann::json to_json(const ComparisonReport& report);
std::string dump_canonical(const nlohmann::json& j);

/// protocol,classifier,subject,fold,accuracy
std::string accuracies_csv(const AuditReport& report);

/// Box plot of fold accuracies for one protocol, one box per classifier,
/// with a dashed chance line.
std::string boxplot_svg(const AuditReport& report, Protocol protocol);

/// Writes report.json, accuracies.csv and boxplot_<protocol>.svg as
/// requested; returns the paths written. Throws IoError.
std::vector<std::filesystem::path> emit_report(const AuditReport& report, const std::filesystem::path& directory,
                                               const std::vector<ReportFormat>& formats);
std::vector<std::filesystem::path> emit_report(const ComparisonReport& report, const std::filesystem::path& directory,
                                               const std::vector<ReportFormat>& formats);

/// Human-readable tables for the terminal.
std::string verdict_table(const AuditReport& report);
std::string delta_table(const ComparisonReport& report);

}  // namespace exleak
