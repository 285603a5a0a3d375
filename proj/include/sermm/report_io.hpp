#pragma once

// JSON scenario reports and plain-text comparison tables.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "sermm/experiment.hpp"

namespace sermm {

inline constexpr std::string_view kReportFormat = "sermm-scenario-report";
inline constexpr int kReportFormatVersion = 1;

std::string report_to_json(const ScenarioReport& report);
ScenarioReport report_from_json(std::string_view text);
void save_report(const std::filesystem::path& path, const ScenarioReport& report);
ScenarioReport load_report(const std::filesystem::path& path);

/// File-name friendly scenario label ("speech+articulatory" stays as is).
std::string report_file_stem(const Scenario& scenario);

std::string comparison_to_json(const ComparisonTable& table);
/// Accuracy column plus deltas to the best uni- and bi-modal rows.
std::string format_comparison(const ComparisonTable& table);

}  // namespace sermm
