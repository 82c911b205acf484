#pragma once

// Fixed-width two-table text report and the results JSON document.

#include <string>
#include <vector>

#include "json.hpp"
#include "leakguard/audit.hpp"
#include "leakguard/engine.hpp"

namespace leakguard {

inline constexpr int kResultsSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

/// Display label for a metric key ("brier@294" -> "Brier(t=294)").
std::string metric_label(const MetricValue& metric);

/// Number of terminal columns taken by a UTF-8 string.
std::size_t display_width(const std::string& text);

std::string render_report(const EvaluationResult& result);

/// Everything except the config echo and timing, which the caller adds.
nlohmann::ordered_json results_json(const EvaluationResult& result);

nlohmann::ordered_json findings_json(const std::vector<AuditFinding>& findings);

std::string hex64(std::uint64_t value);

}  // namespace leakguard
