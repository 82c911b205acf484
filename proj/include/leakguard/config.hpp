#pragma once

// Versioned JSON experiment configuration.

#include <optional>
#include <string>

#include "json.hpp"
#include "leakguard/engine.hpp"

namespace leakguard {

inline constexpr int kConfigSchemaVersion = 1;

struct ExperimentConfig {
    ExperimentSpec spec;
    std::string train_csv;
    std::string test_csv;
    /// Column hints for the audit-only command, which never opens the data.
    std::optional<Schema> columns;
    std::string results_path;
    std::string report_path;
};

/// Relative paths resolve against `base_dir`. Throws ConfigError for
/// unknown keys, wrong types or invalid values and UnsupportedError for
/// features outside the supported set.
ExperimentConfig parse_config(const nlohmann::ordered_json& doc, const std::string& base_dir = "");
ExperimentConfig load_config(const std::string& path);

/// Normalized echo with every default spelled out. Worker count and output
/// paths are left out because they do not affect any estimate.
nlohmann::ordered_json config_echo(const ExperimentConfig& config);

}  // namespace leakguard
