#pragma once

// Subcommand bodies behind the leakguard executable.
//
// Exit codes: 0 success, 1 fit failure, 2 configuration, data or
// unsupported-feature error, 3 audit rejection, 4 resampling guard error.

#include <exception>
#include <optional>
#include <ostream>
#include <string>

#include "leakguard/config.hpp"
#include "leakguard/simulation.hpp"

namespace leakguard {

enum ExitCode : int {
    kExitOk = 0,
    kExitFit = 1,
    kExitConfig = 2,
    kExitAudit = 3,
    kExitGuard = 4,
};

int exit_code_for(const std::exception& e);

/// Flag value, else the LEAKGUARD_WORKERS environment variable, else the
/// config value.
std::size_t resolve_workers(std::optional<std::size_t> flag, std::size_t config_value);

/// Reads a CSV and, for classification, turns a numeric label column into
/// a categorical one.
Dataset load_dataset(const std::string& path, const ExperimentSpec& spec);

struct RunOptions {
    std::optional<std::size_t> workers;
    std::string results_path;  // overrides output.results_path
    std::string report_path;   // overrides output.report_path
};

int cmd_run(const std::string& config_path, const RunOptions& options, std::ostream& out, std::ostream& err);

/// Audits the recipe against the column hints in data.columns. Never opens
/// a data file.
int cmd_audit(const std::string& config_path, std::ostream& out, std::ostream& err);

/// Prints the split plan as JSON with 1-based row numbers.
int cmd_splits(const std::string& config_path, const std::string& out_path, std::ostream& out, std::ostream& err);

struct SimulateOptions {
    SimConfig config;
    std::string json_path;
    std::string runs_csv;
    bool distributions = false;
};

int cmd_simulate_leakage(const SimulateOptions& options, std::ostream& out, std::ostream& err);

}  // namespace leakguard
