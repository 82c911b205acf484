#pragma once

// Multi-site leakage demonstration: site-wise scaling on all rows versus
// fold-local normalization under leave-one-site-out CV.

#include <cstdint>
#include <vector>

#include "leakguard/dataset.hpp"
#include "leakguard/resampling.hpp"
#include "leakguard/stats.hpp"

namespace leakguard {

struct SimConfig {
    std::size_t n_sims = 100;
    std::size_t n_sites = 10;
    std::size_t n_per_site = 100;
    double offset_mean = 5.0;
    double offset_sd = 5.0;
    double signal = 2.0;
    std::size_t trees = 50;
    std::uint64_t seed = 2025;
    /// Runs executed concurrently; results do not depend on it.
    std::size_t workers = 1;
};

/// Throws ConfigError for non-positive counts or fewer than two sites.
void validate_sim_config(const SimConfig& config);

struct SimRun {
    std::size_t run = 0;
    std::uint64_t seed = 0;
    /// Mean held-site AUC after site-wise scaling on all rows.
    double leaky_auc = 0.0;
    /// Test-split AUC of the guarded pipeline (stratified 80/20 holdout,
    /// recipe and forest fit on the training rows only).
    double guarded_auc = 0.0;
    /// Mean held-site AUC of the guarded recipe on the leaky arm's splits.
    double guarded_site_auc = 0.0;
};

struct SimSummary {
    double leaky_mean = 0.0;
    double leaky_sd = 0.0;
    double guarded_mean = 0.0;
    double guarded_sd = 0.0;
    double guarded_site_mean = 0.0;
    double guarded_site_sd = 0.0;
    /// Paired leaky - guarded differences.
    stats::TInterval inflation{};
    /// Paired leaky - guarded_site differences.
    stats::TInterval site_inflation{};
};

struct SimResult {
    std::vector<SimRun> runs;
    SimSummary summary;
};

/// Columns: site (categorical predictor until a recipe reassigns it),
/// outcome (Control, Case) and x.
Dataset gen_site_data(std::uint64_t seed, const SimConfig& config);

/// Leave-one-site-out plan shared by both arms of a run.
std::vector<ResampleSplit> site_splits(const Dataset& data, std::uint64_t seed, const SimConfig& config);

double leaky_arm_auc(const Dataset& data, const std::vector<ResampleSplit>& splits, std::uint64_t seed,
                     const SimConfig& config);
double guarded_arm_auc(const Dataset& data, const std::vector<ResampleSplit>& splits, std::uint64_t seed,
                       const SimConfig& config);
/// Full guarded pipeline: holdout split, recipe and forest fit on the
/// training rows, AUC on the test rows.
double guarded_holdout_auc(const Dataset& data, std::uint64_t seed, const SimConfig& config);

SimRun run_leakage_iteration(std::uint64_t seed, const SimConfig& config);

/// Run r uses seed mix64(config.seed, r). Needs n_sims >= 2.
SimResult run_leakage_study(const SimConfig& config);

SimSummary summarize_runs(const std::vector<SimRun>& runs);

}  // namespace leakguard
