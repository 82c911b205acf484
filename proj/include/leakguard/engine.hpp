#pragma once

// Guarded resampling, grid tuning, selection and holdout evaluation.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "leakguard/audit.hpp"
#include "leakguard/dataset.hpp"
#include "leakguard/metrics.hpp"
#include "leakguard/model.hpp"
#include "leakguard/recipe.hpp"
#include "leakguard/resampling.hpp"

namespace leakguard {

/// Runs fn(0..n-1) on up to `workers` threads. The exception from the lowest
/// failing index is rethrown after every thread has joined.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

enum class EventClass { first, second };

/// Ordered parameter grid; the first parameter varies slowest.
using TuneGrid = std::vector<std::pair<std::string, std::vector<double>>>;

struct ModelEntry {
    ModelSpec spec;
    TuneGrid grid;
};

struct BootstrapSettings {
    bool enabled = true;
    std::size_t samples = 500;
    double level = 0.95;
};

struct ExperimentSpec {
    OutcomeSpec outcome;
    EventClass event_class = EventClass::second;
    RecipeSpec recipe;
    ResamplingSpec resampling;
    std::vector<ModelEntry> models;
    /// Empty picks roc_auc / accuracy / rmse / harrell_c by task.
    std::string primary_metric;
    BootstrapSettings bootstrap;
    std::uint64_t seed = 2025;
    double holdout = 0.2;
    /// Report max(C, 1 - C) for concordance metrics.
    bool standardize_c = false;
    double threshold = 0.5;
    std::size_t workers = 1;
};

std::string default_primary_metric(TaskKind task, std::size_t n_levels);

/// Throws ConfigError for an invalid metric, empty or unknown grids, or
/// model specs that do not fit the task.
void validate_experiment(const ExperimentSpec& spec);

/// One point of a model's tuning grid.
struct Candidate {
    std::size_t model = 0;
    std::size_t index = 0;
    ModelSpec spec;
    std::vector<std::pair<std::string, double>> tuned;
};

/// Cartesian expansion of a model's grid. A model without a grid yields a
/// single candidate.
std::vector<Candidate> expand_grid(const ModelEntry& entry, std::size_t model_index);
std::vector<Candidate> expand_all(const std::vector<ModelEntry>& models);

struct FoldRecord {
    std::string split;
    std::size_t split_index = 0;
    std::string model_id;
    std::size_t model = 0;
    std::size_t candidate = 0;
    std::vector<MetricValue> metrics;
    std::uint64_t recipe_fingerprint = 0;
    /// Set by leaky_resample_fit only.
    bool leaky = false;
    std::string tag;
    /// Assessment rows and the model's primary score on them (positive-class
    /// probability, numeric prediction or risk).
    std::vector<std::size_t> rows;
    std::vector<double> scores;
    std::vector<std::string> warnings;
};

/// Per-split recipe fit on analysis rows, applied to both sides; one record
/// per (candidate, split), ordered by candidate then split.
std::vector<FoldRecord> guarded_resample_fit(const ExperimentSpec& spec, const Dataset& train,
                                             const std::vector<ResampleSplit>& splits,
                                             const std::vector<Candidate>& candidates);

/// Tag type that must be passed explicitly to run the leaky contrast arm.
struct UnsafeLeakyOptIn {
    explicit UnsafeLeakyOptIn() = default;
};

/// Fits the recipe once on every row and reuses it across folds. Records are
/// tagged "LEAKY". Throws GuardError without the opt-in.
std::vector<FoldRecord> leaky_resample_fit(const ExperimentSpec& spec, const Dataset& data,
                                           const std::vector<ResampleSplit>& splits,
                                           const std::vector<Candidate>& candidates,
                                           std::optional<UnsafeLeakyOptIn> opt_in);

struct CvSummary {
    std::string model_id;
    std::size_t model = 0;
    std::size_t candidate = 0;
    std::vector<std::pair<std::string, double>> tuned;
    double mean = 0.0;  // over folds where the metric is defined
    double sd = 0.0;    // NaN with fewer than two defined folds
    std::size_t n_defined = 0;
    std::size_t n_folds = 0;
};

/// Summary of `metric` (a MetricValue key) for every candidate in order.
std::vector<CvSummary> summarize_folds(const std::vector<FoldRecord>& records,
                                       const std::vector<Candidate>& candidates, const std::string& metric);

/// Best mean; ties go to the lower sd, then the earlier entry. NaN means
/// rank last. Throws ConfigError on an empty list.
std::size_t select_best(const std::vector<CvSummary>& summaries, Direction direction);

struct TuneResult {
    std::vector<Candidate> candidates;
    std::vector<FoldRecord> records;
    std::vector<CvSummary> summaries;
    /// Index into `summaries` of each model's winning candidate.
    std::vector<std::size_t> best;
};

TuneResult tune_grid(const ExperimentSpec& spec, const Dataset& train, const std::vector<ResampleSplit>& splits);

/// Holdout rows drawn by outcome strata; survival strata are event status.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double fraction, const Strata& strata,
                                             std::uint64_t seed, std::vector<std::string>* warnings = nullptr);

/// Outcome class codes (classification), event status (survival) or empty.
Strata outcome_strata(const Dataset& data, const OutcomeSpec& outcome);

/// Row indices of the training and test portions drawn by run_experiment
/// when no separate test set is given: the last rows in time order for
/// blocked_cv and rolling_origin, a stratified draw otherwise. `data` must
/// already carry its outcome roles.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_rows(
    const ExperimentSpec& spec, const Dataset& data, std::vector<std::string>* warnings = nullptr);

/// Seed of the resampling plan built inside run_experiment.
std::uint64_t resampling_seed(const ExperimentSpec& spec);

struct HoldoutResult {
    std::string model_id;
    std::string algorithm;
    std::map<std::string, double> params;
    std::vector<MetricValue> metrics;
    std::vector<std::string> warnings;
};

struct EvaluationResult {
    TaskKind task = TaskKind::classification;
    std::string primary_metric;
    Direction direction = Direction::maximize;
    std::vector<AuditFinding> audit;
    std::vector<std::string> warnings;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::vector<ResampleSplit> splits;
    std::uint64_t split_fingerprint = 0;
    TuneResult tuning;
    /// Per model, its best candidate's summary; empty for method none.
    std::vector<CvSummary> cv;
    std::optional<std::size_t> selected;
    std::uint64_t final_recipe_fingerprint = 0;
    std::vector<HoldoutResult> holdout;
};

/// Refits the recipe and every model's chosen candidate on the full training
/// split and scores the test split, with bootstrap intervals.
void finalize_and_report(const ExperimentSpec& spec, const Dataset& train, const Dataset& test, EvaluationResult& result);

/// Whole pipeline. `test` is used as given; otherwise a holdout is drawn
/// from `data`. Throws AuditError when the recipe audit rejects.
EvaluationResult run_experiment(const ExperimentSpec& spec, const Dataset& data,
                                const std::optional<Dataset>& test = std::nullopt);

}  // namespace leakguard
