#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "leakguard/model.hpp"

namespace leakguard {

enum class Direction { maximize, minimize };

/// Throws ConfigError for unknown metric names.
Direction metric_direction(std::string_view name);
bool is_metric_for(std::string_view name, TaskKind task);

struct ConfidenceInterval {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t n_boot = 0;     // replicates requested
    std::size_t n_dropped = 0;  // replicates still degenerate after redraws
    double level = 0.95;
};

struct MetricValue {
    std::string name;
    double estimate = 0.0;  // NaN when undefined on this data
    Direction direction = Direction::maximize;
    std::optional<ConfidenceInterval> ci;
    /// Evaluation time for time-indexed survival metrics.
    std::optional<double> at_time;
    /// False when the model cannot supply the required prediction kind.
    bool available = true;

    bool defined() const;
    /// "brier" or "brier@294" style key, unique within a metric set.
    std::string key() const;
};

// ------------------------------------------------------------ classification

struct ClassFrame {
    std::vector<int> truth;        // level codes
    Eigen::MatrixXd prob;          // rows x levels
    std::vector<std::string> levels;
    int positive = 1;              // level code treated as the event class
};

/// Binary outcomes: accuracy kappa sens spec precision f_meas roc_auc logloss
/// brier ece. Three or more levels: accuracy kappa logloss.
std::vector<MetricValue> classification_metrics(const ClassFrame& frame, double threshold = 0.5,
                                                const std::vector<std::size_t>* rows = nullptr);

/// Mann-Whitney AUC with half credit for ties; NaN for single-class truth.
double roc_auc(const std::vector<double>& score, const std::vector<int>& is_positive);
/// Cohen's kappa of a square confusion table (NaN when chance agreement is 1).
double cohen_kappa(const Eigen::MatrixXd& table);
/// 10 equal-width bins, count-weighted |mean prob - event rate|.
double expected_calibration_error(const std::vector<double>& prob, const std::vector<int>& is_positive);

// ------------------------------------------------------------ regression

struct RegressionFrame {
    std::vector<double> truth;
    std::vector<double> estimate;
};

std::vector<MetricValue> regression_metrics(const RegressionFrame& frame,
                                            const std::vector<std::size_t>* rows = nullptr);

// ------------------------------------------------------------ survival

double harrell_c(const std::vector<double>& risk, const std::vector<double>& time, const std::vector<double>& status);
/// IPCW concordance with weights G(t_i-)^-2 over pairs with t_i < tau. G is
/// the censoring Kaplan-Meier of the same rows. When G(t_i-) = 0 for a
/// needed weight, tau is truncated and `truncated` is set.
double uno_c(const std::vector<double>& risk, const std::vector<double>& time, const std::vector<double>& status,
             double tau, bool* truncated = nullptr);
double standardize_c(double c);

/// IPCW Brier score at t given each row's predicted S_i(t).
double brier_survival(const std::vector<double>& surv_at_t, const std::vector<double>& time,
                      const std::vector<double>& status, double t);
/// Trapezoid average of the pointwise Brier score over `grid`;
/// `surv` is rows x grid points.
double integrated_brier(const Eigen::MatrixXd& surv, const std::vector<double>& grid, const std::vector<double>& time,
                        const std::vector<double>& status);
/// Integral of a curve set's row over [0, tau], split at the curve knots.
double curve_area(const SurvivalCurves& curves, std::size_t row, double tau);
/// |RMST(KM of the rows) - RMST(mean predicted curve)| on [0, tau].
double rmst_diff(const std::vector<double>& predicted_rmst, const std::vector<double>& time,
                 const std::vector<double>& status, double tau);

/// Evaluation times fixed from training data.
struct SurvivalEvalSettings {
    std::vector<double> brier_times;  // q25, q50, q75 of training event times
    std::vector<double> ibs_grid;     // 50 points over [q25, q75]
    double rmst_tau = 0.0;            // q90 of training follow-up
};

SurvivalEvalSettings survival_eval_settings(const std::vector<double>& train_time,
                                            const std::vector<double>& train_status);

struct SurvivalFrame {
    std::vector<double> time;
    std::vector<double> status;
    std::vector<double> risk;
    bool has_curves = false;
    Eigen::MatrixXd surv_brier;           // rows x brier_times
    Eigen::MatrixXd surv_grid;            // rows x ibs_grid
    std::vector<double> predicted_rmst;   // per row, on [0, rmst_tau]
    SurvivalEvalSettings settings;
};

SurvivalFrame make_survival_frame(std::vector<double> time, std::vector<double> status, std::vector<double> risk,
                                  const SurvivalCurves* curves, const SurvivalEvalSettings& settings);

/// harrell_c uno_c brier@t (each t) ibs rmst_diff.
std::vector<MetricValue> survival_metrics(const SurvivalFrame& frame, bool standardize = false,
                                          const std::vector<std::size_t>* rows = nullptr);

// ------------------------------------------------------------ bootstrap

using MetricSetFn = std::function<std::vector<double>(const std::vector<std::size_t>& rows)>;

/// Percentile intervals for every entry of a metric set over B row
/// resamples. A replicate whose value is NaN for some metric is redrawn up
/// to 10 times for that metric, then dropped. The interval is widened, if
/// needed, to contain the point estimate. Entries whose replicates are all
/// degenerate come back empty.
std::vector<std::optional<ConfidenceInterval>> bootstrap_metric_set(std::size_t n, const MetricSetFn& compute,
                                                                     const std::vector<double>& estimates,
                                                                     std::size_t B, double level, std::uint64_t seed);

/// Single-metric form; throws DataError when every replicate is degenerate.
ConfidenceInterval bootstrap_ci(std::size_t n, const std::function<double(const std::vector<std::size_t>&)>& stat,
                                double estimate, std::size_t B = 500, double level = 0.95, std::uint64_t seed = 0);

}  // namespace leakguard
