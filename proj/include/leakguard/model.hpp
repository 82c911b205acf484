#pragma once

// Uniform fit/predict contract over the learners.

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "leakguard/dataset.hpp"
#include "leakguard/learners.hpp"

namespace leakguard {

enum class PredictionKind { class_prob, numeric, risk, survival_curve, log_time };

std::string_view to_string(PredictionKind kind);

/// Per-row survival functions; S(0) = 1 and non-increasing in t.
class SurvivalCurves {
public:
    virtual ~SurvivalCurves() = default;
    virtual std::size_t rows() const = 0;
    virtual double survival(std::size_t row, double t) const = 0;
    /// Times where the curves jump or change slope; integration splits there.
    virtual std::vector<double> knots() const { return {}; }
};

struct Prediction {
    PredictionKind kind = PredictionKind::numeric;
    /// class_prob: rows x levels, columns in level order.
    Eigen::MatrixXd class_prob;
    std::vector<std::string> levels;
    /// numeric, risk (higher = worse) or log_time.
    std::vector<double> values;
    std::shared_ptr<const SurvivalCurves> curves;
};

struct HyperParam {
    std::string name;
    /// NaN when the default depends on the task or data shape.
    double default_value;
    double lower;
    double upper;
    bool lower_open;
    bool integer;
};

std::vector<std::string> algorithm_names();
/// Throws ConfigError for unknown algorithms.
const std::vector<HyperParam>& hyperparameters(std::string_view algorithm);
bool supports_task(std::string_view algorithm, TaskKind task);

struct ModelSpec {
    std::string id;
    std::string algorithm;
    std::map<std::string, double> params;
    /// piecewise_exp; empty means the quartiles of training event times.
    std::vector<double> cutpoints;
    /// gbm; defaults to squared (regression) or aft_normal (survival).
    std::optional<GbmLoss> loss;
    std::uint64_t seed = 0;
};

/// Throws ConfigError for unknown parameters, out-of-range values or an
/// algorithm that cannot handle the task.
void validate_model_spec(const ModelSpec& spec, TaskKind task);

/// Predictor matrix and response taken from column roles.
struct TrainingData {
    TaskKind task = TaskKind::classification;
    Eigen::MatrixXd x;
    std::vector<std::string> features;
    Eigen::VectorXd y;                // class codes or numeric outcome
    std::vector<std::string> levels;  // classification
    std::vector<double> time;         // survival
    std::vector<double> status;
};

/// Throws DataError for categorical or missing predictors.
TrainingData make_training_data(const Dataset& data, TaskKind task);

/// Predictor matrix for `features`; throws DataError when the dataset's
/// predictor columns differ from the training signature.
Eigen::MatrixXd feature_matrix(const Dataset& data, const std::vector<std::string>& features);

class ModelImpl;

class FittedModel {
public:
    std::string algorithm;
    TaskKind task = TaskKind::classification;
    std::vector<std::string> features;
    std::vector<std::string> levels;
    std::vector<std::string> warnings;
    std::map<std::string, double> diagnostics;

    bool supports(PredictionKind kind) const;
    /// Throws UnsupportedError when `kind` is not available for the algorithm.
    Prediction predict(const Dataset& data, PredictionKind kind) const;
    Prediction predict(const Eigen::MatrixXd& x, PredictionKind kind) const;

    std::shared_ptr<const ModelImpl> impl;
};

/// Hyperparameters missing from spec.params take their defaults.
FittedModel fit_model(const ModelSpec& spec, const TrainingData& data);

/// Parameter value from spec.params or the algorithm default.
double resolved_param(const ModelSpec& spec, const std::string& name, const TrainingData& data);

}  // namespace leakguard
