#pragma once

// Low-level fitting routines on dense design matrices. Design matrices never
// include an intercept column; every routine adds its own where relevant.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "leakguard/rng.hpp"

namespace leakguard {

// ------------------------------------------------------------ logistic

struct LogisticFit {
    double intercept = 0.0;
    Eigen::VectorXd beta;
    double deviance = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Some |coefficient| exceeds 15: the classes are (quasi-)separable.
    bool separation = false;
};

/// IRLS for P(y = 1). Stops when the relative deviance change falls below
/// `tol`; up to 5 step-halvings when the deviance increases. Throws
/// FitError for a single-class outcome, a singular weighted system or
/// non-convergence without separation.
LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int max_iter = 25, double tol = 1e-8);

// ------------------------------------------------------------ linear

struct LinearFit {
    double intercept = 0.0;
    Eigen::VectorXd beta;
    double residual_variance = 0.0;
};

/// Least squares via column-pivoted QR. Throws FitError naming aliased
/// columns when the design is rank deficient.
LinearFit fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<std::string>& names = {});

// ------------------------------------------------------------ elastic net

struct ElasticNetFit {
    double intercept = 0.0;
    Eigen::VectorXd beta;             // original scale
    Eigen::VectorXd beta_standardized;
    double kkt_residual = 0.0;
    int passes = 0;
};

/// Coordinate descent on (1/2n)|y - Zb|^2 + lambda (alpha |b|_1 + (1 - alpha)/2 |b|^2)
/// where Z holds the predictors centred and scaled to unit (1/n) variance;
/// coefficients are mapped back to the original scale.
ElasticNetFit fit_elastic_net(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda, double alpha,
                              double tol = 1e-7, int max_passes = 1000);

/// KKT residual of a standardized-scale solution (max over coordinates).
double elastic_net_kkt(const Eigen::MatrixXd& z, const Eigen::VectorXd& y_centered, const Eigen::VectorXd& b,
                       double lambda, double alpha);

// ------------------------------------------------------------ trees

struct TreeNode {
    int feature = -1;          // -1 for leaves
    double threshold = 0.0;    // go left when x <= threshold
    int left = -1;
    int right = -1;
    std::vector<double> value; // class proportions, or {mean}
    std::size_t n = 0;
};

struct Tree {
    std::vector<TreeNode> nodes;
    const std::vector<double>& leaf(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
    int depth() const;
    std::size_t leaves() const;
};

struct TreeParams {
    int max_depth = 10;
    std::size_t min_n = 2;
    /// Features tried per split; 0 means all.
    std::size_t mtry = 0;
    /// Split only nodes larger than min_n (forest convention) instead of
    /// nodes with at least min_n rows (single-tree convention).
    bool strict_min_n = false;
};

/// CART with Gini impurity (n_classes > 0, y holds class codes) or variance
/// (n_classes == 0). `rows` lists training rows and may repeat entries.
Tree fit_cart(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_classes, const std::vector<std::size_t>& rows,
              const TreeParams& params, Rng* rng = nullptr);

struct Forest {
    std::vector<Tree> trees;
    int n_classes = 0;
    /// Rows x classes (classification) or rows x 1 (regression).
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
};

Forest fit_random_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_classes, std::size_t trees,
                         const TreeParams& params, std::uint64_t seed);

// ------------------------------------------------------------ Cox

struct CoxFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd center;          // covariate means used for the baseline
    double loglik = 0.0;             // penalized Efron partial log-likelihood
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    bool monotone = false;           // |beta| > 15 without convergence
    std::vector<double> base_times;  // distinct event times
    std::vector<double> base_cumhaz; // Breslow, at centred covariates
};

double cox_efron_loglik(const Eigen::MatrixXd& x, const std::vector<double>& time, const std::vector<double>& status,
                        const Eigen::VectorXd& beta, Eigen::VectorXd* grad = nullptr, Eigen::MatrixXd* hess = nullptr);

CoxFit fit_cox(const Eigen::MatrixXd& x, const std::vector<double>& time, const std::vector<double>& status,
               double ridge = 0.0, double tol = 1e-9, int max_iter = 20);

// ------------------------------------------------------------ Weibull AFT

struct WeibullFit {
    double mu = 0.0;
    Eigen::VectorXd beta;
    double log_sigma = 0.0;
    double loglik = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
};

/// log T = mu + x'beta + sigma W with W standard (minimum) extreme value.
/// Log-likelihood omits the -log t Jacobian term.
double weibull_loglik(const Eigen::MatrixXd& x, const std::vector<double>& time, const std::vector<double>& status,
                      double mu, const Eigen::VectorXd& beta, double log_sigma, Eigen::VectorXd* grad = nullptr,
                      Eigen::MatrixXd* hess = nullptr);

WeibullFit fit_weibull(const Eigen::MatrixXd& x, const std::vector<double>& time, const std::vector<double>& status,
                       int max_iter = 100);

// ------------------------------------------------------------ gradient boosting

enum class GbmLoss { squared, aft_normal };

struct GbmParams {
    GbmLoss loss = GbmLoss::squared;
    std::size_t rounds = 100;
    double learn_rate = 0.1;
    int max_depth = 3;
    std::size_t min_leaf = 10;
    double sigma = 1.0;
    double sample_size = 1.0;
    double lambda = 1.0;  // L2 on leaf weights
};

/// First and second derivatives of the per-row loss with respect to eta.
/// For aft_normal, `lower`/`upper` are log-time bounds (upper = +inf when
/// censored); for squared, `lower` is the target and `upper` is ignored.
struct LossDerivs {
    double loss;
    double grad;
    double hess;  // clamped >= 1e-6
};
LossDerivs gbm_loss(GbmLoss loss, double eta, double lower, double upper, double sigma);

struct GbmTree {
    std::vector<TreeNode> nodes;  // value = {leaf weight}
    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

struct GbmModel {
    GbmParams params;
    double eta0 = 0.0;
    std::vector<GbmTree> trees;
    /// Mean training loss after each round (index 0 = before boosting).
    std::vector<double> train_loss;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

GbmModel fit_gbm(const Eigen::MatrixXd& x, const std::vector<double>& lower, const std::vector<double>& upper,
                 const GbmParams& params, std::uint64_t seed);

}  // namespace leakguard
