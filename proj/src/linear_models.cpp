#include <algorithm>
#include <cmath>

#include "leakguard/errors.hpp"
#include "leakguard/learners.hpp"

namespace leakguard {

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd d(x.rows(), x.cols() + 1);
    d.col(0).setOnes();
    d.rightCols(x.cols()) = x;
    return d;
}

double logistic_deviance(const Eigen::MatrixXd& d, const Eigen::VectorXd& y, const Eigen::VectorXd& coef) {
    const Eigen::VectorXd eta = d * coef;
    double dev = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        // -2 log-likelihood written with log1p(exp(.)) for stability.
        const double e = eta[i];
        const double log1pexp = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        dev += 2.0 * (log1pexp - y[i] * e);
    }
    return dev;
}

double soft_threshold(double z, double g) {
    if (z > g) return z - g;
    if (z < -g) return z + g;
    return 0.0;
}

}  // namespace

LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int max_iter, double tol) {
    const Eigen::Index n = x.rows();
    if (n == 0) throw FitError("logistic regression: no rows");
    const double ones = y.sum();
    if (ones == 0.0 || ones == static_cast<double>(n)) {
        throw FitError("logistic regression: outcome has a single class");
    }
    const Eigen::MatrixXd d = with_intercept(x);
    const Eigen::Index p = d.cols();
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(p);
    double dev = logistic_deviance(d, y, coef);
    LogisticFit fit;

    auto gradient = [&](const Eigen::VectorXd& c, Eigen::VectorXd* w) {
        const Eigen::VectorXd eta = d * c;
        Eigen::VectorXd mu(n);
        for (Eigen::Index i = 0; i < n; ++i) mu[i] = 1.0 / (1.0 + std::exp(-eta[i]));
        if (w) *w = mu.array() * (1.0 - mu.array());
        return Eigen::VectorXd(d.transpose() * (y - mu));
    };

    Eigen::VectorXd w;
    Eigen::VectorXd grad = gradient(coef, &w);
    for (int iter = 1; iter <= max_iter; ++iter) {
        fit.iterations = iter;
        const Eigen::MatrixXd info = d.transpose() * w.asDiagonal() * d;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        const double dmax = ldlt.vectorD().cwiseAbs().maxCoeff();
        if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-13 * std::max(dmax, 1e-300)) {
            if (coef.cwiseAbs().maxCoeff() > 15.0) {
                fit.separation = true;
                break;
            }
            throw FitError("logistic regression: singular weighted normal equations");
        }
        const Eigen::VectorXd step = ldlt.solve(grad);
        Eigen::VectorXd next = coef + step;
        double next_dev = logistic_deviance(d, y, next);
        double scale = 1.0;
        for (int h = 0; h < 5 && !(next_dev <= dev); ++h) {
            scale *= 0.5;
            next = coef + scale * step;
            next_dev = logistic_deviance(d, y, next);
        }
        const double change = std::abs(next_dev - dev) / (std::abs(next_dev) + 0.1);
        coef = next;
        dev = next_dev;
        grad = gradient(coef, &w);
        if (change < tol && grad.norm() < 1e-8 * std::max(1.0, static_cast<double>(n))) {
            fit.converged = true;
            break;
        }
        if (change < tol && coef.cwiseAbs().maxCoeff() > 15.0) break;
    }
    fit.separation = fit.separation || coef.cwiseAbs().maxCoeff() > 15.0;
    if (!fit.converged && !fit.separation) {
        throw FitError("logistic regression did not converge in " + std::to_string(max_iter) + " iterations");
    }
    fit.intercept = coef[0];
    fit.beta = coef.tail(p - 1);
    fit.deviance = dev;
    fit.gradient_norm = grad.norm();
    return fit;
}

LinearFit fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<std::string>& names) {
    const Eigen::MatrixXd d = with_intercept(x);
    if (d.rows() <= d.cols()) {
        throw FitError("linear regression needs more rows (" + std::to_string(d.rows()) + ") than coefficients (" +
                       std::to_string(d.cols()) + ")");
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d);
    qr.setThreshold(1e-10);
    if (qr.rank() < d.cols()) {
        std::string aliased;
        for (Eigen::Index k = qr.rank(); k < d.cols(); ++k) {
            const Eigen::Index col = qr.colsPermutation().indices()[k];
            std::string name = col == 0 ? "(intercept)"
                               : static_cast<std::size_t>(col - 1) < names.size() ? names[static_cast<std::size_t>(col - 1)]
                                                                                  : "x" + std::to_string(col);
            aliased += (aliased.empty() ? "" : ", ") + name;
        }
        throw FitError("linear regression: rank-deficient design; aliased column(s): " + aliased);
    }
    const Eigen::VectorXd coef = qr.solve(y);
    LinearFit fit;
    fit.intercept = coef[0];
    fit.beta = coef.tail(d.cols() - 1);
    const Eigen::VectorXd resid = y - d * coef;
    fit.residual_variance = resid.squaredNorm() / static_cast<double>(d.rows() - d.cols());
    return fit;
}

double elastic_net_kkt(const Eigen::MatrixXd& z, const Eigen::VectorXd& y_centered, const Eigen::VectorXd& b,
                       double lambda, double alpha) {
    const double n = static_cast<double>(z.rows());
    const Eigen::VectorXd r = y_centered - z * b;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const double zz = z.col(j).squaredNorm() / n;
        if (zz == 0.0) continue;
        const double g = z.col(j).dot(r) / n - lambda * (1.0 - alpha) * b[j];
        const double v = b[j] != 0.0 ? std::abs(g - lambda * alpha * (b[j] > 0 ? 1.0 : -1.0))
                                     : std::max(0.0, std::abs(g) - lambda * alpha);
        worst = std::max(worst, v);
    }
    return worst;
}

ElasticNetFit fit_elastic_net(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda, double alpha,
                              double tol, int max_passes) {
    if (!(lambda >= 0.0)) throw FitError("elastic net: penalty must be >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw FitError("elastic net: mixture must lie in [0, 1]");
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    if (n < 2) throw FitError("elastic net: needs at least 2 rows");
    const double nd = static_cast<double>(n);

    const Eigen::RowVectorXd mean = x.colwise().mean();
    Eigen::MatrixXd z = x.rowwise() - mean;
    Eigen::VectorXd scale(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double s = std::sqrt(z.col(j).squaredNorm() / nd);
        scale[j] = s > 1e-12 ? s : 0.0;
        if (scale[j] > 0.0) {
            z.col(j) /= scale[j];
        } else {
            z.col(j).setZero();
        }
    }
    const double ybar = y.mean();
    const Eigen::VectorXd yc = y.array() - ybar;

    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd r = yc;
    const double kkt_target = 1e-10 * std::max(1.0, std::sqrt(yc.squaredNorm() / nd));
    ElasticNetFit fit;
    int pass = 0;
    double kkt = elastic_net_kkt(z, yc, b, lambda, alpha);
    while (kkt >= kkt_target) {
        if (pass >= max_passes) {
            throw FitError("elastic net did not converge in " + std::to_string(max_passes) + " passes");
        }
        ++pass;
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (scale[j] == 0.0) continue;
            const double old = b[j];
            const double rho = z.col(j).dot(r) / nd + old;
            const double next = soft_threshold(rho, lambda * alpha) / (1.0 + lambda * (1.0 - alpha));
            if (next != old) {
                r -= (next - old) * z.col(j);
                b[j] = next;
                max_change = std::max(max_change, std::abs(next - old));
            }
        }
        // Recompute the residual occasionally to keep rounding from drifting.
        if (max_change < tol) {
            r = yc - z * b;
            kkt = elastic_net_kkt(z, yc, b, lambda, alpha);
        }
    }
    fit.passes = pass;
    fit.kkt_residual = kkt;
    fit.beta_standardized = b;
    fit.beta = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (scale[j] > 0.0) fit.beta[j] = b[j] / scale[j];
    }
    fit.intercept = ybar - mean.dot(fit.beta);
    return fit;
}

}  // namespace leakguard
