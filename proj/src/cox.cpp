#include <algorithm>
#include <cmath>
#include <numeric>

#include "leakguard/errors.hpp"
#include "leakguard/learners.hpp"

namespace leakguard {

double cox_efron_loglik(const Eigen::MatrixXd& x, const std::vector<double>& time, const std::vector<double>& status,
                        const Eigen::VectorXd& beta, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    std::vector<std::size_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return time[a] > time[b]; });
    const Eigen::VectorXd eta = x * beta;

    double ll = 0.0;
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
    if (grad) grad->setZero(p);
    if (hess) hess->setZero(p, p);

    for (std::size_t pos = 0; pos < idx.size();) {
        const double t = time[idx[pos]];
        double d = 0.0;
        double e0 = 0.0;
        Eigen::VectorXd e1 = Eigen::VectorXd::Zero(p);
        Eigen::MatrixXd e2 = Eigen::MatrixXd::Zero(p, p);
        for (; pos < idx.size() && time[idx[pos]] == t; ++pos) {
            const auto i = static_cast<Eigen::Index>(idx[pos]);
            const double r = std::exp(eta[i]);
            const Eigen::VectorXd xi = x.row(i).transpose();
            s0 += r;
            s1 += r * xi;
            if (hess) s2.noalias() += r * xi * xi.transpose();
            if (status[idx[pos]] == 1.0) {
                d += 1.0;
                e0 += r;
                e1 += r * xi;
                if (hess) e2.noalias() += r * xi * xi.transpose();
                ll += eta[i];
                if (grad) *grad += xi;
            }
        }
        for (int l = 0; l < static_cast<int>(d); ++l) {
            const double f = l / d;
            const double a0 = s0 - f * e0;
            ll -= std::log(a0);
            if (grad || hess) {
                const Eigen::VectorXd a1 = s1 - f * e1;
                if (grad) *grad -= a1 / a0;
                if (hess) *hess -= (s2 - f * e2) / a0 - a1 * a1.transpose() / (a0 * a0);
            }
        }
    }
    return ll;
}

CoxFit fit_cox(const Eigen::MatrixXd& x, const std::vector<double>& time, const std::vector<double>& status,
               double ridge, double tol, int max_iter) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    if (static_cast<std::size_t>(n) != time.size() || time.size() != status.size()) {
        throw DataError("Cox fit: inconsistent input lengths");
    }
    if (std::count(status.begin(), status.end(), 1.0) == 0) throw FitError("Cox fit: >=1 event required");
    if (!(ridge >= 0.0)) throw FitError("Cox fit: penalty must be >= 0");

    CoxFit fit;
    fit.center = n > 0 ? Eigen::VectorXd(x.colwise().mean().transpose()) : Eigen::VectorXd::Zero(p);
    const Eigen::MatrixXd xc = x.rowwise() - fit.center.transpose();

    auto objective = [&](const Eigen::VectorXd& b, Eigen::VectorXd* g, Eigen::MatrixXd* h) {
        double ll = cox_efron_loglik(xc, time, status, b, g, h);
        ll -= 0.5 * ridge * b.squaredNorm();
        if (g) *g -= ridge * b;
        if (h) h->diagonal().array() -= ridge;
        return ll;
    };

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    double ll = objective(beta, &grad, &hess);
    if (p == 0) fit.converged = true;
    for (int iter = 1; iter <= max_iter && !fit.converged; ++iter) {
        fit.iterations = iter;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(-hess);
        const double dmax = ldlt.vectorD().cwiseAbs().maxCoeff();
        if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-13 * std::max(dmax, 1e-300)) {
            if (beta.size() && beta.cwiseAbs().maxCoeff() > 15.0) break;
            throw FitError("Cox fit: singular information matrix (constant or collinear covariates?)");
        }
        const Eigen::VectorXd step = ldlt.solve(grad);
        Eigen::VectorXd next = beta + step;
        double ll_next = objective(next, nullptr, nullptr);
        double scale = 1.0;
        // Near the optimum a full step may lose a few ulps of loglik; that is not a reason to halve.
        const double slack = 1e-12 * std::max(1.0, std::abs(ll));
        for (int h = 0; h < 20 && !(ll_next >= ll - slack); ++h) {
            scale *= 0.5;
            next = beta + scale * step;
            ll_next = objective(next, nullptr, nullptr);
        }
        const double change = std::abs(ll_next - ll);
        beta = next;
        ll = objective(beta, &grad, &hess);
        if (change <= tol * std::max(1.0, std::abs(ll)) && grad.norm() < 1e-7) fit.converged = true;
    }
    fit.monotone = beta.size() > 0 && beta.cwiseAbs().maxCoeff() > 15.0;
    if (!fit.converged && !fit.monotone) {
        throw FitError("Cox fit did not converge in " + std::to_string(max_iter) + " iterations");
    }
    fit.beta = beta;
    fit.loglik = ll;
    fit.gradient_norm = grad.norm();

    // Breslow baseline cumulative hazard at the centred covariates.
    const Eigen::VectorXd risk = (xc * beta).array().exp();
    std::vector<std::size_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return time[a] > time[b]; });
    std::vector<std::pair<double, double>> steps;  // (time, increment), descending time
    double s0 = 0.0;
    for (std::size_t pos = 0; pos < idx.size();) {
        const double t = time[idx[pos]];
        double d = 0.0;
        for (; pos < idx.size() && time[idx[pos]] == t; ++pos) {
            s0 += risk[static_cast<Eigen::Index>(idx[pos])];
            d += status[idx[pos]];
        }
        if (d > 0.0) steps.emplace_back(t, d / s0);
    }
    std::reverse(steps.begin(), steps.end());
    double cum = 0.0;
    for (const auto& [t, inc] : steps) {
        cum += inc;
        fit.base_times.push_back(t);
        fit.base_cumhaz.push_back(cum);
    }
    return fit;
}

}  // namespace leakguard
