#include <algorithm>
#include <cmath>

#include "leakguard/errors.hpp"
#include "leakguard/learners.hpp"

namespace leakguard {

double weibull_loglik(const Eigen::MatrixXd& x, const std::vector<double>& time, const std::vector<double>& status,
                      double mu, const Eigen::VectorXd& beta, double log_sigma, Eigen::VectorXd* grad,
                      Eigen::MatrixXd* hess) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    const Eigen::Index dim = p + 2;  // (mu, beta, log sigma)
    const double sigma = std::exp(log_sigma);
    if (grad) grad->setZero(dim);
    if (hess) hess->setZero(dim, dim);
    double ll = 0.0;
    Eigen::VectorXd z(p + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double eta = mu + x.row(i).dot(beta);
        const double w = (std::log(time[static_cast<std::size_t>(i)]) - eta) / sigma;
        const double ew = std::exp(w);
        const double delta = status[static_cast<std::size_t>(i)];
        ll += delta * (-log_sigma + w) - ew;
        if (!grad && !hess) continue;
        const double lw = delta - ew;
        const double lww = -ew;
        const double d_eta = -lw / sigma;
        const double d_s = -delta - w * lw;
        z[0] = 1.0;
        z.tail(p) = x.row(i).transpose();
        if (grad) {
            grad->head(p + 1) += d_eta * z;
            (*grad)[dim - 1] += d_s;
        }
        if (hess) {
            const double h_ee = lww / (sigma * sigma);
            const double h_es = (lww * w + lw) / sigma;
            const double h_ss = w * lw + w * w * lww;
            hess->topLeftCorner(p + 1, p + 1).noalias() += h_ee * z * z.transpose();
            hess->col(dim - 1).head(p + 1) += h_es * z;
            hess->row(dim - 1).head(p + 1) += h_es * z.transpose();
            (*hess)(dim - 1, dim - 1) += h_ss;
        }
    }
    return ll;
}

WeibullFit fit_weibull(const Eigen::MatrixXd& x, const std::vector<double>& time, const std::vector<double>& status,
                       int max_iter) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    if (static_cast<std::size_t>(n) != time.size() || time.size() != status.size()) {
        throw DataError("Weibull fit: inconsistent input lengths");
    }
    double events = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < time.size(); ++i) {
        if (!(time[i] > 0.0)) throw DataError("Weibull fit: times must be positive");
        events += status[i];
        total += time[i];
    }
    if (events == 0.0) throw FitError("Weibull fit: >=1 event required");

    const Eigen::RowVectorXd center = x.colwise().mean();
    const Eigen::MatrixXd xc = x.rowwise() - center;
    const Eigen::Index dim = p + 2;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);
    theta[0] = std::log(total / events);  // exponential MLE

    auto eval = [&](const Eigen::VectorXd& th, Eigen::VectorXd* g, Eigen::MatrixXd* h) {
        return weibull_loglik(xc, time, status, th[0], th.segment(1, p), th[dim - 1], g, h);
    };

    WeibullFit fit;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    double ll = eval(theta, &grad, &hess);
    bool converged = grad.norm() < 1e-9;
    for (int iter = 1; iter <= max_iter && !converged; ++iter) {
        fit.iterations = iter;
        Eigen::MatrixXd info = -hess;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        double ridge = 1e-8 * std::max(1.0, info.diagonal().cwiseAbs().maxCoeff());
        while (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0) {
            info = -hess;
            info.diagonal().array() += ridge;
            ldlt.compute(info);
            ridge *= 10.0;
            if (!std::isfinite(ridge)) throw FitError("Weibull fit: information matrix cannot be regularised");
        }
        const Eigen::VectorXd step = ldlt.solve(grad);
        Eigen::VectorXd next = theta + step;
        double ll_next = eval(next, nullptr, nullptr);
        double scale = 1.0;
        for (int h = 0; h < 30 && !(ll_next >= ll - 1e-12 * std::max(1.0, std::abs(ll))); ++h) {
            scale *= 0.5;
            next = theta + scale * step;
            ll_next = eval(next, nullptr, nullptr);
        }
        const double change = std::abs(ll_next - ll);
        theta = next;
        ll = eval(theta, &grad, &hess);
        if (grad.norm() < 1e-9 || (change <= 1e-15 * std::max(1.0, std::abs(ll)) && grad.norm() < 1e-6)) {
            converged = true;
        }
    }
    if (!converged) throw FitError("Weibull fit did not converge in " + std::to_string(max_iter) + " iterations");
    fit.beta = theta.segment(1, p);
    fit.mu = theta[0] - center.dot(fit.beta);
    fit.log_sigma = theta[dim - 1];
    fit.loglik = ll;
    fit.gradient_norm = grad.norm();
    return fit;
}

}  // namespace leakguard
