#include "leakguard/survival.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "leakguard/errors.hpp"

namespace leakguard {

namespace {

void check_time(double t) {
    if (!(t > 0.0)) throw DataError("time must be positive");
}

void check_inputs(const std::vector<double>& time, const std::vector<double>& status) {
    if (time.size() != status.size()) throw DataError("time and status lengths differ");
    if (time.empty()) throw DataError("no observations");
    for (std::size_t i = 0; i < time.size(); ++i) {
        if (!(time[i] > 0.0) || !std::isfinite(time[i])) {
            throw DataError("time must be positive and finite (row " + std::to_string(i + 1) + ")");
        }
        if (status[i] != 0.0 && status[i] != 1.0) {
            throw DataError("status must be 0/1 (row " + std::to_string(i + 1) + ")");
        }
    }
}

// Exposure of a subject observed to time t inside interval k.
double exposure(const std::vector<double>& cuts, std::size_t k, double t) {
    const double lo = k == 0 ? 0.0 : cuts[k - 1];
    if (t <= lo) return 0.0;
    const double hi = k < cuts.size() ? std::min(t, cuts[k]) : t;
    return hi - lo;
}

}  // namespace

PexpParams PexpParams::from_log(std::vector<double> cutpoints, double log_rate,
                                const std::vector<double>& log_ratios) {
    if (log_ratios.size() != cutpoints.size()) throw DataError("need one log ratio per cutpoint");
    PexpParams p;
    p.cutpoints = std::move(cutpoints);
    p.rates.push_back(std::exp(log_rate));
    for (double r : log_ratios) p.rates.push_back(std::exp(log_rate + r));
    p.validate();
    return p;
}

double PexpParams::log_rate() const { return std::log(rates.at(0)); }

std::vector<double> PexpParams::log_ratios() const {
    std::vector<double> out;
    for (std::size_t k = 1; k < rates.size(); ++k) out.push_back(std::log(rates[k]) - std::log(rates[0]));
    return out;
}

void PexpParams::validate() const {
    if (rates.size() != cutpoints.size() + 1) throw DataError("piecewise exponential needs K+1 rates for K cutpoints");
    for (std::size_t k = 0; k < cutpoints.size(); ++k) {
        if (!(cutpoints[k] > 0.0) || !std::isfinite(cutpoints[k])) throw DataError("cutpoints must be positive and finite");
        if (k > 0 && !(cutpoints[k] > cutpoints[k - 1])) throw DataError("cutpoints must be strictly increasing");
    }
    for (double r : rates) {
        if (!(r > 0.0) || !std::isfinite(r)) throw DataError("hazard rates must be positive and finite");
    }
}

std::size_t PexpParams::interval(double t) const {
    return static_cast<std::size_t>(std::lower_bound(cutpoints.begin(), cutpoints.end(), t) - cutpoints.begin());
}

double pexp_hazard(const PexpParams& p, double t) {
    check_time(t);
    return p.rates[p.interval(t)];
}

double pexp_cumhaz(const PexpParams& p, double t) {
    check_time(t);
    const std::size_t k = p.interval(t);
    double h = 0.0;
    double lo = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        h += p.rates[j] * (p.cutpoints[j] - lo);
        lo = p.cutpoints[j];
    }
    return h + p.rates[k] * (t - lo);
}

double pexp_survival(const PexpParams& p, double t) { return std::exp(-pexp_cumhaz(p, t)); }

double pexp_density(const PexpParams& p, double t) { return pexp_hazard(p, t) * pexp_survival(p, t); }

double pexp_quantile(const PexpParams& p, double prob) {
    if (!(prob > 0.0 && prob < 1.0)) throw DataError("quantile probability must lie in (0, 1)");
    const double target = -std::log1p(-prob);
    double h = 0.0;
    double lo = 0.0;
    for (std::size_t k = 0; k < p.rates.size(); ++k) {
        const double width = k < p.cutpoints.size() ? p.cutpoints[k] - lo : std::numeric_limits<double>::infinity();
        const double mass = p.rates[k] * width;
        if (h + mass >= target) return lo + (target - h) / p.rates[k];
        h += mass;
        lo = p.cutpoints[k];
    }
    return lo;
}

std::vector<double> normalize_cutpoints(const std::vector<double>& cutpoints, std::vector<std::string>* warnings) {
    std::vector<double> out;
    bool dropped = false;
    for (double c : cutpoints) {
        if (c > 0.0 && std::isfinite(c)) {
            out.push_back(c);
        } else {
            dropped = true;
        }
    }
    std::sort(out.begin(), out.end());
    const std::size_t before = out.size();
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (warnings && dropped) warnings->push_back("nonpositive or non-finite cutpoints dropped");
    if (warnings && out.size() != before) warnings->push_back("duplicate cutpoints removed");
    return out;
}

double pexp_loglik(const PexpParams& p, const std::vector<double>& time, const std::vector<double>& status) {
    double ll = 0.0;
    for (std::size_t i = 0; i < time.size(); ++i) {
        if (status[i] == 1.0) ll += std::log(pexp_hazard(p, time[i]));
        ll -= pexp_cumhaz(p, time[i]);
    }
    return ll;
}

PexpFit fit_pexp(const std::vector<double>& time, const std::vector<double>& status,
                 const std::vector<double>& cutpoints) {
    return fit_pexp_regression(time, status, {}, 0, cutpoints);
}

PexpFit fit_pexp_regression(const std::vector<double>& time, const std::vector<double>& status,
                            const std::vector<double>& x, std::size_t p, const std::vector<double>& cutpoints) {
    check_inputs(time, status);
    const std::size_t n = time.size();
    if (x.size() != n * p) throw DataError("covariate matrix has the wrong size");
    PexpFit fit;
    const std::vector<double> cuts = normalize_cutpoints(cutpoints, &fit.warnings);
    const std::size_t K = cuts.size() + 1;

    std::vector<double> events(K, 0.0);
    std::vector<double> expo(K, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < K; ++k) expo[k] += exposure(cuts, k, time[i]);
        if (status[i] == 1.0) {
            events[static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), time[i]) - cuts.begin())] += 1.0;
        }
    }
    const double total_events = std::accumulate(events.begin(), events.end(), 0.0);
    if (total_events == 0.0) throw FitError("piecewise exponential fit: >=1 event required");
    for (std::size_t k = 0; k < K; ++k) {
        if (expo[k] == 0.0) throw FitError("piecewise exponential fit: interval " + std::to_string(k + 1) + " has zero exposure");
        if (events[k] == 0.0) {
            throw FitError("piecewise exponential fit: interval " + std::to_string(k + 1) +
                           " has no events, so its rate has no finite maximum");
        }
    }

    fit.params.cutpoints = cuts;
    if (p == 0) {
        // Closed-form maximum: events / exposure per interval.
        for (std::size_t k = 0; k < K; ++k) fit.params.rates.push_back(events[k] / expo[k]);
        fit.params.validate();
        fit.loglik = pexp_loglik(fit.params, time, status);
        double g2 = 0.0;
        double g0 = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double gk = events[k] - expo[k] * fit.params.rates[k];
            g0 += gk;
            if (k > 0) g2 += gk * gk;
        }
        fit.gradient_norm = std::sqrt(g0 * g0 + g2);
        return fit;
    }

    // theta = (a, r_1..r_{K-1}, beta)
    const std::size_t dim = K + p;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    theta[0] = std::log(total_events / std::accumulate(expo.begin(), expo.end(), 0.0));

    auto evaluate = [&](const Eigen::VectorXd& th, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
        double ll = 0.0;
        if (grad) grad->setZero(static_cast<Eigen::Index>(dim));
        if (hess) hess->setZero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
        Eigen::VectorXd z(static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < n; ++i) {
            double xb = 0.0;
            for (std::size_t j = 0; j < p; ++j) xb += th[static_cast<Eigen::Index>(K + j)] * x[i * p + j];
            const std::size_t ki = static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), time[i]) - cuts.begin());
            for (std::size_t k = 0; k <= ki; ++k) {
                const double e = exposure(cuts, k, time[i]);
                const double d = (k == ki && status[i] == 1.0) ? 1.0 : 0.0;
                const double eta = th[0] + (k > 0 ? th[static_cast<Eigen::Index>(k)] : 0.0) + xb;
                const double mu = e * std::exp(eta);
                ll += d * eta - mu;
                if (!grad) continue;
                z.setZero();
                z[0] = 1.0;
                if (k > 0) z[static_cast<Eigen::Index>(k)] = 1.0;
                for (std::size_t j = 0; j < p; ++j) z[static_cast<Eigen::Index>(K + j)] = x[i * p + j];
                *grad += (d - mu) * z;
                if (hess) hess->selfadjointView<Eigen::Lower>().rankUpdate(z, -mu);
            }
        }
        if (hess) *hess = hess->selfadjointView<Eigen::Lower>();
        return ll;
    };

    constexpr int kMaxIter = 50;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    double ll = evaluate(theta, &grad, &hess);
    int iter = 0;
    for (; iter < kMaxIter && grad.norm() >= 1e-8; ++iter) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(-hess);
        if (ldlt.info() != Eigen::Success) throw FitError("piecewise exponential fit: singular information matrix");
        const Eigen::VectorXd step = ldlt.solve(grad);
        double scale = 1.0;
        Eigen::VectorXd next = theta + step;
        double ll_next = evaluate(next, nullptr, nullptr);
        for (int h = 0; h < 20 && !(ll_next >= ll - 1e-12 * std::abs(ll)); ++h) {
            scale *= 0.5;
            next = theta + scale * step;
            ll_next = evaluate(next, nullptr, nullptr);
        }
        theta = next;
        ll = evaluate(theta, &grad, &hess);
        if (step.norm() * scale < 1e-13 * (1.0 + theta.norm())) {
            ++iter;
            break;
        }
    }
    if (!(grad.norm() < 1e-6)) {
        throw FitError("piecewise exponential fit did not converge (gradient norm " + std::to_string(grad.norm()) + ")");
    }
    std::vector<double> ratios;
    for (std::size_t k = 1; k < K; ++k) ratios.push_back(theta[static_cast<Eigen::Index>(k)]);
    fit.params = PexpParams::from_log(cuts, theta[0], ratios);
    for (std::size_t j = 0; j < p; ++j) fit.beta.push_back(theta[static_cast<Eigen::Index>(K + j)]);
    fit.loglik = ll;
    fit.gradient_norm = grad.norm();
    fit.iterations = iter;
    return fit;
}

double KmCurve::at(double t) const {
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    return it == times.begin() ? 1.0 : survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

double KmCurve::left_limit(double t) const {
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    return it == times.begin() ? 1.0 : survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

KmCurve km_fit(const std::vector<double>& time, const std::vector<double>& status) {
    if (time.empty()) throw DataError("Kaplan-Meier needs at least one observation");
    if (time.size() != status.size()) throw DataError("time and status lengths differ");
    std::vector<std::size_t> idx(time.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return time[a] < time[b]; });
    KmCurve km;
    double s = 1.0;
    double risk = static_cast<double>(time.size());
    for (std::size_t pos = 0; pos < idx.size();) {
        const double t = time[idx[pos]];
        double d = 0.0;
        double leaving = 0.0;
        while (pos < idx.size() && time[idx[pos]] == t) {
            d += status[idx[pos]];
            leaving += 1.0;
            ++pos;
        }
        if (d > 0.0) {
            s *= 1.0 - d / risk;
            km.times.push_back(t);
            km.at_risk.push_back(risk);
            km.events.push_back(d);
            km.survival.push_back(s);
        }
        risk -= leaving;
    }
    return km;
}

KmCurve km_censoring_fit(const std::vector<double>& time, const std::vector<double>& status) {
    std::vector<double> flipped(status.size());
    for (std::size_t i = 0; i < status.size(); ++i) flipped[i] = 1.0 - status[i];
    return km_fit(time, flipped);
}

double step_area(const std::vector<double>& times, const std::vector<double>& values, double tau) {
    double area = 0.0;
    double prev_t = 0.0;
    double prev_v = 1.0;
    for (std::size_t k = 0; k < times.size() && times[k] < tau; ++k) {
        area += prev_v * (times[k] - prev_t);
        prev_t = times[k];
        prev_v = values[k];
    }
    if (tau > prev_t) area += prev_v * (tau - prev_t);
    return area;
}

double rmst(const KmCurve& curve, double tau) { return step_area(curve.times, curve.survival, tau); }

AftIntervalTargets build_aft_interval_targets(const std::vector<double>& time, const std::vector<double>& status,
                                              const std::vector<double>* start) {
    if (start) throw UnsupportedError("AFT interval targets: this engine does not support start-stop outcomes");
    if (time.size() != status.size()) throw DataError("time and status lengths differ");
    AftIntervalTargets out;
    out.lower.reserve(time.size());
    out.upper.reserve(time.size());
    for (std::size_t i = 0; i < time.size(); ++i) {
        if (!(time[i] > 0.0) || !std::isfinite(time[i])) {
            throw DataError("AFT targets need positive, finite times (row " + std::to_string(i + 1) + ")");
        }
        if (status[i] != 0.0 && status[i] != 1.0) throw DataError("status must be 0/1 (row " + std::to_string(i + 1) + ")");
        const double l = std::log(time[i]);
        out.lower.push_back(l);
        out.upper.push_back(status[i] == 1.0 ? l : std::numeric_limits<double>::infinity());
    }
    return out;
}

}  // namespace leakguard
