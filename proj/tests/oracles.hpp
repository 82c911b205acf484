#pragma once

// Slow reference computations used as independent test oracles. None of
// these share code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

/// AUC by enumerating every (positive, negative) pair.
inline double pair_auc(const std::vector<double>& score, const std::vector<int>& pos) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < score.size(); ++i) {
        if (!pos[i]) continue;
        for (std::size_t j = 0; j < score.size(); ++j) {
            if (pos[j]) continue;
            den += 1.0;
            if (score[i] > score[j]) num += 1.0;
            else if (score[i] == score[j]) num += 0.5;
        }
    }
    return num / den;
}

/// Harrell C: pairs (i, j) with t_i < t_j and i an event; a higher risk for
/// i is concordant, equal risks count one half.
inline double pair_harrell(const std::vector<double>& risk, const std::vector<double>& time,
                           const std::vector<double>& status) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < risk.size(); ++i) {
        if (status[i] != 1.0) continue;
        for (std::size_t j = 0; j < risk.size(); ++j) {
            if (!(time[i] < time[j])) continue;
            den += 1.0;
            if (risk[i] > risk[j]) num += 1.0;
            else if (risk[i] == risk[j]) num += 0.5;
        }
    }
    return num / den;
}

/// Kaplan-Meier S(t) by direct product over distinct event times <= t.
inline double km_at(const std::vector<double>& time, const std::vector<double>& status, double t) {
    std::vector<double> ev;
    for (std::size_t i = 0; i < time.size(); ++i)
        if (status[i] == 1.0 && time[i] <= t) ev.push_back(time[i]);
    std::sort(ev.begin(), ev.end());
    ev.erase(std::unique(ev.begin(), ev.end()), ev.end());
    double s = 1.0;
    for (double u : ev) {
        double r = 0.0, d = 0.0;
        for (std::size_t i = 0; i < time.size(); ++i) {
            if (time[i] >= u) r += 1.0;
            if (time[i] == u && status[i] == 1.0) d += 1.0;
        }
        s *= 1.0 - d / r;
    }
    return s;
}

/// Censoring survival just before t.
inline double censor_left(const std::vector<double>& time, const std::vector<double>& status, double t) {
    std::vector<double> flipped(status.size());
    for (std::size_t i = 0; i < status.size(); ++i) flipped[i] = 1.0 - status[i];
    return km_at(time, flipped, std::nextafter(t, -std::numeric_limits<double>::infinity()));
}

/// Uno C as an explicit weighted pair sum.
inline double pair_uno(const std::vector<double>& risk, const std::vector<double>& time,
                       const std::vector<double>& status, double tau) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < risk.size(); ++i) {
        if (status[i] != 1.0 || !(time[i] < tau)) continue;
        double g = censor_left(time, status, time[i]);
        double w = 1.0 / (g * g);
        for (std::size_t j = 0; j < risk.size(); ++j) {
            if (!(time[i] < time[j])) continue;
            den += w;
            if (risk[i] > risk[j]) num += w;
            else if (risk[i] == risk[j]) num += 0.5 * w;
        }
    }
    return num / den;
}

/// Nelder-Mead simplex minimizer.
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x0, double step = 0.5, int iters = 20000,
                                       double tol = 1e-15) {
    const std::size_t d = x0.size();
    std::vector<std::vector<double>> s(d + 1, x0);
    for (std::size_t i = 0; i < d; ++i) s[i + 1][i] += step;
    std::vector<double> fv(d + 1);
    for (std::size_t i = 0; i <= d; ++i) fv[i] = f(s[i]);
    for (int it = 0; it < iters; ++it) {
        std::vector<std::size_t> order(d + 1);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        std::vector<std::vector<double>> s2;
        std::vector<double> f2;
        for (auto o : order) {
            s2.push_back(s[o]);
            f2.push_back(fv[o]);
        }
        s = s2;
        fv = f2;
        if (std::fabs(fv[d] - fv[0]) < tol) break;
        std::vector<double> c(d, 0.0);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t k = 0; k < d; ++k) c[k] += s[i][k] / static_cast<double>(d);
        auto along = [&](double a) {
            std::vector<double> p(d);
            for (std::size_t k = 0; k < d; ++k) p[k] = c[k] + a * (s[d][k] - c[k]);
            return p;
        };
        auto xr = along(-1.0);
        double fr = f(xr);
        if (fr < fv[0]) {
            auto xe = along(-2.0);
            double fe = f(xe);
            if (fe < fr) {
                s[d] = xe;
                fv[d] = fe;
            } else {
                s[d] = xr;
                fv[d] = fr;
            }
        } else if (fr < fv[d - 1]) {
            s[d] = xr;
            fv[d] = fr;
        } else {
            auto xc = along(fr < fv[d] ? -0.5 : 0.5);
            double fc = f(xc);
            if (fc < std::min(fr, fv[d])) {
                s[d] = xc;
                fv[d] = fc;
            } else {
                for (std::size_t i = 1; i <= d; ++i) {
                    for (std::size_t k = 0; k < d; ++k) s[i][k] = s[0][k] + 0.5 * (s[i][k] - s[0][k]);
                    fv[i] = f(s[i]);
                }
            }
        }
    }
    std::size_t best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    return s[best];
}

/// Golden-section search for the minimum of a unimodal f on [a, b].
inline double golden_min(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

/// Successively refined 1-D grid maximization on [lo, hi].
inline double grid_argmax(const std::function<double(double)>& f, double lo, double hi, int rounds = 8,
                          int points = 201) {
    double best = lo;
    for (int r = 0; r < rounds; ++r) {
        double bv = -std::numeric_limits<double>::infinity();
        double h = (hi - lo) / (points - 1);
        for (int k = 0; k < points; ++k) {
            double x = lo + h * k;
            double v = f(x);
            if (v > bv) {
                bv = v;
                best = x;
            }
        }
        lo = best - 2.0 * h;
        hi = best + 2.0 * h;
    }
    return best;
}

/// Cox partial log-likelihood for one covariate, Breslow form (no ties).
inline double cox_loglik_1d(const std::vector<double>& x, const std::vector<double>& time,
                            const std::vector<double>& status, double beta) {
    double ll = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (status[i] != 1.0) continue;
        double s = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j)
            if (time[j] >= time[i]) s += std::exp(beta * x[j]);
        ll += beta * x[i] - std::log(s);
    }
    return ll;
}

/// Elastic net by proximal gradient (ISTA) on standardized predictors.
/// z is column-major n x p, y centred.
inline std::vector<double> ista_enet(const std::vector<std::vector<double>>& z, const std::vector<double>& y,
                                     double lambda, double alpha, int iters = 200000) {
    const std::size_t p = z.size(), n = y.size();
    std::vector<double> b(p, 0.0);
    // Lipschitz constant of the smooth part is at most p for unit-variance columns.
    const double step = 1.0 / (static_cast<double>(p) + lambda * (1.0 - alpha));
    for (int it = 0; it < iters; ++it) {
        std::vector<double> r(y);
        for (std::size_t k = 0; k < p; ++k)
            for (std::size_t i = 0; i < n; ++i) r[i] -= z[k][i] * b[k];
        double change = 0.0;
        for (std::size_t k = 0; k < p; ++k) {
            double g = 0.0;
            for (std::size_t i = 0; i < n; ++i) g -= z[k][i] * r[i];
            g = g / static_cast<double>(n) + lambda * (1.0 - alpha) * b[k];
            double v = b[k] - step * g;
            double th = step * lambda * alpha;
            double nb = v > th ? v - th : (v < -th ? v + th : 0.0);
            change = std::max(change, std::fabs(nb - b[k]));
            b[k] = nb;
        }
        if (change < 1e-14) break;
    }
    return b;
}

/// Composite Simpson rule on [a, b] with m (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int m = 2000) {
    double h = (b - a) / m, s = f(a) + f(b);
    for (int k = 1; k < m; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

/// Type 7 quantile straight from the sorted order statistics.
inline double type7(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    double h = (static_cast<double>(v.size()) - 1.0) * p;
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace oracle
