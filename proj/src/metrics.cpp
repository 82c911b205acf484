#include "leakguard/metrics.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "leakguard/errors.hpp"
#include "leakguard/rng.hpp"
#include "leakguard/stats.hpp"
#include "leakguard/survival.hpp"

namespace leakguard {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::size_t> all_rows(std::size_t n, const std::vector<std::size_t>* rows) {
    if (rows) return *rows;
    std::vector<std::size_t> out(n);
    std::iota(out.begin(), out.end(), 0);
    return out;
}

template <class T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& rows) {
    std::vector<T> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(v[r]);
    return out;
}

MetricValue value(std::string name, double estimate) {
    MetricValue m;
    m.direction = metric_direction(name);
    m.name = std::move(name);
    m.estimate = estimate;
    return m;
}

double safe_div(double a, double b) { return b == 0.0 ? kNaN : a / b; }

}  // namespace

Direction metric_direction(std::string_view name) {
    static const char* maximize[] = {"accuracy", "kappa", "sens", "spec", "precision", "f_meas", "roc_auc",
                                     "rsq", "harrell_c", "uno_c"};
    static const char* minimize[] = {"rmse", "mae", "logloss", "brier", "ece", "ibs", "rmst_diff"};
    for (const char* m : maximize) {
        if (name == m) return Direction::maximize;
    }
    for (const char* m : minimize) {
        if (name == m) return Direction::minimize;
    }
    throw ConfigError("unknown metric '" + std::string(name) + "'");
}

bool is_metric_for(std::string_view name, TaskKind task) {
    static const char* cls[] = {"accuracy", "kappa", "sens", "spec", "precision", "f_meas",
                                "roc_auc", "logloss", "brier", "ece"};
    static const char* reg[] = {"rmse", "mae", "rsq"};
    static const char* surv[] = {"harrell_c", "uno_c", "brier", "ibs", "rmst_diff"};
    auto in = [&](const auto& list) {
        return std::any_of(std::begin(list), std::end(list), [&](const char* m) { return name == m; });
    };
    switch (task) {
        case TaskKind::classification: return in(cls);
        case TaskKind::regression: return in(reg);
        case TaskKind::survival: return in(surv);
    }
    return false;
}

bool MetricValue::defined() const { return available && !std::isnan(estimate); }

std::string MetricValue::key() const {
    if (!at_time) return name;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s@%.6g", name.c_str(), *at_time);
    return buf;
}

// ------------------------------------------------------------ classification

double roc_auc(const std::vector<double>& score, const std::vector<int>& is_positive) {
    const std::size_t n = score.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
    double n1 = 0.0;
    double rank_sum = 0.0;
    for (std::size_t pos = 0; pos < n;) {
        std::size_t end = pos;
        while (end < n && score[idx[end]] == score[idx[pos]]) ++end;
        const double avg_rank = (static_cast<double>(pos + 1) + static_cast<double>(end)) / 2.0;
        for (std::size_t k = pos; k < end; ++k) {
            if (is_positive[idx[k]]) {
                n1 += 1.0;
                rank_sum += avg_rank;
            }
        }
        pos = end;
    }
    const double n0 = static_cast<double>(n) - n1;
    if (n1 == 0.0 || n0 == 0.0) return kNaN;
    const double u = rank_sum - n1 * (n1 + 1.0) / 2.0;
    return u / (n1 * n0);
}

double cohen_kappa(const Eigen::MatrixXd& table) {
    const double n = table.sum();
    if (n == 0.0) return kNaN;
    const double po = table.diagonal().sum() / n;
    const double pe = (table.rowwise().sum().array() * table.colwise().sum().transpose().array()).sum() / (n * n);
    if (pe == 1.0) return kNaN;
    return (po - pe) / (1.0 - pe);
}

double expected_calibration_error(const std::vector<double>& prob, const std::vector<int>& is_positive) {
    constexpr int kBins = 10;
    double count[kBins] = {};
    double psum[kBins] = {};
    double ysum[kBins] = {};
    for (std::size_t i = 0; i < prob.size(); ++i) {
        const int b = std::clamp(static_cast<int>(std::floor(prob[i] * kBins)), 0, kBins - 1);
        count[b] += 1.0;
        psum[b] += prob[i];
        ysum[b] += is_positive[i] ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(prob.size());
    if (n == 0.0) return kNaN;
    double ece = 0.0;
    for (int b = 0; b < kBins; ++b) {
        if (count[b] > 0.0) ece += count[b] / n * std::abs(psum[b] / count[b] - ysum[b] / count[b]);
    }
    return ece;
}

std::vector<MetricValue> classification_metrics(const ClassFrame& frame, double threshold,
                                                const std::vector<std::size_t>* rows_in) {
    const std::vector<std::size_t> rows = all_rows(frame.truth.size(), rows_in);
    const auto L = static_cast<Eigen::Index>(frame.levels.size());
    const double n = static_cast<double>(rows.size());
    Eigen::MatrixXd table = Eigen::MatrixXd::Zero(L, L);
    double logloss = 0.0;
    std::vector<double> p_pos;
    std::vector<int> y_pos;
    const bool binary = L == 2;
    for (std::size_t r : rows) {
        const auto i = static_cast<Eigen::Index>(r);
        const int truth = frame.truth[r];
        Eigen::Index pred = 0;
        if (binary) {
            const double p = frame.prob(i, frame.positive);
            pred = p >= threshold ? frame.positive : 1 - frame.positive;
            p_pos.push_back(p);
            y_pos.push_back(truth == frame.positive ? 1 : 0);
        } else {
            frame.prob.row(i).maxCoeff(&pred);
        }
        table(truth, pred) += 1.0;
        const double pt = std::clamp(frame.prob(i, truth), 1e-15, 1.0 - 1e-15);
        logloss -= std::log(pt);
    }
    std::vector<MetricValue> out;
    out.push_back(value("accuracy", safe_div(table.diagonal().sum(), n)));
    out.push_back(value("kappa", cohen_kappa(table)));
    if (binary) {
        const int pos = frame.positive;
        const int neg = 1 - pos;
        const double tp = table(pos, pos);
        const double fn = table(pos, neg);
        const double fp = table(neg, pos);
        const double tn = table(neg, neg);
        const double sens = safe_div(tp, tp + fn);
        const double prec = safe_div(tp, tp + fp);
        out.push_back(value("sens", sens));
        out.push_back(value("spec", safe_div(tn, tn + fp)));
        out.push_back(value("precision", prec));
        out.push_back(value("f_meas", safe_div(2.0 * prec * sens, prec + sens)));
        out.push_back(value("roc_auc", roc_auc(p_pos, y_pos)));
    }
    out.push_back(value("logloss", safe_div(logloss, n)));
    if (binary) {
        double brier = 0.0;
        for (std::size_t k = 0; k < p_pos.size(); ++k) brier += (p_pos[k] - y_pos[k]) * (p_pos[k] - y_pos[k]);
        out.push_back(value("brier", safe_div(brier, n)));
        out.push_back(value("ece", expected_calibration_error(p_pos, y_pos)));
    }
    return out;
}

// ------------------------------------------------------------ regression

std::vector<MetricValue> regression_metrics(const RegressionFrame& frame, const std::vector<std::size_t>* rows_in) {
    const std::vector<std::size_t> rows = all_rows(frame.truth.size(), rows_in);
    const double n = static_cast<double>(rows.size());
    double sse = 0.0;
    double sae = 0.0;
    double ybar = 0.0;
    for (std::size_t r : rows) ybar += frame.truth[r];
    ybar = safe_div(ybar, n);
    double sst = 0.0;
    for (std::size_t r : rows) {
        const double e = frame.truth[r] - frame.estimate[r];
        sse += e * e;
        sae += std::abs(e);
        sst += (frame.truth[r] - ybar) * (frame.truth[r] - ybar);
    }
    std::vector<MetricValue> out;
    out.push_back(value("rmse", std::sqrt(safe_div(sse, n))));
    out.push_back(value("mae", safe_div(sae, n)));
    out.push_back(value("rsq", rows.size() < 2 || sst == 0.0 ? kNaN : 1.0 - sse / sst));
    return out;
}

// ------------------------------------------------------------ survival

double harrell_c(const std::vector<double>& risk, const std::vector<double>& time, const std::vector<double>& status) {
    double num = 0.0;
    double den = 0.0;
    const std::size_t n = time.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (status[i] != 1.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (!(time[i] < time[j])) continue;
            den += 1.0;
            if (risk[i] > risk[j]) {
                num += 1.0;
            } else if (risk[i] == risk[j]) {
                num += 0.5;
            }
        }
    }
    return safe_div(num, den);
}

double uno_c(const std::vector<double>& risk, const std::vector<double>& time, const std::vector<double>& status,
             double tau, bool* truncated) {
    const std::size_t n = time.size();
    if (n == 0) return kNaN;
    const KmCurve g = km_censoring_fit(time, status);
    if (truncated) *truncated = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (status[i] == 1.0 && time[i] < tau && g.left_limit(time[i]) <= 0.0) {
            tau = time[i];
            if (truncated) *truncated = true;
        }
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (status[i] != 1.0 || !(time[i] < tau)) continue;
        const double gi = g.left_limit(time[i]);
        const double w = 1.0 / (gi * gi);
        for (std::size_t j = 0; j < n; ++j) {
            if (!(time[i] < time[j])) continue;
            den += w;
            if (risk[i] > risk[j]) {
                num += w * 1.0;
            } else if (risk[i] == risk[j]) {
                num += w * 0.5;
            }
        }
    }
    return safe_div(num, den);
}

double standardize_c(double c) { return std::isnan(c) ? c : std::max(c, 1.0 - c); }

double brier_survival(const std::vector<double>& surv_at_t, const std::vector<double>& time,
                      const std::vector<double>& status, double t) {
    const std::size_t n = time.size();
    if (n == 0) return kNaN;
    const KmCurve g = km_censoring_fit(time, status);
    const double g_t = g.at(t);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = surv_at_t[i];
        if (time[i] <= t && status[i] == 1.0) {
            const double gi = g.left_limit(time[i]);
            if (gi <= 0.0) return kNaN;
            total += s * s / gi;
        } else if (time[i] > t) {
            if (g_t <= 0.0) return kNaN;
            total += (1.0 - s) * (1.0 - s) / g_t;
        }
    }
    return total / static_cast<double>(n);
}

double integrated_brier(const Eigen::MatrixXd& surv, const std::vector<double>& grid, const std::vector<double>& time,
                        const std::vector<double>& status) {
    if (grid.empty()) return kNaN;
    std::vector<double> b(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Eigen::VectorXd col = surv.col(static_cast<Eigen::Index>(k));
        b[k] = brier_survival(std::vector<double>(col.data(), col.data() + col.size()), time, status, grid[k]);
    }
    if (grid.size() == 1 || grid.back() == grid.front()) return b[0];
    double area = 0.0;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) area += 0.5 * (b[k] + b[k + 1]) * (grid[k + 1] - grid[k]);
    return area / (grid.back() - grid.front());
}

double curve_area(const SurvivalCurves& curves, std::size_t row, double tau) {
    if (!(tau > 0.0)) return 0.0;
    std::vector<double> cuts = {0.0};
    for (double k : curves.knots()) {
        if (k > 0.0 && k < tau) cuts.push_back(k);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    cuts.push_back(tau);
    auto f = [&](double t) { return curves.survival(row, t); };
    double area = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        area += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, cuts[k], cuts[k + 1], 12, 1e-12);
    }
    return area;
}

double rmst_diff(const std::vector<double>& predicted_rmst, const std::vector<double>& time,
                 const std::vector<double>& status, double tau) {
    if (time.empty()) return kNaN;
    const double observed = rmst(km_fit(time, status), tau);
    const double predicted = std::accumulate(predicted_rmst.begin(), predicted_rmst.end(), 0.0) /
                             static_cast<double>(predicted_rmst.size());
    return std::abs(observed - predicted);
}

SurvivalEvalSettings survival_eval_settings(const std::vector<double>& train_time,
                                            const std::vector<double>& train_status) {
    std::vector<double> ev;
    for (std::size_t i = 0; i < train_time.size(); ++i) {
        if (train_status[i] == 1.0) ev.push_back(train_time[i]);
    }
    if (ev.empty()) throw DataError("survival evaluation needs at least one training event");
    SurvivalEvalSettings s;
    for (double q : {0.25, 0.5, 0.75}) s.brier_times.push_back(*stats::quantile(ev, q));
    s.brier_times.erase(std::unique(s.brier_times.begin(), s.brier_times.end()), s.brier_times.end());
    const double lo = s.brier_times.front();
    const double hi = s.brier_times.back();
    constexpr int kGrid = 50;
    if (hi > lo) {
        for (int k = 0; k < kGrid; ++k) s.ibs_grid.push_back(lo + (hi - lo) * k / (kGrid - 1));
    } else {
        s.ibs_grid.push_back(lo);
    }
    s.rmst_tau = *stats::quantile(train_time, 0.9);
    return s;
}

SurvivalFrame make_survival_frame(std::vector<double> time, std::vector<double> status, std::vector<double> risk,
                                  const SurvivalCurves* curves, const SurvivalEvalSettings& settings) {
    SurvivalFrame f;
    f.settings = settings;
    const std::size_t n = time.size();
    f.time = std::move(time);
    f.status = std::move(status);
    f.risk = std::move(risk);
    if (curves) {
        f.has_curves = true;
        f.surv_brier.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(settings.brier_times.size()));
        f.surv_grid.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(settings.ibs_grid.size()));
        f.predicted_rmst.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            for (std::size_t k = 0; k < settings.brier_times.size(); ++k) {
                f.surv_brier(r, static_cast<Eigen::Index>(k)) = curves->survival(i, settings.brier_times[k]);
            }
            for (std::size_t k = 0; k < settings.ibs_grid.size(); ++k) {
                f.surv_grid(r, static_cast<Eigen::Index>(k)) = curves->survival(i, settings.ibs_grid[k]);
            }
            f.predicted_rmst[i] = curve_area(*curves, i, settings.rmst_tau);
        }
    }
    return f;
}

std::vector<MetricValue> survival_metrics(const SurvivalFrame& frame, bool standardize,
                                          const std::vector<std::size_t>* rows_in) {
    const std::vector<std::size_t> rows = all_rows(frame.time.size(), rows_in);
    const std::vector<double> time = pick(frame.time, rows);
    const std::vector<double> status = pick(frame.status, rows);
    const std::vector<double> risk = pick(frame.risk, rows);
    auto c = [&](double v) { return standardize ? standardize_c(v) : v; };

    std::vector<MetricValue> out;
    out.push_back(value("harrell_c", c(harrell_c(risk, time, status))));
    double tau = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < time.size(); ++i) {
        if (status[i] == 1.0) tau = std::max(tau, time[i]);
    }
    out.push_back(value("uno_c", std::isfinite(tau) ? c(uno_c(risk, time, status, tau)) : kNaN));

    const auto& s = frame.settings;
    for (std::size_t k = 0; k < s.brier_times.size(); ++k) {
        MetricValue m = value("brier", kNaN);
        m.at_time = s.brier_times[k];
        if (frame.has_curves) {
            std::vector<double> sk;
            for (std::size_t r : rows) sk.push_back(frame.surv_brier(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)));
            m.estimate = brier_survival(sk, time, status, s.brier_times[k]);
        } else {
            m.available = false;
        }
        out.push_back(m);
    }
    MetricValue ibs = value("ibs", kNaN);
    MetricValue rd = value("rmst_diff", kNaN);
    rd.at_time = s.rmst_tau;
    if (frame.has_curves) {
        Eigen::MatrixXd g(static_cast<Eigen::Index>(rows.size()), frame.surv_grid.cols());
        for (std::size_t k = 0; k < rows.size(); ++k) g.row(static_cast<Eigen::Index>(k)) = frame.surv_grid.row(static_cast<Eigen::Index>(rows[k]));
        ibs.estimate = integrated_brier(g, s.ibs_grid, time, status);
        rd.estimate = rmst_diff(pick(frame.predicted_rmst, rows), time, status, s.rmst_tau);
    } else {
        ibs.available = false;
        rd.available = false;
    }
    out.push_back(ibs);
    out.push_back(rd);
    return out;
}

// ------------------------------------------------------------ bootstrap

std::vector<std::optional<ConfidenceInterval>> bootstrap_metric_set(std::size_t n, const MetricSetFn& compute,
                                                                     const std::vector<double>& estimates,
                                                                     std::size_t B, double level, std::uint64_t seed) {
    if (B < 2) throw ConfigError("bootstrap needs at least 2 samples");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("bootstrap level must lie in (0, 1)");
    if (n == 0) throw DataError("bootstrap over an empty frame");
    constexpr int kRedraws = 10;
    const std::size_t m = estimates.size();
    std::vector<std::vector<double>> reps(m);
    std::vector<std::size_t> dropped(m, 0);
    std::vector<std::size_t> rows(n);
    for (std::size_t b = 0; b < B; ++b) {
        std::vector<bool> filled(m, false);
        std::size_t remaining = m;
        for (int attempt = 0; attempt <= kRedraws && remaining > 0; ++attempt) {
            Rng rng(mix64({seed, b, static_cast<std::uint64_t>(attempt)}));
            for (auto& r : rows) r = rng.index(n);
            const std::vector<double> v = compute(rows);
            for (std::size_t k = 0; k < m; ++k) {
                if (!filled[k] && !std::isnan(v[k])) {
                    reps[k].push_back(v[k]);
                    filled[k] = true;
                    --remaining;
                }
            }
        }
        for (std::size_t k = 0; k < m; ++k) {
            if (!filled[k]) ++dropped[k];
        }
    }
    std::vector<std::optional<ConfidenceInterval>> out(m);
    for (std::size_t k = 0; k < m; ++k) {
        if (reps[k].empty() || std::isnan(estimates[k])) continue;
        ConfidenceInterval ci;
        ci.lower = std::min(*stats::quantile(reps[k], (1.0 - level) / 2.0), estimates[k]);
        ci.upper = std::max(*stats::quantile(reps[k], (1.0 + level) / 2.0), estimates[k]);
        ci.n_boot = B;
        ci.n_dropped = dropped[k];
        ci.level = level;
        out[k] = ci;
    }
    return out;
}

ConfidenceInterval bootstrap_ci(std::size_t n, const std::function<double(const std::vector<std::size_t>&)>& stat,
                                double estimate, std::size_t B, double level, std::uint64_t seed) {
    auto ci = bootstrap_metric_set(
        n, [&](const std::vector<std::size_t>& rows) { return std::vector<double>{stat(rows)}; }, {estimate}, B,
        level, seed);
    if (!ci[0]) throw DataError("every bootstrap resample was degenerate");
    return *ci[0];
}

}  // namespace leakguard
