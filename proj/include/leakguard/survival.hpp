#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace leakguard {

/// Piecewise-constant hazard. Interval k is (c_{k-1}, c_k] with c_0 = 0 and
/// the last interval unbounded; `rates` has one entry per interval.
struct PexpParams {
    std::vector<double> cutpoints;
    std::vector<double> rates;

    /// rates[0] = exp(log_rate), rates[k] = exp(log_rate + log_ratios[k-1]).
    static PexpParams from_log(std::vector<double> cutpoints, double log_rate, const std::vector<double>& log_ratios);
    double log_rate() const;
    std::vector<double> log_ratios() const;
    /// Throws DataError unless cutpoints are positive, finite and strictly
    /// increasing and every rate is positive and finite.
    void validate() const;
    /// Index of the interval containing t (t > 0).
    std::size_t interval(double t) const;
};

double pexp_hazard(const PexpParams& p, double t);
double pexp_cumhaz(const PexpParams& p, double t);
double pexp_survival(const PexpParams& p, double t);
double pexp_density(const PexpParams& p, double t);
double pexp_quantile(const PexpParams& p, double prob);

/// Drops nonpositive / non-finite entries and duplicates, sorts the rest.
std::vector<double> normalize_cutpoints(const std::vector<double>& cutpoints,
                                        std::vector<std::string>* warnings = nullptr);

/// sum_i delta_i log h(t_i) - H(t_i)
double pexp_loglik(const PexpParams& p, const std::vector<double>& time, const std::vector<double>& status);

struct PexpFit {
    PexpParams params;
    std::vector<double> beta;   // proportional-hazards coefficients (empty without covariates)
    double loglik = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    std::vector<std::string> warnings;
};

/// Maximum likelihood over (log_rate, log_ratios). Without covariates the
/// per-interval estimate events/exposure is exact and is returned directly.
PexpFit fit_pexp(const std::vector<double>& time, const std::vector<double>& status,
                 const std::vector<double>& cutpoints);

/// Same model with hazard lambda_k * exp(beta' x_i); `x` is row-major n x p.
/// Newton iterations from log_rate = log(events / exposure), ratios 0, beta 0.
PexpFit fit_pexp_regression(const std::vector<double>& time, const std::vector<double>& status,
                            const std::vector<double>& x, std::size_t p, const std::vector<double>& cutpoints);

/// Product-limit estimate stored at distinct event times.
struct KmCurve {
    std::vector<double> times;
    std::vector<double> at_risk;
    std::vector<double> events;
    std::vector<double> survival;

    /// S(t), right-continuous.
    double at(double t) const;
    /// S(t-), the value just before t.
    double left_limit(double t) const;
};

KmCurve km_fit(const std::vector<double>& time, const std::vector<double>& status);
/// Kaplan-Meier of the censoring distribution (status flipped).
KmCurve km_censoring_fit(const std::vector<double>& time, const std::vector<double>& status);

/// Area under a right-continuous step function equal to 1 before
/// times[0] and values[k] on [times[k], times[k+1]), over [0, tau].
double step_area(const std::vector<double>& times, const std::vector<double>& values, double tau);
double rmst(const KmCurve& curve, double tau);

/// Log-time bounds for AFT fitting: [log t, log t] for events and
/// [log t, +inf) for right-censored rows.
struct AftIntervalTargets {
    std::vector<double> lower;
    std::vector<double> upper;
};

/// Throws DataError on nonpositive time or status outside {0, 1};
/// UnsupportedError when start times are supplied.
AftIntervalTargets build_aft_interval_targets(const std::vector<double>& time, const std::vector<double>& status,
                                              const std::vector<double>* start = nullptr);

}  // namespace leakguard
