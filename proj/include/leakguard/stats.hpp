#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace leakguard::stats {

/// Entries that are NaN are treated as missing by every function here.
std::vector<double> finite_values(std::span<const double> values);

std::optional<double> mean(std::span<const double> values);
/// Sample standard deviation (n - 1 denominator); needs two finite values.
std::optional<double> sd(std::span<const double> values);
std::optional<double> median(std::span<const double> values);
std::optional<double> min(std::span<const double> values);
std::optional<double> max(std::span<const double> values);

/// Quantile by linear interpolation between order statistics
/// (h = (n - 1) p, the "type 7" rule).
std::optional<double> quantile(std::span<const double> values, double p);

double normal_pdf(double z);
double normal_cdf(double z);
/// log(1 - Phi(z)), accurate far into the upper tail.
double normal_log_sf(double z);
/// phi(z) / (1 - Phi(z)), the standard normal hazard.
double normal_hazard(double z);
double normal_quantile(double p);
double student_t_quantile(double p, double df);

struct TInterval {
    double mean;
    double sd;
    double lower;
    double upper;
    std::size_t n;
};

/// Two-sided t-based confidence interval for the mean; needs n >= 2.
TInterval t_interval(std::span<const double> values, double level = 0.95);

}  // namespace leakguard::stats
