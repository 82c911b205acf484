#include "leakguard/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "leakguard/errors.hpp"

namespace leakguard::stats {

std::vector<double> finite_values(std::span<const double> values) {
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) {
        if (!std::isnan(v)) out.push_back(v);
    }
    return out;
}

std::optional<double> mean(std::span<const double> values) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : values) {
        if (std::isnan(v)) continue;
        sum += v;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::optional<double> sd(std::span<const double> values) {
    auto m = mean(values);
    if (!m) return std::nullopt;
    double ss = 0.0;
    std::size_t n = 0;
    for (double v : values) {
        if (std::isnan(v)) continue;
        ss += (v - *m) * (v - *m);
        ++n;
    }
    if (n < 2) return std::nullopt;
    return std::sqrt(ss / static_cast<double>(n - 1));
}

std::optional<double> quantile(std::span<const double> values, double p) {
    std::vector<double> v = finite_values(values);
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::optional<double> median(std::span<const double> values) { return quantile(values, 0.5); }

std::optional<double> min(std::span<const double> values) {
    std::vector<double> v = finite_values(values);
    if (v.empty()) return std::nullopt;
    return *std::min_element(v.begin(), v.end());
}

std::optional<double> max(std::span<const double> values) {
    std::vector<double> v = finite_values(values);
    if (v.empty()) return std::nullopt;
    return *std::max_element(v.begin(), v.end());
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

namespace {

// Q(z)/phi(z) for large z by the asymptotic series; relative error below
// 1e-16 for z >= 30.
double mills_ratio_asymptotic(double z) {
    const double z2 = z * z;
    double term = 1.0 / z;
    double sum = term;
    for (int k = 1; k <= 8; ++k) {
        term *= -static_cast<double>(2 * k - 1) / z2;
        sum += term;
    }
    return sum;
}

constexpr double kTailSwitch = 30.0;

}  // namespace

double normal_log_sf(double z) {
    if (z < kTailSwitch) return std::log(0.5 * std::erfc(z / std::sqrt(2.0)));
    return std::log(normal_pdf(z)) + std::log(mills_ratio_asymptotic(z));
}

double normal_hazard(double z) {
    if (z < kTailSwitch) {
        const double sf = 0.5 * std::erfc(z / std::sqrt(2.0));
        return normal_pdf(z) / sf;
    }
    return 1.0 / mills_ratio_asymptotic(z);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DataError("normal quantile needs p in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double student_t_quantile(double p, double df) {
    return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

TInterval t_interval(std::span<const double> values, double level) {
    if (values.size() < 2) throw DataError("t interval needs at least two values");
    const double n = static_cast<double>(values.size());
    const double m = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    const double s = std::sqrt(ss / (n - 1.0));
    const double q = student_t_quantile(0.5 + level / 2.0, n - 1.0);
    const double half = q * s / std::sqrt(n);
    return {m, s, m - half, m + half, values.size()};
}

}  // namespace leakguard::stats
