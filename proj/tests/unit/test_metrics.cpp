#include <cmath>
#include <map>

#include "doctest.h"
#include "leakguard/errors.hpp"
#include "leakguard/metrics.hpp"
#include "leakguard/rng.hpp"
#include "oracles.hpp"

using namespace leakguard;

namespace {

std::map<std::string, double> by_key(const std::vector<MetricValue>& v) {
    std::map<std::string, double> m;
    for (const auto& x : v) m[x.key()] = x.estimate;
    return m;
}

ClassFrame binary_frame(const std::vector<double>& p1, const std::vector<int>& truth) {
    ClassFrame f;
    f.truth = truth;
    f.levels = {"neg", "pos"};
    f.prob.resize(static_cast<Eigen::Index>(p1.size()), 2);
    for (std::size_t i = 0; i < p1.size(); ++i) {
        f.prob(static_cast<Eigen::Index>(i), 0) = 1.0 - p1[i];
        f.prob(static_cast<Eigen::Index>(i), 1) = p1[i];
    }
    return f;
}

class ConstCurves final : public SurvivalCurves {
public:
    ConstCurves(std::size_t n, double v) : n_(n), v_(v) {}
    std::size_t rows() const override { return n_; }
    double survival(std::size_t, double) const override { return v_; }

private:
    std::size_t n_;
    double v_;
};

class ExpCurves final : public SurvivalCurves {
public:
    explicit ExpCurves(std::vector<double> rate) : rate_(std::move(rate)) {}
    std::size_t rows() const override { return rate_.size(); }
    double survival(std::size_t i, double t) const override { return std::exp(-rate_[i] * t); }

private:
    std::vector<double> rate_;
};

}  // namespace

TEST_CASE("classification: perfect separation") {
    auto m = by_key(classification_metrics(binary_frame({0.9, 0.8, 0.3, 0.2}, {1, 1, 0, 0})));
    CHECK(m["accuracy"] == 1.0);
    CHECK(m["roc_auc"] == 1.0);
    CHECK(m["kappa"] == 1.0);
    CHECK(m["sens"] == 1.0);
    CHECK(m["spec"] == 1.0);
}

TEST_CASE("classification: calibrated bins give zero ECE") {
    // Bin [0.2, 0.3): four rows at 0.25 with one event; bin [0.7, 0.8): four rows at 0.75 with three.
    std::vector<double> p{0.25, 0.25, 0.25, 0.25, 0.75, 0.75, 0.75, 0.75};
    std::vector<int> y{1, 0, 0, 0, 1, 1, 1, 0};
    CHECK(std::fabs(expected_calibration_error(p, y)) < 1e-15);
}

TEST_CASE("classification: 6-row AUC equals pair enumeration") {
    std::vector<double> p{0.1, 0.4, 0.35, 0.8, 0.4, 0.65};
    std::vector<int> y{0, 1, 0, 1, 0, 1};
    CHECK(roc_auc(p, y) == oracle::pair_auc(p, y));
    CHECK(by_key(classification_metrics(binary_frame(p, y)))["roc_auc"] == oracle::pair_auc(p, y));
}

TEST_CASE("AUC undefined for a single class") { CHECK(std::isnan(roc_auc({0.2, 0.3}, {1, 1}))); }

TEST_CASE("AUC invariant to increasing transforms") {
    Rng rng(4);
    std::vector<double> s(40), t(40);
    std::vector<int> y(40);
    for (int i = 0; i < 40; ++i) {
        s[i] = rng.normal();
        t[i] = std::exp(3.0 * s[i]) + 2.0;
        y[i] = rng.uniform() < 0.5;
    }
    CHECK(roc_auc(s, y) == roc_auc(t, y));
}

TEST_CASE("kappa: diagonal and independence tables") {
    Eigen::MatrixXd diag(3, 3);
    diag << 5, 0, 0, 0, 3, 0, 0, 0, 7;
    CHECK(cohen_kappa(diag) == doctest::Approx(1.0));
    Eigen::MatrixXd indep(2, 2);
    indep << 6, 4, 9, 6;  // rows proportional: outer product of margins
    CHECK(std::fabs(cohen_kappa(indep)) < 1e-12);
    Eigen::MatrixXd off(2, 2);
    off << 5, 1, 0, 5;
    CHECK(cohen_kappa(off) < 1.0);
}

TEST_CASE("regression metrics") {
    auto exact = by_key(regression_metrics({{1, 2, 4}, {1, 2, 4}}));
    CHECK(exact["rmse"] == 0.0);
    CHECK(exact["mae"] == 0.0);
    CHECK(exact["rsq"] == 1.0);
    auto mean = by_key(regression_metrics({{1, 2, 6}, {3, 3, 3}}));
    CHECK(mean["rsq"] == 0.0);
    CHECK(std::isnan(by_key(regression_metrics({{2, 2, 2}, {1, 2, 3}}))["rsq"]));

    Rng rng(10);
    std::vector<double> y(10), f(10);
    for (int i = 0; i < 10; ++i) {
        y[i] = rng.normal();
        f[i] = y[i] + 0.3 * rng.normal();
    }
    double se = 0.0, ae = 0.0, my = 0.0, sst = 0.0;
    for (int i = 0; i < 10; ++i) {
        se += (y[i] - f[i]) * (y[i] - f[i]);
        ae += std::fabs(y[i] - f[i]);
        my += y[i] / 10.0;
    }
    for (int i = 0; i < 10; ++i) sst += (y[i] - my) * (y[i] - my);
    auto r = by_key(regression_metrics({y, f}));
    CHECK(std::fabs(r["rmse"] - std::sqrt(se / 10.0)) < 1e-12);
    CHECK(std::fabs(r["mae"] - ae / 10.0) < 1e-12);
    CHECK(std::fabs(r["rsq"] - (1.0 - se / sst)) < 1e-12);
}

TEST_CASE("Harrell C basics") {
    std::vector<double> t{1, 2, 3, 4, 5}, s{1, 1, 1, 1, 1};
    CHECK(harrell_c({5, 4, 3, 2, 1}, t, s) == 1.0);
    CHECK(harrell_c({1, 1, 1, 1, 1}, t, s) == 0.5);
}

TEST_CASE("Harrell C equals pair enumeration on a censored toy") {
    std::vector<double> r{0.3, 1.2, -0.4, 0.9, 0.9, 2.1, -1.0, 0.0};
    std::vector<double> t{4, 2, 7, 3, 3, 1, 9, 5};
    std::vector<double> s{1, 0, 1, 1, 0, 1, 0, 1};
    CHECK(harrell_c(r, t, s) == oracle::pair_harrell(r, t, s));
}

TEST_CASE("Harrell C of negated risk is the complement") {
    Rng rng(13);
    std::vector<double> r(30), t(30), s(30);
    for (int i = 0; i < 30; ++i) {
        r[i] = rng.normal();
        t[i] = 1.0 + rng.exponential(1.0);
        s[i] = 1.0;
    }
    std::vector<double> neg(30);
    for (int i = 0; i < 30; ++i) neg[i] = -r[i];
    CHECK(harrell_c(r, t, s) + harrell_c(neg, t, s) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("standardize_c") {
    CHECK(standardize_c(0.42) == doctest::Approx(0.58).epsilon(1e-15));
    CHECK(standardize_c(0.5) == 0.5);
    CHECK(standardize_c(0.7) == 0.7);
    for (double c : {0.0, 0.13, 0.42, 0.5, 0.77, 1.0}) {
        double a = standardize_c(c);
        CHECK(a >= 0.5);
        CHECK(a <= 1.0);
        CHECK(standardize_c(a) == a);
    }
}

TEST_CASE("Uno C equals Harrell C without censoring") {
    Rng rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> r(25), t(25), s(25, 1.0);
        for (int i = 0; i < 25; ++i) {
            r[i] = std::round(rng.normal() * 4.0);
            t[i] = 1.0 + static_cast<double>(rng.index(20));
        }
        double tau = *std::max_element(t.begin(), t.end()) + 1.0;
        CHECK(uno_c(r, t, s, tau) == harrell_c(r, t, s));
    }
}

TEST_CASE("Uno C: perfect ranking and a weighted toy") {
    std::vector<double> t{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<double> s{1, 0, 1, 1, 0, 1, 0, 1, 1, 0};
    std::vector<double> perfect(10);
    for (int i = 0; i < 10; ++i) perfect[i] = 10.0 - i;
    CHECK(uno_c(perfect, t, s, 11.0) == doctest::Approx(1.0));
    std::vector<double> r{0.2, 0.5, 0.1, 0.9, 0.4, 0.3, 0.8, 0.6, 0.0, 0.7};
    CHECK(uno_c(r, t, s, 9.5) == doctest::Approx(oracle::pair_uno(r, t, s, 9.5)).epsilon(1e-13));
}

TEST_CASE("Brier: no censoring and constant one half") {
    std::vector<double> t{1, 2, 3, 4}, s{1, 1, 1, 1};
    CHECK(brier_survival({0.5, 0.5, 0.5, 0.5}, t, s, 2.5) == 0.25);
    std::vector<double> sv{0.9, 0.2, 0.7, 0.6};
    double mse = (0.9 * 0.9 + 0.2 * 0.2 + 0.3 * 0.3 + 0.4 * 0.4) / 4.0;
    CHECK(brier_survival(sv, t, s, 2.5) == doctest::Approx(mse).epsilon(1e-14));
}

TEST_CASE("integrated Brier lies within the pointwise range") {
    Rng rng(15);
    std::vector<double> t(30), s(30);
    for (int i = 0; i < 30; ++i) {
        t[i] = 0.5 + rng.exponential(0.5);
        s[i] = rng.uniform() < 0.7;
    }
    std::vector<double> grid{0.8, 1.2, 1.6, 2.0, 2.4};
    Eigen::MatrixXd surv(30, 5);
    for (int i = 0; i < 30; ++i)
        for (int k = 0; k < 5; ++k) surv(i, k) = std::exp(-(0.3 + 0.02 * i) * grid[k]);
    std::vector<double> pw;
    for (int k = 0; k < 5; ++k) {
        std::vector<double> col(30);
        for (int i = 0; i < 30; ++i) col[i] = surv(i, k);
        pw.push_back(brier_survival(col, t, s, grid[k]));
    }
    double ibs = integrated_brier(surv, grid, t, s);
    CHECK(ibs >= *std::min_element(pw.begin(), pw.end()));
    CHECK(ibs <= *std::max_element(pw.begin(), pw.end()));
}

TEST_CASE("RMST difference") {
    std::vector<double> t{1, 1}, s{1, 1};
    // Survival one everywhere against a KM that drops to zero at 1.
    CHECK(rmst_diff({2.0, 2.0}, t, s, 2.0) == doctest::Approx(1.0));
    ConstCurves one(2, 1.0);
    CHECK(curve_area(one, 0, 2.0) == doctest::Approx(2.0));
}

TEST_CASE("curve area matches fine quadrature") {
    ExpCurves c({0.3, 1.7});
    for (std::size_t i = 0; i < 2; ++i) {
        double ref = oracle::simpson([&](double u) { return c.survival(i, u); }, 0.0, 3.0, 20000);
        CHECK(std::fabs(curve_area(c, i, 3.0) - ref) < 1e-6);
    }
}

TEST_CASE("survival metric set exposes realized Brier times") {
    Rng rng(16);
    std::vector<double> t(60), s(60), risk(60), rate(60);
    for (int i = 0; i < 60; ++i) {
        rate[i] = 0.2 + rng.uniform();
        t[i] = rng.exponential(rate[i]) + 0.01;
        s[i] = rng.uniform() < 0.75;
        risk[i] = rate[i];
    }
    auto settings = survival_eval_settings(t, s);
    CHECK(settings.brier_times.size() == 3);
    CHECK(settings.ibs_grid.size() == 50);
    ExpCurves curves(rate);
    auto frame = make_survival_frame(t, s, risk, &curves, settings);
    auto m = survival_metrics(frame);
    int brier = 0;
    for (const auto& v : m)
        if (v.name == "brier") {
            ++brier;
            CHECK(v.at_time.has_value());
            CHECK(v.key().find("brier@") == 0);
        }
    CHECK(brier == 3);
    auto no_curves = survival_metrics(make_survival_frame(t, s, risk, nullptr, settings));
    for (const auto& v : no_curves)
        if (v.name == "brier" || v.name == "ibs") CHECK_FALSE(v.available);
}

TEST_CASE("metric directions") {
    CHECK(metric_direction("roc_auc") == Direction::maximize);
    CHECK(metric_direction("harrell_c") == Direction::maximize);
    CHECK(metric_direction("rmse") == Direction::minimize);
    CHECK(metric_direction("ibs") == Direction::minimize);
    CHECK_THROWS_AS(metric_direction("f2"), ConfigError);
}

TEST_CASE("bootstrap: constant frame gives zero width") {
    auto ci = bootstrap_ci(
        20, [](const std::vector<std::size_t>&) { return 0.75; }, 0.75, 500, 0.95, 3);
    CHECK(ci.lower == 0.75);
    CHECK(ci.upper == 0.75);
    CHECK(ci.n_boot == 500);
}

TEST_CASE("bootstrap: interval contains the estimate and respects B") {
    Rng rng(17);
    std::vector<double> v(50);
    for (auto& x : v) x = rng.normal();
    auto mean_of = [&](const std::vector<std::size_t>& rows) {
        double s = 0.0;
        for (auto r : rows) s += v[r];
        return s / static_cast<double>(rows.size());
    };
    std::vector<std::size_t> all(50);
    for (std::size_t i = 0; i < 50; ++i) all[i] = i;
    double est = mean_of(all);
    auto ci = bootstrap_ci(50, mean_of, est, 200, 0.9, 5);
    CHECK(ci.lower <= est);
    CHECK(ci.upper >= est);
    CHECK(ci.n_boot == 200);
    CHECK(ci.level == 0.9);
    CHECK_THROWS_AS(bootstrap_ci(50, mean_of, est, 1, 0.9, 5), ConfigError);
}
