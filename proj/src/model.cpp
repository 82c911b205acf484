#include "leakguard/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "leakguard/errors.hpp"
#include "leakguard/stats.hpp"
#include "leakguard/survival.hpp"

namespace leakguard {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::map<std::string, std::vector<HyperParam>, std::less<>>& registry() {
    static const std::map<std::string, std::vector<HyperParam>, std::less<>> r = {
        {"logistic_reg", {}},
        {"linear_reg", {}},
        {"elastic_net",
         {{"penalty", 0.01, 0.0, kInf, false, false}, {"mixture", 0.5, 0.0, 1.0, false, false}}},
        {"decision_tree",
         {{"tree_depth", 10, 1, 64, false, true}, {"min_n", 2, 1, kInf, false, true}}},
        {"rand_forest",
         {{"trees", 100, 1, kInf, false, true},
          {"mtry", kNaN, 1, kInf, false, true},
          {"min_n", kNaN, 1, kInf, false, true}}},
        {"cox_ph", {}},
        {"penalized_cox", {{"penalty", 0.01, 0.0, kInf, false, false}}},
        {"weibull_aft", {}},
        {"piecewise_exp", {}},
        {"gbm",
         {{"trees", 100, 0, kInf, false, true},
          {"learn_rate", 0.1, 0.0, kInf, true, false},
          {"tree_depth", 3, 1, 64, false, true},
          {"min_n", 10, 1, kInf, false, true},
          {"sigma", 1.0, 0.0, kInf, true, false},
          {"sample_size", 1.0, 0.0, 1.0, true, false}}},
    };
    return r;
}

class CurveFn final : public SurvivalCurves {
public:
    CurveFn(std::size_t n, std::function<double(std::size_t, double)> f, std::vector<double> knots = {})
        : n_(n), f_(std::move(f)), knots_(std::move(knots)) {}
    std::size_t rows() const override { return n_; }
    std::vector<double> knots() const override { return knots_; }
    double survival(std::size_t row, double t) const override {
        if (row >= n_) throw DataError("survival curve row out of range");
        return t <= 0.0 ? 1.0 : f_(row, t);
    }

private:
    std::size_t n_;
    std::function<double(std::size_t, double)> f_;
    std::vector<double> knots_;
};

double step_value(const std::vector<double>& times, const std::vector<double>& values, double t) {
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    return it == times.begin() ? 0.0 : values[static_cast<std::size_t>(it - times.begin()) - 1];
}

Eigen::MatrixXd binary_probs(const Eigen::VectorXd& p1) {
    Eigen::MatrixXd out(p1.size(), 2);
    out.col(0) = 1.0 - p1.array();
    out.col(1) = p1;
    return out;
}

}  // namespace

class ModelImpl {
public:
    virtual ~ModelImpl() = default;
    virtual std::vector<PredictionKind> kinds() const = 0;
    virtual Prediction predict(const Eigen::MatrixXd& x, PredictionKind kind) const = 0;
};

namespace {

class LogisticImpl final : public ModelImpl {
public:
    explicit LogisticImpl(LogisticFit f) : fit_(std::move(f)) {}
    std::vector<PredictionKind> kinds() const override { return {PredictionKind::class_prob}; }
    Prediction predict(const Eigen::MatrixXd& x, PredictionKind) const override {
        const Eigen::VectorXd eta = (x * fit_.beta).array() + fit_.intercept;
        Prediction p;
        p.kind = PredictionKind::class_prob;
        p.class_prob = binary_probs((1.0 / (1.0 + (-eta.array()).exp())).matrix());
        return p;
    }

private:
    LogisticFit fit_;
};

class LinearImpl final : public ModelImpl {
public:
    LinearImpl(double b0, Eigen::VectorXd beta) : b0_(b0), beta_(std::move(beta)) {}
    std::vector<PredictionKind> kinds() const override { return {PredictionKind::numeric}; }
    Prediction predict(const Eigen::MatrixXd& x, PredictionKind) const override {
        const Eigen::VectorXd yhat = (x * beta_).array() + b0_;
        Prediction p;
        p.kind = PredictionKind::numeric;
        p.values.assign(yhat.data(), yhat.data() + yhat.size());
        return p;
    }

private:
    double b0_;
    Eigen::VectorXd beta_;
};

class ForestImpl final : public ModelImpl {
public:
    explicit ForestImpl(Forest f) : forest_(std::move(f)) {}
    std::vector<PredictionKind> kinds() const override {
        return {forest_.n_classes > 0 ? PredictionKind::class_prob : PredictionKind::numeric};
    }
    Prediction predict(const Eigen::MatrixXd& x, PredictionKind kind) const override {
        Prediction p;
        p.kind = kind;
        const Eigen::MatrixXd raw = forest_.predict(x);
        if (forest_.n_classes > 0) {
            p.class_prob = raw;
        } else {
            p.values.assign(raw.data(), raw.data() + raw.rows());
        }
        return p;
    }

private:
    Forest forest_;
};

class CoxImpl final : public ModelImpl {
public:
    explicit CoxImpl(CoxFit f) : fit_(std::move(f)) {}
    std::vector<PredictionKind> kinds() const override {
        return {PredictionKind::risk, PredictionKind::survival_curve};
    }
    Prediction predict(const Eigen::MatrixXd& x, PredictionKind kind) const override {
        const Eigen::VectorXd lp = (x.rowwise() - fit_.center.transpose()) * fit_.beta;
        Prediction p;
        p.kind = kind;
        p.values.assign(lp.data(), lp.data() + lp.size());
        if (kind == PredictionKind::survival_curve) {
            auto self = fit_;
            std::vector<double> risk(p.values.size());
            for (std::size_t i = 0; i < risk.size(); ++i) risk[i] = std::exp(p.values[i]);
            p.curves = std::make_shared<CurveFn>(risk.size(), [self, risk](std::size_t i, double t) {
                return std::exp(-step_value(self.base_times, self.base_cumhaz, t) * risk[i]);
            }, fit_.base_times);
        }
        return p;
    }

private:
    CoxFit fit_;
};

class WeibullImpl final : public ModelImpl {
public:
    explicit WeibullImpl(WeibullFit f) : fit_(std::move(f)) {}
    std::vector<PredictionKind> kinds() const override {
        return {PredictionKind::risk, PredictionKind::survival_curve, PredictionKind::log_time};
    }
    Prediction predict(const Eigen::MatrixXd& x, PredictionKind kind) const override {
        const Eigen::VectorXd eta = (x * fit_.beta).array() + fit_.mu;
        Prediction p;
        p.kind = kind;
        p.values.resize(static_cast<std::size_t>(eta.size()));
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            p.values[static_cast<std::size_t>(i)] = kind == PredictionKind::risk ? -eta[i] : eta[i];
        }
        if (kind == PredictionKind::survival_curve) {
            const double sigma = std::exp(fit_.log_sigma);
            std::vector<double> e(eta.data(), eta.data() + eta.size());
            p.curves = std::make_shared<CurveFn>(e.size(), [e, sigma](std::size_t i, double t) {
                return std::exp(-std::exp((std::log(t) - e[i]) / sigma));
            });
        }
        return p;
    }

private:
    WeibullFit fit_;
};

class PexpImpl final : public ModelImpl {
public:
    explicit PexpImpl(PexpFit f) : fit_(std::move(f)) {}
    std::vector<PredictionKind> kinds() const override {
        return {PredictionKind::risk, PredictionKind::survival_curve};
    }
    Prediction predict(const Eigen::MatrixXd& x, PredictionKind kind) const override {
        Prediction p;
        p.kind = kind;
        p.values.assign(static_cast<std::size_t>(x.rows()), 0.0);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            double lp = 0.0;
            for (std::size_t j = 0; j < fit_.beta.size(); ++j) lp += fit_.beta[j] * x(i, static_cast<Eigen::Index>(j));
            p.values[static_cast<std::size_t>(i)] = lp;
        }
        if (kind == PredictionKind::survival_curve) {
            const PexpParams params = fit_.params;
            std::vector<double> risk(p.values.size());
            for (std::size_t i = 0; i < risk.size(); ++i) risk[i] = std::exp(p.values[i]);
            p.curves = std::make_shared<CurveFn>(risk.size(), [params, risk](std::size_t i, double t) {
                return std::exp(-pexp_cumhaz(params, t) * risk[i]);
            }, params.cutpoints);
        }
        return p;
    }

private:
    PexpFit fit_;
};

class GbmImpl final : public ModelImpl {
public:
    explicit GbmImpl(GbmModel m) : model_(std::move(m)) {}
    std::vector<PredictionKind> kinds() const override {
        if (model_.params.loss == GbmLoss::squared) return {PredictionKind::numeric};
        return {PredictionKind::risk, PredictionKind::survival_curve, PredictionKind::log_time};
    }
    Prediction predict(const Eigen::MatrixXd& x, PredictionKind kind) const override {
        const Eigen::VectorXd eta = model_.predict(x);
        Prediction p;
        p.kind = kind;
        p.values.resize(static_cast<std::size_t>(eta.size()));
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            p.values[static_cast<std::size_t>(i)] = kind == PredictionKind::risk ? -eta[i] : eta[i];
        }
        if (kind == PredictionKind::survival_curve) {
            const double sigma = model_.params.sigma;
            std::vector<double> e(eta.data(), eta.data() + eta.size());
            p.curves = std::make_shared<CurveFn>(e.size(), [e, sigma](std::size_t i, double t) {
                return std::exp(stats::normal_log_sf((std::log(t) - e[i]) / sigma));
            });
        }
        return p;
    }

private:
    GbmModel model_;
};

}  // namespace

std::string_view to_string(PredictionKind kind) {
    switch (kind) {
        case PredictionKind::class_prob: return "class_prob";
        case PredictionKind::numeric: return "numeric";
        case PredictionKind::risk: return "risk_score";
        case PredictionKind::survival_curve: return "survival_curve";
        case PredictionKind::log_time: return "log_time";
    }
    return "?";
}

std::vector<std::string> algorithm_names() {
    std::vector<std::string> out;
    for (const auto& [name, params] : registry()) out.push_back(name);
    return out;
}

const std::vector<HyperParam>& hyperparameters(std::string_view algorithm) {
    auto it = registry().find(algorithm);
    if (it == registry().end()) throw ConfigError("unknown algorithm '" + std::string(algorithm) + "'");
    return it->second;
}

bool supports_task(std::string_view algorithm, TaskKind task) {
    hyperparameters(algorithm);
    switch (task) {
        case TaskKind::classification:
            return algorithm == "logistic_reg" || algorithm == "decision_tree" || algorithm == "rand_forest";
        case TaskKind::regression:
            return algorithm == "linear_reg" || algorithm == "elastic_net" || algorithm == "decision_tree" ||
                   algorithm == "rand_forest" || algorithm == "gbm";
        case TaskKind::survival:
            return algorithm == "cox_ph" || algorithm == "penalized_cox" || algorithm == "weibull_aft" ||
                   algorithm == "piecewise_exp" || algorithm == "gbm";
    }
    return false;
}

void validate_model_spec(const ModelSpec& spec, TaskKind task) {
    const auto& hp = hyperparameters(spec.algorithm);
    if (!supports_task(spec.algorithm, task)) {
        throw ConfigError("algorithm '" + spec.algorithm + "' does not support task " + std::string(to_string(task)));
    }
    for (const auto& [name, value] : spec.params) {
        auto it = std::find_if(hp.begin(), hp.end(), [&](const HyperParam& h) { return h.name == name; });
        if (it == hp.end()) {
            throw ConfigError("parameter '" + name + "' does not belong to algorithm '" + spec.algorithm + "'");
        }
        const bool below = it->lower_open ? !(value > it->lower) : !(value >= it->lower);
        if (below || !(value <= it->upper) || (it->integer && value != std::floor(value))) {
            throw ConfigError("parameter '" + name + "' = " + std::to_string(value) + " is out of range for '" +
                              spec.algorithm + "'");
        }
    }
    if (spec.loss) {
        if (spec.algorithm != "gbm") throw ConfigError("'loss' applies to gbm only");
        if (*spec.loss == GbmLoss::squared && task != TaskKind::regression) {
            throw ConfigError("gbm squared loss needs a regression task");
        }
        if (*spec.loss == GbmLoss::aft_normal && task != TaskKind::survival) {
            throw ConfigError("gbm aft_normal loss needs a survival task");
        }
    }
    if (!spec.cutpoints.empty() && spec.algorithm != "piecewise_exp") {
        throw ConfigError("'cutpoints' apply to piecewise_exp only");
    }
}

TrainingData make_training_data(const Dataset& data, TaskKind task) {
    TrainingData td;
    td.task = task;
    td.features = data.names_with_role(Role::predictor);
    td.x = feature_matrix(data, td.features);
    const auto n = static_cast<Eigen::Index>(data.n_rows());
    if (task == TaskKind::survival) {
        const auto t = data.names_with_role(Role::time);
        const auto s = data.names_with_role(Role::status);
        if (t.size() != 1 || s.size() != 1) throw DataError("survival data needs exactly one time and one status column");
        td.time = data.column(t[0]).numeric;
        td.status = data.column(s[0]).numeric;
        return td;
    }
    const auto y = data.names_with_role(Role::outcome);
    if (y.size() != 1) throw DataError("expected exactly one outcome column");
    const Column& c = data.column(y[0]);
    td.y.resize(n);
    if (task == TaskKind::classification) {
        if (c.kind != ColumnKind::categorical) throw DataError("classification outcome must be categorical");
        td.levels = c.levels;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (c.codes[static_cast<std::size_t>(i)] == kMissingLevel) throw DataError("missing outcome value");
            td.y[i] = c.codes[static_cast<std::size_t>(i)];
        }
    } else {
        if (c.kind != ColumnKind::numeric) throw DataError("regression outcome must be numeric");
        for (Eigen::Index i = 0; i < n; ++i) td.y[i] = c.numeric[static_cast<std::size_t>(i)];
    }
    return td;
}

Eigen::MatrixXd feature_matrix(const Dataset& data, const std::vector<std::string>& features) {
    if (data.names_with_role(Role::predictor) != features) {
        throw DataError("feature signature mismatch: predictors differ from those seen at training time");
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(data.n_rows()), static_cast<Eigen::Index>(features.size()));
    for (std::size_t j = 0; j < features.size(); ++j) {
        const Column& c = data.column(features[j]);
        if (c.kind != ColumnKind::numeric) {
            throw DataError("predictor '" + c.name + "' is categorical; add a dummy_encode step");
        }
        for (std::size_t i = 0; i < c.numeric.size(); ++i) {
            if (std::isnan(c.numeric[i])) {
                throw DataError("predictor '" + c.name + "' has a missing value at row " + std::to_string(i + 1) +
                                "; add an impute step");
            }
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c.numeric[i];
        }
    }
    return x;
}

bool FittedModel::supports(PredictionKind kind) const {
    const auto k = impl->kinds();
    return std::find(k.begin(), k.end(), kind) != k.end();
}

Prediction FittedModel::predict(const Eigen::MatrixXd& x, PredictionKind kind) const {
    if (!supports(kind)) {
        throw UnsupportedError("algorithm '" + algorithm + "' does not provide " + std::string(to_string(kind)) +
                               " predictions");
    }
    if (x.cols() != static_cast<Eigen::Index>(features.size())) {
        throw DataError("feature signature mismatch: expected " + std::to_string(features.size()) + " columns");
    }
    Prediction p = impl->predict(x, kind);
    p.levels = levels;
    return p;
}

Prediction FittedModel::predict(const Dataset& data, PredictionKind kind) const {
    return predict(feature_matrix(data, features), kind);
}

double resolved_param(const ModelSpec& spec, const std::string& name, const TrainingData& data) {
    if (auto it = spec.params.find(name); it != spec.params.end()) return it->second;
    const auto& hp = hyperparameters(spec.algorithm);
    auto it = std::find_if(hp.begin(), hp.end(), [&](const HyperParam& h) { return h.name == name; });
    if (it == hp.end()) throw ConfigError("no parameter '" + name + "' for '" + spec.algorithm + "'");
    if (!std::isnan(it->default_value)) return it->default_value;
    const bool cls = data.task == TaskKind::classification;
    const double p = static_cast<double>(data.features.size());
    if (name == "mtry") return std::max(1.0, cls ? std::floor(std::sqrt(p)) : std::floor(p / 3.0));
    if (name == "min_n") return cls ? 10.0 : 20.0;
    throw ConfigError("no default for '" + name + "'");
}

FittedModel fit_model(const ModelSpec& spec, const TrainingData& data) {
    validate_model_spec(spec, data.task);
    FittedModel m;
    m.algorithm = spec.algorithm;
    m.task = data.task;
    m.features = data.features;
    m.levels = data.levels;
    const auto param = [&](const char* name) { return resolved_param(spec, name, data); };
    const std::string& a = spec.algorithm;
    const int n_classes = data.task == TaskKind::classification ? static_cast<int>(data.levels.size()) : 0;

    if (data.x.rows() == 0) throw FitError("no training rows");

    if (a == "logistic_reg") {
        if (data.levels.size() != 2) throw FitError("logistic_reg supports binary outcomes only");
        LogisticFit f = fit_logistic(data.x, data.y);
        if (f.separation) m.warnings.push_back("logistic_reg: separation detected (|coefficient| > 15)");
        m.diagnostics["iterations"] = f.iterations;
        m.diagnostics["separation"] = f.separation ? 1.0 : 0.0;
        m.impl = std::make_shared<LogisticImpl>(std::move(f));
    } else if (a == "linear_reg") {
        LinearFit f = fit_linear(data.x, data.y, data.features);
        m.diagnostics["residual_variance"] = f.residual_variance;
        m.impl = std::make_shared<LinearImpl>(f.intercept, f.beta);
    } else if (a == "elastic_net") {
        ElasticNetFit f = fit_elastic_net(data.x, data.y, param("penalty"), param("mixture"));
        m.diagnostics["passes"] = f.passes;
        m.diagnostics["kkt_residual"] = f.kkt_residual;
        m.impl = std::make_shared<LinearImpl>(f.intercept, f.beta);
    } else if (a == "decision_tree" || a == "rand_forest") {
        TreeParams tp;
        tp.min_n = static_cast<std::size_t>(param("min_n"));
        if (a == "decision_tree") {
            tp.max_depth = static_cast<int>(param("tree_depth"));
            std::vector<std::size_t> rows(static_cast<std::size_t>(data.x.rows()));
            for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
            Forest f;
            f.n_classes = n_classes;
            f.trees.push_back(fit_cart(data.x, data.y, n_classes, rows, tp));
            m.impl = std::make_shared<ForestImpl>(std::move(f));
        } else {
            tp.max_depth = std::numeric_limits<int>::max();
            tp.strict_min_n = true;
            auto mtry = static_cast<std::size_t>(param("mtry"));
            if (mtry > data.features.size()) {
                m.warnings.push_back("rand_forest: mtry reduced to the number of predictors");
                mtry = data.features.size();
            }
            tp.mtry = mtry;
            Forest f = fit_random_forest(data.x, data.y, n_classes, static_cast<std::size_t>(param("trees")), tp,
                                         spec.seed);
            m.impl = std::make_shared<ForestImpl>(std::move(f));
        }
    } else if (a == "cox_ph" || a == "penalized_cox") {
        CoxFit f = fit_cox(data.x, data.time, data.status, a == "cox_ph" ? 0.0 : param("penalty"));
        if (f.monotone) m.warnings.push_back(a + ": monotone likelihood (|coefficient| > 15)");
        m.diagnostics["iterations"] = f.iterations;
        m.diagnostics["monotone"] = f.monotone ? 1.0 : 0.0;
        m.impl = std::make_shared<CoxImpl>(std::move(f));
    } else if (a == "weibull_aft") {
        WeibullFit f = fit_weibull(data.x, data.time, data.status);
        m.diagnostics["log_sigma"] = f.log_sigma;
        m.impl = std::make_shared<WeibullImpl>(std::move(f));
    } else if (a == "piecewise_exp") {
        std::vector<double> cuts = spec.cutpoints;
        if (cuts.empty()) {
            std::vector<double> ev;
            for (std::size_t i = 0; i < data.time.size(); ++i) {
                if (data.status[i] == 1.0) ev.push_back(data.time[i]);
            }
            if (ev.empty()) throw FitError("piecewise_exp: >=1 event required");
            for (double q : {0.25, 0.5, 0.75}) cuts.push_back(*stats::quantile(ev, q));
        }
        std::vector<double> x(static_cast<std::size_t>(data.x.size()));
        const auto p = static_cast<std::size_t>(data.x.cols());
        for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
            for (Eigen::Index j = 0; j < data.x.cols(); ++j) x[static_cast<std::size_t>(i) * p + static_cast<std::size_t>(j)] = data.x(i, j);
        }
        PexpFit f = fit_pexp_regression(data.time, data.status, x, p, cuts);
        for (const auto& w : f.warnings) m.warnings.push_back("piecewise_exp: " + w);
        m.impl = std::make_shared<PexpImpl>(std::move(f));
    } else if (a == "gbm") {
        GbmParams gp;
        gp.loss = spec.loss.value_or(data.task == TaskKind::survival ? GbmLoss::aft_normal : GbmLoss::squared);
        gp.rounds = static_cast<std::size_t>(param("trees"));
        gp.learn_rate = param("learn_rate");
        gp.max_depth = static_cast<int>(param("tree_depth"));
        gp.min_leaf = static_cast<std::size_t>(param("min_n"));
        gp.sigma = param("sigma");
        gp.sample_size = param("sample_size");
        GbmModel g;
        if (gp.loss == GbmLoss::aft_normal) {
            const AftIntervalTargets t = build_aft_interval_targets(data.time, data.status);
            g = fit_gbm(data.x, t.lower, t.upper, gp, spec.seed);
        } else {
            std::vector<double> y(data.y.data(), data.y.data() + data.y.size());
            g = fit_gbm(data.x, y, {}, gp, spec.seed);
        }
        m.impl = std::make_shared<GbmImpl>(std::move(g));
    } else {
        throw ConfigError("unknown algorithm '" + a + "'");
    }
    return m;
}

}  // namespace leakguard
