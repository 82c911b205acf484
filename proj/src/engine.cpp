#include "leakguard/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "leakguard/errors.hpp"
#include "leakguard/rng.hpp"
#include "leakguard/stats.hpp"

namespace leakguard {

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_at = std::numeric_limits<std::size_t>::max();
    std::exception_ptr failure;
    auto loop = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (i < failed_at) {
                    failed_at = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::string default_primary_metric(TaskKind task, std::size_t n_levels) {
    switch (task) {
        case TaskKind::classification: return n_levels > 2 ? "accuracy" : "roc_auc";
        case TaskKind::regression: return "rmse";
        case TaskKind::survival: return "harrell_c";
    }
    return "rmse";
}

void validate_experiment(const ExperimentSpec& spec) {
    if (spec.models.empty()) throw ConfigError("no models configured");
    if (!spec.primary_metric.empty() && !is_metric_for(spec.primary_metric, spec.outcome.task)) {
        throw ConfigError("metric '" + spec.primary_metric + "' is not available for " +
                          std::string(to_string(spec.outcome.task)));
    }
    if (!(spec.holdout > 0.0 && spec.holdout < 1.0)) throw ConfigError("holdout fraction must lie in (0, 1)");
    if (spec.bootstrap.enabled) {
        if (spec.bootstrap.samples < 2) throw ConfigError("bootstrap samples must be at least 2");
        if (!(spec.bootstrap.level > 0.0 && spec.bootstrap.level < 1.0)) {
            throw ConfigError("bootstrap level must lie in (0, 1)");
        }
    }
    std::vector<std::string> ids;
    for (const ModelEntry& m : spec.models) {
        validate_model_spec(m.spec, spec.outcome.task);
        if (std::find(ids.begin(), ids.end(), m.spec.id) != ids.end()) {
            throw ConfigError("duplicate model id '" + m.spec.id + "'");
        }
        ids.push_back(m.spec.id);
        const auto& hp = hyperparameters(m.spec.algorithm);
        std::vector<std::string> seen;
        for (const auto& [name, values] : m.grid) {
            if (values.empty()) throw ConfigError("empty tuning grid for '" + name + "' in model '" + m.spec.id + "'");
            if (std::none_of(hp.begin(), hp.end(), [&](const HyperParam& h) { return h.name == name; })) {
                throw ConfigError("'" + name + "' is not a hyperparameter of " + m.spec.algorithm);
            }
            if (std::find(seen.begin(), seen.end(), name) != seen.end()) {
                throw ConfigError("grid lists '" + name + "' twice");
            }
            seen.push_back(name);
            for (double v : values) {
                ModelSpec probe = m.spec;
                probe.params[name] = v;
                validate_model_spec(probe, spec.outcome.task);
            }
        }
    }
    if (spec.resampling.method == ResampleMethod::none) {
        for (const ModelEntry& m : spec.models) {
            if (expand_grid(m, 0).size() > 1) {
                throw ConfigError("tuning grid for '" + m.spec.id + "' needs a resampling method other than none");
            }
        }
    }
}

std::vector<Candidate> expand_grid(const ModelEntry& entry, std::size_t model_index) {
    std::vector<Candidate> out;
    std::size_t total = 1;
    for (const auto& [name, values] : entry.grid) total *= values.size();
    for (std::size_t k = 0; k < total; ++k) {
        Candidate c;
        c.model = model_index;
        c.index = k;
        c.spec = entry.spec;
        std::size_t rest = k;
        std::vector<std::size_t> pos(entry.grid.size());
        for (std::size_t g = entry.grid.size(); g-- > 0;) {
            pos[g] = rest % entry.grid[g].second.size();
            rest /= entry.grid[g].second.size();
        }
        for (std::size_t g = 0; g < entry.grid.size(); ++g) {
            const double v = entry.grid[g].second[pos[g]];
            c.spec.params[entry.grid[g].first] = v;
            c.tuned.emplace_back(entry.grid[g].first, v);
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<Candidate> expand_all(const std::vector<ModelEntry>& models) {
    std::vector<Candidate> out;
    for (std::size_t m = 0; m < models.size(); ++m) {
        auto c = expand_grid(models[m], m);
        out.insert(out.end(), std::make_move_iterator(c.begin()), std::make_move_iterator(c.end()));
    }
    return out;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Evaluator {
    TaskKind task = TaskKind::classification;
    ClassFrame cls;
    RegressionFrame reg;
    SurvivalFrame surv;
    double threshold = 0.5;
    bool standardize = false;

    std::vector<MetricValue> metrics(const std::vector<std::size_t>* rows = nullptr) const {
        switch (task) {
            case TaskKind::classification: return classification_metrics(cls, threshold, rows);
            case TaskKind::regression: return regression_metrics(reg, rows);
            case TaskKind::survival: return survival_metrics(surv, standardize, rows);
        }
        return {};
    }
};

int positive_code(const ExperimentSpec& spec) { return spec.event_class == EventClass::second ? 1 : 0; }

Evaluator make_evaluator(const FittedModel& model, const TrainingData& assess, const ExperimentSpec& spec,
                         const SurvivalEvalSettings* settings, std::vector<double>* scores) {
    if (assess.features != model.features) {
        throw DataError("feature signature mismatch between analysis and assessment data");
    }
    Evaluator ev;
    ev.task = assess.task;
    ev.threshold = spec.threshold;
    ev.standardize = spec.standardize_c;
    const auto n = static_cast<std::size_t>(assess.x.rows());
    switch (assess.task) {
        case TaskKind::classification: {
            Prediction p = model.predict(assess.x, PredictionKind::class_prob);
            ev.cls.levels = assess.levels;
            ev.cls.prob = std::move(p.class_prob);
            ev.cls.positive = ev.cls.levels.size() == 2 ? positive_code(spec) : 1;
            for (std::size_t i = 0; i < n; ++i) ev.cls.truth.push_back(static_cast<int>(assess.y[static_cast<Eigen::Index>(i)]));
            if (scores && ev.cls.prob.cols() > ev.cls.positive) {
                const Eigen::VectorXd col = ev.cls.prob.col(ev.cls.positive);
                scores->assign(col.data(), col.data() + col.size());
            }
            break;
        }
        case TaskKind::regression: {
            Prediction p = model.predict(assess.x, PredictionKind::numeric);
            ev.reg.truth.assign(assess.y.data(), assess.y.data() + assess.y.size());
            ev.reg.estimate = std::move(p.values);
            if (scores) *scores = ev.reg.estimate;
            break;
        }
        case TaskKind::survival: {
            Prediction risk = model.predict(assess.x, PredictionKind::risk);
            std::shared_ptr<const SurvivalCurves> curves;
            if (model.supports(PredictionKind::survival_curve)) {
                curves = model.predict(assess.x, PredictionKind::survival_curve).curves;
            }
            if (scores) *scores = risk.values;
            ev.surv = make_survival_frame(assess.time, assess.status, std::move(risk.values), curves.get(), *settings);
            break;
        }
    }
    return ev;
}

struct PreparedSplit {
    TrainingData analysis;
    TrainingData assessment;
    std::uint64_t fingerprint = 0;
    std::optional<SurvivalEvalSettings> settings;
    std::vector<std::string> warnings;
};

void finish_prepared(PreparedSplit& p) {
    if (p.analysis.task == TaskKind::survival) {
        p.settings = survival_eval_settings(p.analysis.time, p.analysis.status);
    }
}

FoldRecord run_unit(const ExperimentSpec& spec, const PreparedSplit& prep, const ResampleSplit& split,
                    std::size_t split_index, const Candidate& cand) {
    ModelSpec ms = cand.spec;
    ms.seed = mix64({spec.seed, split_index, cand.model, cand.index});
    FittedModel model = fit_model(ms, prep.analysis);
    FoldRecord r;
    r.split = split.label;
    r.split_index = split_index;
    r.model_id = cand.spec.id;
    r.model = cand.model;
    r.candidate = cand.index;
    r.recipe_fingerprint = prep.fingerprint;
    r.rows = split.assessment;
    r.warnings = prep.warnings;
    r.warnings.insert(r.warnings.end(), model.warnings.begin(), model.warnings.end());
    const Evaluator ev =
        make_evaluator(model, prep.assessment, spec, prep.settings ? &*prep.settings : nullptr, &r.scores);
    r.metrics = ev.metrics();
    return r;
}

std::vector<FoldRecord> run_units(const ExperimentSpec& spec, const std::vector<PreparedSplit>& prepared,
                                  const std::vector<ResampleSplit>& splits, const std::vector<Candidate>& candidates) {
    const std::size_t S = splits.size();
    std::vector<FoldRecord> out(S * candidates.size());
    parallel_for(out.size(), spec.workers, [&](std::size_t u) {
        const std::size_t c = u / S;
        const std::size_t s = u % S;
        out[u] = run_unit(spec, prepared[s], splits[s], s, candidates[c]);
    });
    return out;
}

}  // namespace

std::vector<FoldRecord> guarded_resample_fit(const ExperimentSpec& spec, const Dataset& train_in,
                                             const std::vector<ResampleSplit>& splits,
                                             const std::vector<Candidate>& candidates) {
    const Dataset train = validate_schema(train_in, spec.outcome);
    for (const ResampleSplit& s : splits) check_full_analysis(s, train.n_rows());
    std::vector<PreparedSplit> prepared(splits.size());
    parallel_for(splits.size(), spec.workers, [&](std::size_t s) {
        PreparedSplit& p = prepared[s];
        const Dataset analysis = train.subset_rows(splits[s].analysis);
        const Dataset assessment = train.subset_rows(splits[s].assessment);
        const FittedRecipe fitted = fit_recipe(spec.recipe, analysis);
        p.fingerprint = fitted.fingerprint;
        p.warnings = fitted.fit_warnings;
        p.analysis = make_training_data(apply_recipe(fitted, analysis, &p.warnings), spec.outcome.task);
        p.assessment = make_training_data(apply_recipe(fitted, assessment, &p.warnings), spec.outcome.task);
        finish_prepared(p);
    });
    return run_units(spec, prepared, splits, candidates);
}

std::vector<FoldRecord> leaky_resample_fit(const ExperimentSpec& spec, const Dataset& data_in,
                                           const std::vector<ResampleSplit>& splits,
                                           const std::vector<Candidate>& candidates,
                                           std::optional<UnsafeLeakyOptIn> opt_in) {
    if (!opt_in) throw GuardError("leaky_resample_fit refuses to run without the explicit unsafe opt-in");
    const Dataset data = validate_schema(data_in, spec.outcome);
    for (const ResampleSplit& s : splits) check_full_analysis(s, data.n_rows());
    const FittedRecipe fitted = fit_recipe(spec.recipe, data);
    std::vector<std::string> warnings = fitted.fit_warnings;
    const Dataset transformed = apply_recipe(fitted, data, &warnings);
    std::vector<PreparedSplit> prepared(splits.size());
    parallel_for(splits.size(), spec.workers, [&](std::size_t s) {
        PreparedSplit& p = prepared[s];
        p.fingerprint = fitted.fingerprint;
        p.warnings = warnings;
        p.analysis = make_training_data(transformed.subset_rows(splits[s].analysis), spec.outcome.task);
        p.assessment = make_training_data(transformed.subset_rows(splits[s].assessment), spec.outcome.task);
        finish_prepared(p);
    });
    std::vector<FoldRecord> out = run_units(spec, prepared, splits, candidates);
    for (FoldRecord& r : out) {
        r.leaky = true;
        r.tag = "LEAKY";
    }
    return out;
}

namespace {

const MetricValue* find_metric(const std::vector<MetricValue>& metrics, const std::string& key) {
    for (const MetricValue& m : metrics) {
        if (m.key() == key) return &m;
    }
    for (const MetricValue& m : metrics) {
        if (m.name == key) return &m;
    }
    return nullptr;
}

}  // namespace

std::vector<CvSummary> summarize_folds(const std::vector<FoldRecord>& records,
                                       const std::vector<Candidate>& candidates, const std::string& metric) {
    std::vector<CvSummary> out;
    for (const Candidate& c : candidates) {
        CvSummary s;
        s.model_id = c.spec.id;
        s.model = c.model;
        s.candidate = c.index;
        s.tuned = c.tuned;
        std::vector<double> values;
        for (const FoldRecord& r : records) {
            if (r.model != c.model || r.candidate != c.index) continue;
            ++s.n_folds;
            const MetricValue* m = find_metric(r.metrics, metric);
            if (m && m->defined()) values.push_back(m->estimate);
        }
        s.n_defined = values.size();
        s.mean = values.empty() ? kNaN : std::accumulate(values.begin(), values.end(), 0.0) / values.size();
        s.sd = stats::sd(values).value_or(kNaN);
        out.push_back(std::move(s));
    }
    return out;
}

std::size_t select_best(const std::vector<CvSummary>& summaries, Direction direction) {
    if (summaries.empty()) throw ConfigError("nothing to select from");
    auto better = [&](const CvSummary& a, const CvSummary& b) {
        if (std::isnan(a.mean)) return false;
        if (std::isnan(b.mean)) return true;
        if (a.mean != b.mean) return direction == Direction::maximize ? a.mean > b.mean : a.mean < b.mean;
        const double sa = std::isnan(a.sd) ? std::numeric_limits<double>::infinity() : a.sd;
        const double sb = std::isnan(b.sd) ? std::numeric_limits<double>::infinity() : b.sd;
        return sa < sb;
    };
    std::size_t best = 0;
    for (std::size_t i = 1; i < summaries.size(); ++i) {
        if (better(summaries[i], summaries[best])) best = i;
    }
    return best;
}

namespace {

std::string resolved_primary(const ExperimentSpec& spec, const Dataset& train) {
    if (!spec.primary_metric.empty()) return spec.primary_metric;
    std::size_t levels = 0;
    if (spec.outcome.task == TaskKind::classification) levels = train.column(spec.outcome.label).levels.size();
    return default_primary_metric(spec.outcome.task, levels);
}

}  // namespace

TuneResult tune_grid(const ExperimentSpec& spec, const Dataset& train, const std::vector<ResampleSplit>& splits) {
    if (splits.empty()) throw ConfigError("tuning needs at least one resampling split");
    const std::string primary = resolved_primary(spec, train);
    const Direction dir = metric_direction(primary);
    TuneResult t;
    t.candidates = expand_all(spec.models);
    if (t.candidates.empty()) throw ConfigError("empty tuning grid");
    t.records = guarded_resample_fit(spec, train, splits, t.candidates);
    t.summaries = summarize_folds(t.records, t.candidates, primary);
    for (std::size_t m = 0; m < spec.models.size(); ++m) {
        std::vector<std::size_t> idx;
        std::vector<CvSummary> sub;
        for (std::size_t k = 0; k < t.summaries.size(); ++k) {
            if (t.summaries[k].model == m) {
                idx.push_back(k);
                sub.push_back(t.summaries[k]);
            }
        }
        t.best.push_back(idx[select_best(sub, dir)]);
    }
    return t;
}

Strata outcome_strata(const Dataset& data, const OutcomeSpec& outcome) {
    Strata out;
    if (outcome.task == TaskKind::classification) {
        for (std::int32_t c : data.column(outcome.label).codes) out.push_back(c);
    } else if (outcome.task == TaskKind::survival) {
        for (double s : data.column(outcome.status).numeric) out.push_back(static_cast<int>(s));
    }
    return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double fraction, const Strata& strata,
                                             std::uint64_t seed, std::vector<std::string>* warnings) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("holdout fraction must lie in (0, 1)");
    auto [keep, hold] = stratified_partition(data.n_rows(), fraction, strata, seed, warnings);
    if (keep.empty() || hold.empty()) throw DataError("holdout split left one side empty");
    return {data.subset_rows(keep), data.subset_rows(hold)};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_rows(const ExperimentSpec& spec,
                                                                         const Dataset& data,
                                                                         std::vector<std::string>* warnings) {
    if (!(spec.holdout > 0.0 && spec.holdout < 1.0)) throw ConfigError("holdout fraction must lie in (0, 1)");
    const ResampleMethod method = spec.resampling.method;
    std::vector<std::size_t> keep;
    std::vector<std::size_t> hold;
    if (method == ResampleMethod::blocked_cv || method == ResampleMethod::rolling_origin) {
        const std::string& order = spec.resampling.order;
        if (order.empty()) throw ConfigError(std::string(to_string(method)) + " requires an order column");
        const Column& c = data.column(order);
        if (c.kind != ColumnKind::numeric) throw DataError("order column '" + order + "' must be numeric");
        for (double v : c.numeric) {
            if (std::isnan(v)) throw GuardError("order column '" + order + "' has missing values");
        }
        std::vector<std::size_t> idx(data.n_rows());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return c.numeric[a] < c.numeric[b]; });
        const auto n_test = static_cast<std::size_t>(std::llround(spec.holdout * static_cast<double>(idx.size())));
        keep.assign(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_test));
        hold.assign(idx.end() - static_cast<std::ptrdiff_t>(n_test), idx.end());
        std::sort(keep.begin(), keep.end());
        std::sort(hold.begin(), hold.end());
    } else {
        std::tie(keep, hold) = stratified_partition(data.n_rows(), spec.holdout, outcome_strata(data, spec.outcome),
                                                    mix64({spec.seed, 0x7e57}), warnings);
    }
    if (keep.empty() || hold.empty()) throw DataError("holdout split left one side empty");
    return {keep, hold};
}

std::uint64_t resampling_seed(const ExperimentSpec& spec) { return mix64({spec.seed, 0x5a17}); }

void finalize_and_report(const ExperimentSpec& spec, const Dataset& train_in, const Dataset& test_in,
                         EvaluationResult& result) {
    if (test_in.n_rows() == 0) throw DataError("test split is empty");
    const Dataset train = validate_schema(train_in, spec.outcome);
    const Dataset test = validate_schema(test_in, spec.outcome);
    const FittedRecipe fitted = fit_recipe(spec.recipe, train);
    result.final_recipe_fingerprint = fitted.fingerprint;
    std::vector<std::string> warnings = fitted.fit_warnings;
    const TrainingData tr = make_training_data(apply_recipe(fitted, train, &warnings), spec.outcome.task);
    const TrainingData te = make_training_data(apply_recipe(fitted, test, &warnings), spec.outcome.task);
    result.warnings.insert(result.warnings.end(), warnings.begin(), warnings.end());
    std::optional<SurvivalEvalSettings> settings;
    if (spec.outcome.task == TaskKind::survival) settings = survival_eval_settings(tr.time, tr.status);

    const std::size_t final_index = result.splits.size();
    result.holdout.assign(spec.models.size(), {});
    parallel_for(spec.models.size(), spec.workers, [&](std::size_t m) {
        Candidate cand;
        if (!result.tuning.best.empty()) {
            cand = result.tuning.candidates[result.tuning.best[m]];
        } else {
            cand = expand_grid(spec.models[m], m).front();
        }
        ModelSpec ms = cand.spec;
        ms.seed = mix64({spec.seed, final_index, cand.model, cand.index});
        const FittedModel model = fit_model(ms, tr);
        const Evaluator ev = make_evaluator(model, te, spec, settings ? &*settings : nullptr, nullptr);
        HoldoutResult& h = result.holdout[m];
        h.model_id = ms.id;
        h.algorithm = ms.algorithm;
        for (const HyperParam& hp : hyperparameters(ms.algorithm)) h.params[hp.name] = resolved_param(ms, hp.name, tr);
        h.warnings = model.warnings;
        h.metrics = ev.metrics();
        if (spec.bootstrap.enabled) {
            std::vector<double> est;
            for (const MetricValue& v : h.metrics) est.push_back(v.available ? v.estimate : kNaN);
            auto cis = bootstrap_metric_set(
                static_cast<std::size_t>(te.x.rows()),
                [&](const std::vector<std::size_t>& rows) {
                    std::vector<double> out;
                    for (const MetricValue& v : ev.metrics(&rows)) out.push_back(v.available ? v.estimate : kNaN);
                    return out;
                },
                est, spec.bootstrap.samples, spec.bootstrap.level, mix64({spec.seed, final_index + 1, m}));
            for (std::size_t k = 0; k < h.metrics.size(); ++k) h.metrics[k].ci = cis[k];
        }
    });
}

EvaluationResult run_experiment(const ExperimentSpec& spec, const Dataset& data_in, const std::optional<Dataset>& test_in) {
    validate_experiment(spec);
    EvaluationResult result;
    result.task = spec.outcome.task;
    const Dataset data = validate_schema(data_in, spec.outcome);
    result.audit = audit_recipe(spec.recipe, data.schema());
    if (has_reject(result.audit)) {
        std::string msg = "recipe rejected by audit:";
        for (const AuditFinding& f : result.audit) {
            if (f.severity == Severity::reject) msg += "\n  " + f.rule + " " + (f.where.empty() ? "" : f.where + ": ") + f.message;
        }
        throw AuditError(msg);
    }
    result.primary_metric = resolved_primary(spec, data);
    result.direction = metric_direction(result.primary_metric);

    std::optional<Dataset> train;
    std::optional<Dataset> test;
    if (test_in) {
        train = data;
        test = validate_schema(align_levels(data, *test_in), spec.outcome);
        if (spec.outcome.task == TaskKind::classification &&
            test->column(spec.outcome.label).levels.size() != data.column(spec.outcome.label).levels.size()) {
            throw DataError("test set has outcome levels that do not occur in the training data");
        }
    } else {
        const auto [keep, hold] = holdout_rows(spec, data, &result.warnings);
        train = data.subset_rows(keep);
        test = data.subset_rows(hold);
    }
    result.n_train = train->n_rows();
    result.n_test = test->n_rows();

    result.splits = make_splits(spec.resampling, *train, outcome_strata(*train, spec.outcome),
                                resampling_seed(spec), &result.warnings);
    result.split_fingerprint = split_fingerprint(result.splits);
    if (!result.splits.empty()) {
        result.tuning = tune_grid(spec, *train, result.splits);
        for (std::size_t b : result.tuning.best) result.cv.push_back(result.tuning.summaries[b]);
        result.selected = select_best(result.cv, result.direction);
    }
    finalize_and_report(spec, *train, *test, result);
    return result;
}

}  // namespace leakguard
