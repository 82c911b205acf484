#include "leakguard/simulation.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "leakguard/engine.hpp"
#include "leakguard/errors.hpp"
#include "leakguard/rng.hpp"

namespace leakguard {

void validate_sim_config(const SimConfig& c) {
    if (c.n_sims < 1) throw ConfigError("n_sims must be positive");
    if (c.n_sites < 2) throw ConfigError("grouped CV needs at least 2 sites");
    if (c.n_per_site < 2) throw ConfigError("each site needs at least 2 rows");
    if (c.trees < 1) throw ConfigError("trees must be positive");
    if (!(c.offset_sd >= 0.0)) throw ConfigError("offset sd must be non-negative");
}

Dataset gen_site_data(std::uint64_t seed, const SimConfig& config) {
    Rng rng(seed);
    const std::size_t n = config.n_sites * config.n_per_site;
    std::vector<double> z(n);
    for (double& v : z) v = rng.normal();
    std::vector<double> offset(config.n_sites);
    for (double& b : offset) b = rng.normal(config.offset_mean, config.offset_sd);

    std::vector<std::int32_t> site(n);
    std::vector<std::int32_t> outcome(n);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t s = i / config.n_per_site;
        site[i] = static_cast<std::int32_t>(s);
        x[i] = z[i] + offset[s];
        const double p = 1.0 / (1.0 + std::exp(-config.signal * z[i]));
        outcome[i] = rng.uniform() < p ? 1 : 0;
    }
    std::vector<std::string> site_levels;
    for (std::size_t s = 0; s < config.n_sites; ++s) site_levels.push_back("S" + std::to_string(s + 1));
    return Dataset({categorical_column("site", std::move(site), std::move(site_levels), Role::predictor),
                    categorical_column("outcome", std::move(outcome), {"Control", "Case"}, Role::outcome),
                    numeric_column("x", std::move(x))});
}

std::vector<ResampleSplit> site_splits(const Dataset& data, std::uint64_t seed, const SimConfig& config) {
    return make_group_vfold(group_labels(data.column("site")), config.n_sites, mix64({seed, 1}));
}

namespace {

ExperimentSpec arm_spec(std::uint64_t seed, const SimConfig& config) {
    ExperimentSpec spec;
    spec.outcome.task = TaskKind::classification;
    spec.outcome.label = "outcome";
    spec.event_class = EventClass::second;
    spec.primary_metric = "roc_auc";
    spec.seed = seed;
    ModelEntry forest;
    forest.spec.id = "rand_forest";
    forest.spec.algorithm = "rand_forest";
    forest.spec.params["trees"] = static_cast<double>(config.trees);
    spec.models.push_back(forest);
    StepSpec site_id;
    site_id.kind = StepKind::role_update;
    site_id.columns = {"site"};
    site_id.role = Role::id;
    spec.recipe.steps.push_back(site_id);
    return spec;
}

ExperimentSpec guarded_spec(std::uint64_t seed, const SimConfig& config) {
    ExperimentSpec spec = arm_spec(seed, config);
    StepSpec norm;
    norm.kind = StepKind::normalize;
    norm.columns = {"x"};
    spec.recipe.steps.push_back(norm);
    return spec;
}

double mean_auc(const std::vector<FoldRecord>& records) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const FoldRecord& r : records) {
        for (const MetricValue& m : r.metrics) {
            if (m.name == "roc_auc" && m.defined()) {
                sum += m.estimate;
                ++n;
            }
        }
    }
    return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double leaky_arm_auc(const Dataset& data, const std::vector<ResampleSplit>& splits, std::uint64_t seed,
                     const SimConfig& config) {
    // Site-wise standardization on every row, before any split exists.
    const Column& site = data.column("site");
    const std::vector<double>& x = data.column("x").numeric;
    std::vector<double> sum(site.levels.size(), 0.0);
    std::vector<double> count(site.levels.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        sum[static_cast<std::size_t>(site.codes[i])] += x[i];
        count[static_cast<std::size_t>(site.codes[i])] += 1.0;
    }
    std::vector<double> ss(site.levels.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto s = static_cast<std::size_t>(site.codes[i]);
        const double d = x[i] - sum[s] / count[s];
        ss[s] += d * d;
    }
    std::vector<double> scaled(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto s = static_cast<std::size_t>(site.codes[i]);
        scaled[i] = (x[i] - sum[s] / count[s]) / std::sqrt(ss[s] / (count[s] - 1.0));
    }
    const Dataset leaky = data.without_column("x").with_column(numeric_column("x_scaled", std::move(scaled)));
    const ExperimentSpec spec = arm_spec(seed, config);
    return mean_auc(leaky_resample_fit(spec, leaky, splits, expand_all(spec.models), UnsafeLeakyOptIn{}));
}

double guarded_arm_auc(const Dataset& data, const std::vector<ResampleSplit>& splits, std::uint64_t seed,
                       const SimConfig& config) {
    const ExperimentSpec spec = guarded_spec(seed, config);
    return mean_auc(guarded_resample_fit(spec, data, splits, expand_all(spec.models)));
}

double guarded_holdout_auc(const Dataset& data, std::uint64_t seed, const SimConfig& config) {
    ExperimentSpec spec = guarded_spec(seed, config);
    spec.resampling.method = ResampleMethod::none;
    spec.bootstrap.enabled = false;
    const EvaluationResult result = run_experiment(spec, data);
    for (const MetricValue& m : result.holdout.front().metrics) {
        if (m.name == "roc_auc") return m.estimate;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

SimRun run_leakage_iteration(std::uint64_t seed, const SimConfig& config) {
    const Dataset data = gen_site_data(seed, config);
    const std::vector<ResampleSplit> splits = site_splits(data, seed, config);
    SimRun r;
    r.seed = seed;
    r.leaky_auc = leaky_arm_auc(data, splits, seed, config);
    r.guarded_site_auc = guarded_arm_auc(data, splits, seed, config);
    r.guarded_auc = guarded_holdout_auc(data, seed, config);
    return r;
}

SimSummary summarize_runs(const std::vector<SimRun>& runs) {
    std::vector<double> leaky;
    std::vector<double> guarded;
    std::vector<double> site;
    std::vector<double> diff;
    std::vector<double> site_diff;
    for (const SimRun& r : runs) {
        leaky.push_back(r.leaky_auc);
        guarded.push_back(r.guarded_auc);
        site.push_back(r.guarded_site_auc);
        diff.push_back(r.leaky_auc - r.guarded_auc);
        site_diff.push_back(r.leaky_auc - r.guarded_site_auc);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    SimSummary s;
    s.leaky_mean = stats::mean(leaky).value_or(nan);
    s.leaky_sd = stats::sd(leaky).value_or(nan);
    s.guarded_mean = stats::mean(guarded).value_or(nan);
    s.guarded_sd = stats::sd(guarded).value_or(nan);
    s.guarded_site_mean = stats::mean(site).value_or(nan);
    s.guarded_site_sd = stats::sd(site).value_or(nan);
    s.inflation = stats::t_interval(diff, 0.95);
    s.site_inflation = stats::t_interval(site_diff, 0.95);
    return s;
}

SimResult run_leakage_study(const SimConfig& config) {
    validate_sim_config(config);
    if (config.n_sims < 2) throw ConfigError("the leakage study needs at least 2 runs");
    SimResult result;
    result.runs.resize(config.n_sims);
    parallel_for(config.n_sims, config.workers, [&](std::size_t r) {
        result.runs[r] = run_leakage_iteration(mix64({config.seed, r}), config);
        result.runs[r].run = r;
    });
    result.summary = summarize_runs(result.runs);
    return result;
}

}  // namespace leakguard
