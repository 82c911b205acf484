#include <cmath>
#include <cstring>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "leakguard/engine.hpp"
#include "leakguard/errors.hpp"
#include "leakguard/report.hpp"
#include "leakguard/rng.hpp"

using namespace leakguard;

namespace {

Dataset class_data(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> a(n), b(n);
    std::vector<std::optional<std::string>> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = rng.normal();
        b[i] = 0.5 + rng.exponential(1.0);
        double eta = 1.2 * a[i] - 0.6 * b[i] + 0.4;
        y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? "Case" : "Control";
    }
    if (*y[0] == "Case") y[0] = "Control";  // Control comes first so Case is the second level
    return Dataset({numeric_column("a", a), numeric_column("b", b), categorical_column("y", y)});
}

ModelSpec model(std::string id, std::string alg, std::map<std::string, double> params = {}) {
    ModelSpec m;
    m.id = std::move(id);
    m.algorithm = std::move(alg);
    m.params = std::move(params);
    return m;
}

ExperimentSpec class_spec() {
    ExperimentSpec s;
    s.outcome = {TaskKind::classification, "y", "", ""};
    s.recipe = RecipeSpec{{StepSpec{StepKind::normalize, Selector::all_numeric_predictors, {}, Role::predictor, "", "", {}, {}}}};
    s.models = {{model("logit", "logistic_reg"), {}}};
    s.bootstrap.samples = 50;
    return s;
}

CvSummary summary(double mean, double sd) {
    CvSummary s;
    s.mean = mean;
    s.sd = sd;
    return s;
}

}  // namespace

TEST_CASE("parallel_for rethrows the lowest failing index") {
    for (std::size_t workers : {1u, 4u}) {
        std::vector<int> done(50, 0);
        try {
            parallel_for(50, workers, [&](std::size_t i) {
                if (i == 17 || i == 33) throw std::runtime_error(std::to_string(i));
                done[i] = 1;
            });
            FAIL("expected an exception");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()) == "17");
        }
    }
}

TEST_CASE("select_best: maximize, minimize and ties") {
    CHECK(select_best({summary(0.9906, 0.01), summary(0.9847, 0.01), summary(0.9230, 0.02)}, Direction::maximize) == 0);
    CHECK(select_best({summary(12.63, 1), summary(14.37, 1), summary(23.65, 1)}, Direction::minimize) == 0);
    CHECK(select_best({summary(0.8, 0.1), summary(0.8, 0.2)}, Direction::maximize) == 0);
    CHECK(select_best({summary(0.8, 0.2), summary(0.8, 0.1)}, Direction::maximize) == 1);
    CHECK(select_best({summary(0.8, 0.1), summary(0.8, 0.1)}, Direction::maximize) == 0);
    CHECK(select_best({summary(NAN, 0.0), summary(0.6, 0.1)}, Direction::maximize) == 1);
    CHECK_THROWS_AS(select_best({}, Direction::maximize), ConfigError);
}

TEST_CASE("grid expansion: first parameter varies slowest") {
    ModelEntry e{model("en", "elastic_net"), {{"penalty", {0.01, 0.1}}, {"mixture", {0, 0.5, 1}}}};
    auto c = expand_grid(e, 0);
    REQUIRE(c.size() == 6);
    CHECK(c[0].spec.params.at("penalty") == 0.01);
    CHECK(c[0].spec.params.at("mixture") == 0.0);
    CHECK(c[1].spec.params.at("mixture") == 0.5);
    CHECK(c[3].spec.params.at("penalty") == 0.1);
    CHECK(c[5].spec.params.at("mixture") == 1.0);
    ModelEntry fixed{model("rf", "rand_forest"), {{"trees", {50}}}};
    auto f = expand_grid(fixed, 0);
    REQUIRE(f.size() == 1);
    CHECK(f[0].spec.params.at("trees") == 50);
}

TEST_CASE("validate_experiment rejects bad grids and metrics") {
    auto s = class_spec();
    s.models[0].grid = {{"trees", {10}}};
    CHECK_THROWS_AS(validate_experiment(s), ConfigError);
    s = class_spec();
    s.primary_metric = "rmse";
    CHECK_THROWS_AS(validate_experiment(s), ConfigError);
    s = class_spec();
    s.holdout = 0.0;
    CHECK_THROWS_AS(validate_experiment(s), ConfigError);
}

TEST_CASE("guarded CV: one record per fold and distinct recipe fits") {
    auto spec = class_spec();
    auto data = validate_schema(class_data(120, 1), spec.outcome);
    auto splits = make_vfold(120, 5, outcome_strata(data, spec.outcome), 3);
    auto rec = guarded_resample_fit(spec, data, splits, expand_all(spec.models));
    REQUIRE(rec.size() == 5);
    std::set<std::uint64_t> prints;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        CHECK(rec[i].split_index == i);
        CHECK_FALSE(rec[i].leaky);
        prints.insert(rec[i].recipe_fingerprint);
    }
    CHECK(prints.size() == 5);
}

TEST_CASE("guarded CV aborts on a full-analysis split") {
    auto spec = class_spec();
    auto data = validate_schema(class_data(30, 2), spec.outcome);
    std::vector<std::size_t> all(30);
    for (std::size_t i = 0; i < 30; ++i) all[i] = i;
    std::vector<ResampleSplit> bad{{all, {0}, "bad"}};
    CHECK_THROWS_AS(guarded_resample_fit(spec, data, bad, expand_all(spec.models)), GuardError);
}

TEST_CASE("leaky arm needs the explicit opt-in") {
    auto spec = class_spec();
    auto data = validate_schema(class_data(60, 3), spec.outcome);
    auto splits = make_vfold(60, 3, {}, 1);
    CHECK_THROWS_AS(leaky_resample_fit(spec, data, splits, expand_all(spec.models), std::nullopt), GuardError);
    auto rec = leaky_resample_fit(spec, data, splits, expand_all(spec.models), UnsafeLeakyOptIn{});
    for (const auto& r : rec) {
        CHECK(r.leaky);
        CHECK(r.tag == "LEAKY");
    }
}

TEST_CASE("data-independent recipe: guarded and leaky predictions are identical") {
    auto spec = class_spec();
    StepSpec log_step;
    log_step.kind = StepKind::custom_expr;
    log_step.target = "lb";
    log_step.expr = "log(b)";
    spec.recipe = RecipeSpec{{log_step}};
    spec.models = {{model("rf", "rand_forest", {{"trees", 15}}), {}}};
    auto data = validate_schema(class_data(150, 4), spec.outcome);
    auto splits = make_vfold(150, 5, {}, 9);
    auto g = guarded_resample_fit(spec, data, splits, expand_all(spec.models));
    auto l = leaky_resample_fit(spec, data, splits, expand_all(spec.models), UnsafeLeakyOptIn{});
    REQUIRE(g.size() == l.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        REQUIRE(g[i].scores.size() == l[i].scores.size());
        CHECK(std::memcmp(g[i].scores.data(), l[i].scores.data(), g[i].scores.size() * sizeof(double)) == 0);
    }
}

TEST_CASE("CV summary is the plain mean over folds") {
    auto spec = class_spec();
    auto data = validate_schema(class_data(100, 5), spec.outcome);
    auto splits = make_vfold(100, 4, outcome_strata(data, spec.outcome), 2);
    auto tuned = tune_grid(spec, data, splits);
    double s = 0.0;
    for (const auto& r : tuned.records)
        for (const auto& m : r.metrics)
            if (m.name == "roc_auc") s += m.estimate;
    CHECK(tuned.summaries[0].mean == doctest::Approx(s / 4.0).epsilon(1e-15));
    CHECK(tuned.summaries[0].n_folds == 4);
}

TEST_CASE("tuning: equal candidates keep grid order") {
    auto spec = class_spec();
    spec.models = {{model("rf", "rand_forest", {{"trees", 5}}), {{"min_n", {400, 500}}}}};
    auto data = validate_schema(class_data(80, 6), spec.outcome);
    auto splits = make_vfold(80, 4, {}, 2);
    auto tuned = tune_grid(spec, data, splits);
    // Both settings forbid any split, so every candidate predicts the same way.
    REQUIRE(tuned.summaries.size() == 2);
    CHECK(tuned.summaries[0].mean == tuned.summaries[1].mean);
    CHECK(tuned.best[0] == 0);
}

TEST_CASE("train_test_split sizes and errors") {
    auto d = class_data(100, 7);
    auto [train, test] = train_test_split(d, 0.2, {}, 1);
    CHECK(train.n_rows() == 80);
    CHECK(test.n_rows() == 20);
    CHECK_THROWS_AS(train_test_split(d, 0.0, {}, 1), ConfigError);
}

TEST_CASE("run_experiment: selection ignores the test split") {
    auto spec = class_spec();
    spec.models.push_back({model("tree", "decision_tree", {{"tree_depth", 3}}), {}});
    auto train = class_data(120, 8);
    auto test = class_data(40, 9);
    auto a = run_experiment(spec, train, test);
    std::vector<std::size_t> perm(40);
    for (std::size_t i = 0; i < 40; ++i) perm[i] = 39 - i;
    auto b = run_experiment(spec, train, test.subset_rows(perm));
    REQUIRE(a.cv.size() == b.cv.size());
    for (std::size_t i = 0; i < a.cv.size(); ++i) {
        CHECK(a.cv[i].mean == b.cv[i].mean);
        CHECK(a.cv[i].sd == b.cv[i].sd);
    }
    CHECK(a.selected == b.selected);
    auto report = render_report(a);
    CHECK(report.find("Table 1") != std::string::npos);
    CHECK(report.find("Table 2") != std::string::npos);
    CHECK(report.find("\xE2\x80\xA0") != std::string::npos);
}

TEST_CASE("run_experiment is independent of the worker count") {
    auto spec = class_spec();
    spec.models.push_back({model("rf", "rand_forest", {{"trees", 20}}), {{"min_n", {2, 8}}}});
    auto data = class_data(150, 10);
    spec.workers = 1;
    auto a = results_json(run_experiment(spec, data)).dump();
    spec.workers = 4;
    auto b = results_json(run_experiment(spec, data)).dump();
    CHECK(a == b);
}

TEST_CASE("method none skips model selection") {
    auto spec = class_spec();
    spec.resampling.method = ResampleMethod::none;
    auto r = run_experiment(spec, class_data(80, 11));
    CHECK(r.cv.empty());
    CHECK(r.splits.empty());
    CHECK(r.holdout.size() == 1);
}

TEST_CASE("audit rejection stops the run") {
    auto spec = class_spec();
    StepSpec s;
    s.kind = StepKind::custom_expr;
    s.target = "z";
    s.expr = "read_file(a)";
    spec.recipe = RecipeSpec{{s}};
    CHECK_THROWS_AS(run_experiment(spec, class_data(50, 12)), AuditError);
}

TEST_CASE("event class second means the second level") {
    auto spec = class_spec();
    spec.resampling.method = ResampleMethod::none;
    spec.bootstrap.enabled = false;
    auto data = class_data(200, 13);
    auto second = run_experiment(spec, data);
    spec.event_class = EventClass::first;
    auto first = run_experiment(spec, data);
    double auc2 = 0.0, auc1 = 0.0;
    for (const auto& m : second.holdout[0].metrics)
        if (m.name == "roc_auc") auc2 = m.estimate;
    for (const auto& m : first.holdout[0].metrics)
        if (m.name == "roc_auc") auc1 = m.estimate;
    CHECK(auc1 == doctest::Approx(auc2).epsilon(1e-12));
    CHECK(auc2 > 0.5);
}
