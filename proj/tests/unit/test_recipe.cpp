#include <cmath>
#include <cstring>
#include <string>

#include "doctest.h"
#include "leakguard/errors.hpp"
#include "leakguard/recipe.hpp"
#include "leakguard/rng.hpp"

using namespace leakguard;

namespace {

StepSpec step(StepKind kind, std::vector<std::string> cols) {
    StepSpec s;
    s.kind = kind;
    s.columns = std::move(cols);
    return s;
}

StepSpec all_numeric(StepKind kind) {
    StepSpec s;
    s.kind = kind;
    s.selector = Selector::all_numeric_predictors;
    return s;
}

StepSpec custom(std::string target, std::string expr) {
    StepSpec s;
    s.kind = StepKind::custom_expr;
    s.target = std::move(target);
    s.expr = std::move(expr);
    return s;
}

bool has_rule(const std::vector<AuditFinding>& f, const std::string& rule) {
    for (const auto& x : f)
        if (x.rule == rule && x.severity == Severity::reject) return true;
    return false;
}

Schema schema_xy() {
    return {{"x", ColumnKind::numeric, Role::predictor}, {"y_outcome", ColumnKind::numeric, Role::outcome}};
}

Dataset mixed(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    std::vector<double> a(n), b(n);
    std::vector<std::optional<std::string>> g(n);
    const char* labels[] = {"a", "b", "c"};
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = rng.normal();
        b[i] = rng.uniform() < 0.1 ? NAN : 3.0 + rng.normal();
        g[i] = std::string(labels[i % 3]);
    }
    return Dataset({numeric_column("a", a), numeric_column("b", b), categorical_column("g", g),
                    numeric_column("c", std::vector<double>(n, 4.0))});
}

}  // namespace

TEST_CASE("audit_recipe: impute then normalize is clean") {
    RecipeSpec r{{step(StepKind::impute_median, {"x"}), step(StepKind::normalize, {"x"})}};
    CHECK(audit_recipe(r, schema_xy()).empty());
}

TEST_CASE("audit_recipe: outcome referenced in a transform") {
    RecipeSpec r{{custom("x", "x - mean(y_outcome)")}};
    auto f = audit_recipe(r, schema_xy());
    CHECK(has_rule(f, "S2"));
    bool msg = false;
    for (const auto& x : f) msg |= x.message.find("outcome used in transform") != std::string::npos;
    CHECK(msg);
}

TEST_CASE("audit_recipe: absent column in a selector") {
    RecipeSpec r{{step(StepKind::normalize, {"zz"})}};
    CHECK(has_rule(audit_recipe(r, schema_xy()), "S1"));
}

TEST_CASE("audit_recipe: embedded lookup table is R3") {
    auto s = custom("x2", "x * 2");
    s.values.assign(1000, 1.5);
    CHECK(has_rule(audit_recipe(RecipeSpec{{s}}, schema_xy()), "R3"));
}

TEST_CASE("audit_recipe: pre-frozen aggregates are R4") {
    auto s = custom("x2", "x - mean(x)");
    s.frozen = {0.5};
    CHECK(has_rule(audit_recipe(RecipeSpec{{s}}, schema_xy()), "R4"));
}

TEST_CASE("audit_recipe: transform may not target the outcome") {
    CHECK(has_rule(audit_recipe(RecipeSpec{{step(StepKind::normalize, {"y_outcome"})}}, schema_xy()), "S3"));
}

TEST_CASE("fit/apply: median imputation") {
    Dataset d({numeric_column("x", {1, NAN, 3})});
    auto fitted = fit_recipe(RecipeSpec{{step(StepKind::impute_median, {"x"})}}, d);
    CHECK(fitted.steps[0].center == std::vector<double>{2.0});
    auto out = apply_recipe(fitted, Dataset({numeric_column("x", {NAN})}));
    CHECK(out.column("x").numeric == std::vector<double>{2.0});
}

TEST_CASE("fit/apply: normalize") {
    auto fitted = fit_recipe(RecipeSpec{{step(StepKind::normalize, {"x"})}}, Dataset({numeric_column("x", {1, 2, 3})}));
    CHECK(fitted.steps[0].center == std::vector<double>{2.0});
    CHECK(fitted.steps[0].scale == std::vector<double>{1.0});
    auto out = apply_recipe(fitted, Dataset({numeric_column("x", {4})}));
    CHECK(out.column("x").numeric == std::vector<double>{2.0});
}

TEST_CASE("fit/apply: dummy encoding with first level as reference") {
    Dataset d({categorical_column("g", {std::string("a"), std::string("b"), std::string("c")})});
    auto fitted = fit_recipe(RecipeSpec{{step(StepKind::dummy_encode, {"g"})}}, d);
    auto out = apply_recipe(fitted, d);
    CHECK_FALSE(out.has("g"));
    CHECK(out.has("g_b"));
    CHECK(out.has("g_c"));
    CHECK_FALSE(out.has("g_a"));
    CHECK(out.column("g_b").numeric == std::vector<double>{0, 1, 0});
}

TEST_CASE("dummy encoding: unseen level gives zeros and a warning without refitting") {
    Dataset train({categorical_column("g", {std::string("a"), std::string("b"), std::string("c")})});
    auto fitted = fit_recipe(RecipeSpec{{step(StepKind::dummy_encode, {"g"})}}, train);
    Dataset fresh({categorical_column("g", {std::string("d"), std::string("b")})});
    std::vector<std::string> warnings;
    auto out = apply_recipe(fitted, fresh, &warnings);
    CHECK(out.column("g_b").numeric == std::vector<double>{0, 1});
    CHECK(out.column("g_c").numeric == std::vector<double>{0, 0});
    CHECK_FALSE(out.has("g_d"));
    CHECK_FALSE(warnings.empty());
    // A refit on the new data would have produced a different column set.
    auto refit = fit_recipe(RecipeSpec{{step(StepKind::dummy_encode, {"g"})}}, fresh);
    CHECK(apply_recipe(refit, fresh).has("g_b"));
    CHECK_FALSE(apply_recipe(refit, fresh).has("g_c"));
}

TEST_CASE("applying a fitted recipe twice to its own output is refused") {
    Dataset d({numeric_column("x", {1, 2, 3})});
    auto fitted = fit_recipe(RecipeSpec{{step(StepKind::normalize, {"x"})}}, d);
    auto once = apply_recipe(fitted, d);
    CHECK_THROWS_AS(apply_recipe(fitted, once), GuardError);
}

TEST_CASE("fitted recipe ignores rows outside the analysis set") {
    auto spec = default_recipe();
    auto d = mixed(5, 60);
    std::vector<std::size_t> analysis;
    for (std::size_t i = 0; i < 40; ++i) analysis.push_back(i);
    auto base = fit_recipe(spec, d.subset_rows(analysis));

    auto b = d.column("b").numeric;
    for (std::size_t i = 40; i < 60; ++i) b[i] = 1e9;
    auto changed = d.with_column(numeric_column("b", b));
    auto again = fit_recipe(spec, changed.subset_rows(analysis));
    CHECK(base.fingerprint == again.fingerprint);
    REQUIRE(base.steps.size() == again.steps.size());
    for (std::size_t s = 0; s < base.steps.size(); ++s) {
        const auto& a = base.steps[s];
        const auto& b2 = again.steps[s];
        REQUIRE(a.center.size() == b2.center.size());
        REQUIRE(a.scale.size() == b2.scale.size());
        CHECK(std::memcmp(a.center.data(), b2.center.data(), a.center.size() * sizeof(double)) == 0);
        CHECK(std::memcmp(a.scale.data(), b2.scale.data(), a.scale.size() * sizeof(double)) == 0);
        CHECK(a.fill_label == b2.fill_label);
        CHECK(a.levels == b2.levels);
    }
}

TEST_CASE("in-sample apply matches the sequential transform") {
    auto d = mixed(9, 30);
    RecipeSpec spec{{all_numeric(StepKind::impute_mean), all_numeric(StepKind::normalize)}};
    auto fitted = fit_recipe(spec, d);
    auto out = apply_recipe(fitted, d);
    // Sequential by hand: mean-impute b, then standardize with the imputed column.
    auto b = d.column("b").numeric;
    double s = 0.0, k = 0.0;
    for (double v : b)
        if (!std::isnan(v)) s += v, k += 1.0;
    for (auto& v : b)
        if (std::isnan(v)) v = s / k;
    double m = 0.0;
    for (double v : b) m += v;
    m /= static_cast<double>(b.size());
    double ss = 0.0;
    for (double v : b) ss += (v - m) * (v - m);
    double sd = std::sqrt(ss / static_cast<double>(b.size() - 1));
    for (std::size_t i = 0; i < b.size(); ++i)
        CHECK(out.column("b").numeric[i] == doctest::Approx((b[i] - m) / sd).epsilon(1e-12));
}

TEST_CASE("default recipe column count") {
    auto d = mixed(2, 45);
    auto out = apply_recipe(fit_recipe(default_recipe(), d), d);
    // numeric predictors a, b (c has zero variance) plus 2 indicators for g.
    CHECK(out.n_cols() == 2 + 2);
    CHECK_FALSE(out.has("c"));
}

TEST_CASE("zero variance filter drops constant columns") {
    Dataset d({numeric_column("x", {1, 2, 3}), numeric_column("k", {7, 7, 7})});
    auto out = apply_recipe(fit_recipe(RecipeSpec{{all_numeric(StepKind::zero_variance_filter)}}, d), d);
    CHECK(out.has("x"));
    CHECK_FALSE(out.has("k"));
}

TEST_CASE("role update takes a column out of the predictor set") {
    Dataset d({categorical_column("site", {std::string("S1"), std::string("S2")}), numeric_column("x", {1, 2})});
    auto s = step(StepKind::role_update, {"site"});
    s.role = Role::id;
    auto out = apply_recipe(fit_recipe(RecipeSpec{{s}}, d), d);
    CHECK(out.column("site").role == Role::id);
}

TEST_CASE("custom expression step freezes aggregates on analysis rows") {
    Dataset a({numeric_column("x", {1, 2, 3})});
    auto fitted = fit_recipe(RecipeSpec{{custom("z", "(x - mean(x)) / sd(x)")}}, a);
    auto out = apply_recipe(fitted, Dataset({numeric_column("x", {4})}));
    CHECK(out.column("z").numeric == std::vector<double>{2.0});
}
