#include "leakguard/recipe.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <map>

#include "leakguard/errors.hpp"
#include "leakguard/stats.hpp"

namespace leakguard {

namespace {

constexpr double kZeroVariance = 1e-12;

bool is_response(Role role) { return role == Role::outcome || role == Role::time || role == Role::status; }

Dataset rebuild(const Dataset& like, std::vector<Column> columns) {
    Dataset out(std::move(columns));
    for (std::uint64_t fp : like.applied_recipes()) out = out.with_applied_recipe(fp);
    return out;
}

std::vector<std::string> resolve(const StepSpec& step, const Dataset& data) {
    std::vector<std::string> out;
    if (step.selector == Selector::names) {
        for (const std::string& name : step.columns) {
            if (!data.has(name)) throw DataError("recipe step " + std::string(to_string(step.kind)) +
                                                 ": column '" + name + "' not found");
            out.push_back(name);
        }
        return out;
    }
    for (const Column& c : data.columns()) {
        if (c.role != Role::predictor) continue;
        if (step.selector == Selector::all_numeric_predictors && c.kind != ColumnKind::numeric) continue;
        if (step.selector == Selector::all_categorical_predictors && c.kind != ColumnKind::categorical) continue;
        out.push_back(c.name);
    }
    return out;
}

const Column& require(const Dataset& data, const std::string& name, StepKind kind) {
    const Column* c = data.find(name);
    if (!c) {
        throw DataError("column '" + name + "' required by recipe step " + std::string(to_string(kind)) +
                        " is missing");
    }
    return *c;
}

std::int32_t code_of(const Column& c, const std::string& label) {
    auto it = std::find(c.levels.begin(), c.levels.end(), label);
    return it == c.levels.end() ? kMissingLevel : static_cast<std::int32_t>(it - c.levels.begin());
}

// ---------------------------------------------------------------- fit

FittedStep fit_step(const StepSpec& spec, const Dataset& data, std::vector<std::string>& warnings) {
    FittedStep step;
    step.kind = spec.kind;
    step.role = spec.role;
    if (spec.kind == StepKind::custom_expr) {
        step.target = spec.target;
        step.expr = dsl::parse_expr(spec.expr);
        step.frozen = dsl::fit_expr(*step.expr, data);
        return step;
    }
    step.columns = resolve(spec, data);

    switch (spec.kind) {
        case StepKind::impute_median:
        case StepKind::impute_mean:
            for (const std::string& name : step.columns) {
                const Column& c = data.column(name);
                if (c.kind == ColumnKind::numeric) {
                    auto v = spec.kind == StepKind::impute_median ? stats::median(c.numeric) : stats::mean(c.numeric);
                    if (!v) throw DataError("cannot impute '" + name + "': all values are missing");
                    step.center.push_back(*v);
                    step.fill_label.emplace_back();
                } else {
                    // Categorical columns take the most frequent level.
                    std::vector<std::size_t> counts(c.levels.size(), 0);
                    for (std::int32_t code : c.codes) {
                        if (code != kMissingLevel) ++counts[static_cast<std::size_t>(code)];
                    }
                    auto best = std::max_element(counts.begin(), counts.end());
                    if (best == counts.end() || *best == 0) {
                        throw DataError("cannot impute '" + name + "': all values are missing");
                    }
                    step.center.push_back(std::numeric_limits<double>::quiet_NaN());
                    step.fill_label.push_back(c.levels[static_cast<std::size_t>(best - counts.begin())]);
                }
            }
            break;
        case StepKind::normalize: {
            std::vector<std::string> kept;
            for (const std::string& name : step.columns) {
                const Column& c = data.column(name);
                if (c.kind != ColumnKind::numeric) throw DataError("normalize: column '" + name + "' is not numeric");
                auto m = stats::mean(c.numeric);
                auto s = stats::sd(c.numeric);
                if (!m) throw DataError("normalize: column '" + name + "' is entirely missing");
                if (!s || *s < kZeroVariance) {
                    warnings.push_back("normalize: column '" + name + "' has zero variance and was dropped");
                    step.dropped.push_back(name);
                    continue;
                }
                kept.push_back(name);
                step.center.push_back(*m);
                step.scale.push_back(*s);
            }
            step.columns = std::move(kept);
            break;
        }
        case StepKind::dummy_encode:
            for (const std::string& name : step.columns) {
                const Column& c = data.column(name);
                if (c.kind != ColumnKind::categorical) {
                    throw DataError("dummy_encode: column '" + name + "' is not categorical");
                }
                step.levels.push_back(c.levels);
            }
            break;
        case StepKind::zero_variance_filter:
            for (const std::string& name : step.columns) {
                const Column& c = data.column(name);
                bool drop = false;
                if (c.kind == ColumnKind::numeric) {
                    std::vector<double> v = stats::finite_values(c.numeric);
                    std::sort(v.begin(), v.end());
                    const bool single = v.empty() || v.front() == v.back();
                    auto s = stats::sd(v);
                    drop = single || !s || *s < kZeroVariance;
                } else {
                    std::vector<bool> seen(c.levels.size(), false);
                    for (std::int32_t code : c.codes) {
                        if (code != kMissingLevel) seen[static_cast<std::size_t>(code)] = true;
                    }
                    drop = std::count(seen.begin(), seen.end(), true) <= 1;
                }
                if (drop) step.dropped.push_back(name);
            }
            break;
        case StepKind::role_update:
            for (const std::string& name : step.columns) {
                if (is_response(data.column(name).role) || is_response(spec.role)) {
                    throw DataError("role_update may not change response roles ('" + name + "')");
                }
            }
            break;
        case StepKind::custom_expr: break;
    }
    return step;
}

// ---------------------------------------------------------------- apply

Dataset apply_step(const FittedStep& step, const Dataset& data, std::vector<std::string>& warnings) {
    switch (step.kind) {
        case StepKind::impute_median:
        case StepKind::impute_mean: {
            Dataset out = data;
            for (std::size_t j = 0; j < step.columns.size(); ++j) {
                Column c = require(out, step.columns[j], step.kind);
                if (c.kind == ColumnKind::numeric) {
                    for (double& x : c.numeric) {
                        if (std::isnan(x)) x = step.center[j];
                    }
                } else {
                    std::int32_t code = code_of(c, step.fill_label[j]);
                    if (code == kMissingLevel) {
                        c.levels.push_back(step.fill_label[j]);
                        code = static_cast<std::int32_t>(c.levels.size() - 1);
                    }
                    for (std::int32_t& k : c.codes) {
                        if (k == kMissingLevel) k = code;
                    }
                }
                out = out.with_column(std::move(c));
            }
            return out;
        }
        case StepKind::normalize: {
            Dataset out = data;
            for (std::size_t j = 0; j < step.columns.size(); ++j) {
                Column c = require(out, step.columns[j], step.kind);
                if (c.kind != ColumnKind::numeric) throw DataError("normalize: column '" + c.name + "' is not numeric");
                for (double& x : c.numeric) x = (x - step.center[j]) / step.scale[j];
                out = out.with_column(std::move(c));
            }
            for (const std::string& name : step.dropped) {
                require(out, name, step.kind);
                out = out.without_column(name);
            }
            return out;
        }
        case StepKind::dummy_encode: {
            for (const std::string& name : step.columns) require(data, name, step.kind);
            std::vector<Column> columns;
            for (const Column& c : data.columns()) {
                auto pos = std::find(step.columns.begin(), step.columns.end(), c.name);
                if (pos == step.columns.end()) {
                    columns.push_back(c);
                    continue;
                }
                if (c.kind != ColumnKind::categorical) {
                    throw DataError("dummy_encode: column '" + c.name + "' is not categorical");
                }
                const auto& levels = step.levels[static_cast<std::size_t>(pos - step.columns.begin())];
                const std::size_t n = c.size();
                std::vector<std::vector<double>> ind(levels.size() > 0 ? levels.size() - 1 : 0,
                                                     std::vector<double>(n, 0.0));
                // Map this data's level codes onto the frozen level list by label.
                std::vector<int> map(c.levels.size(), -1);
                for (std::size_t k = 0; k < c.levels.size(); ++k) {
                    auto it = std::find(levels.begin(), levels.end(), c.levels[k]);
                    if (it != levels.end()) map[k] = static_cast<int>(it - levels.begin());
                }
                std::size_t unseen = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    const std::int32_t code = c.codes[i];
                    if (code == kMissingLevel) {
                        for (auto& col : ind) col[i] = std::numeric_limits<double>::quiet_NaN();
                        continue;
                    }
                    const int m = map[static_cast<std::size_t>(code)];
                    if (m < 0) {
                        ++unseen;
                    } else if (m > 0) {
                        ind[static_cast<std::size_t>(m - 1)][i] = 1.0;
                    }
                }
                if (unseen) {
                    warnings.push_back("dummy_encode: " + std::to_string(unseen) + " row(s) of '" + c.name +
                                       "' have levels unseen during fitting; encoded as all zeros");
                }
                for (std::size_t k = 1; k < levels.size(); ++k) {
                    columns.push_back(numeric_column(c.name + "_" + levels[k], std::move(ind[k - 1]), c.role));
                }
            }
            return rebuild(data, std::move(columns));
        }
        case StepKind::zero_variance_filter: {
            Dataset out = data;
            for (const std::string& name : step.columns) require(out, name, step.kind);
            for (const std::string& name : step.dropped) out = out.without_column(name);
            return out;
        }
        case StepKind::role_update: {
            Dataset out = data;
            for (const std::string& name : step.columns) {
                require(out, name, step.kind);
                out = out.with_role(name, step.role);
            }
            return out;
        }
        case StepKind::custom_expr: {
            dsl::ApplyResult r = dsl::apply_expr(*step.expr, step.frozen, data);
            warnings.insert(warnings.end(), r.warnings.begin(), r.warnings.end());
            const Column* existing = data.find(step.target);
            const Role role = existing ? existing->role : Role::predictor;
            return data.with_column(numeric_column(step.target, std::move(r.values), role));
        }
    }
    return data;
}

// ---------------------------------------------------------------- fingerprint

struct Fnv {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    }
    void num(double v) {
        if (v == 0.0) v = 0.0;  // fold -0
        bytes(&v, sizeof v);
    }
    void str(const std::string& s) {
        const std::uint64_t n = s.size();
        bytes(&n, sizeof n);
        bytes(s.data(), s.size());
    }
    void strs(const std::vector<std::string>& v) {
        const std::uint64_t n = v.size();
        bytes(&n, sizeof n);
        for (const auto& s : v) str(s);
    }
    void nums(const std::vector<double>& v) {
        const std::uint64_t n = v.size();
        bytes(&n, sizeof n);
        for (double x : v) num(x);
    }
};

std::uint64_t fingerprint(const FittedRecipe& r) {
    Fnv f;
    for (const FittedStep& s : r.steps) {
        const int kind = static_cast<int>(s.kind);
        const int role = static_cast<int>(s.role);
        f.bytes(&kind, sizeof kind);
        f.strs(s.columns);
        f.nums(s.center);
        f.nums(s.scale);
        f.strs(s.fill_label);
        for (const auto& l : s.levels) f.strs(l);
        f.strs(s.dropped);
        f.bytes(&role, sizeof role);
        f.str(s.target);
        if (s.expr) f.str(dsl::print_expr(*s.expr));
        f.nums(s.frozen.values);
    }
    return f.h;
}

}  // namespace

std::string_view to_string(StepKind kind) {
    switch (kind) {
        case StepKind::impute_median: return "impute_median";
        case StepKind::impute_mean: return "impute_mean";
        case StepKind::normalize: return "normalize";
        case StepKind::dummy_encode: return "dummy_encode";
        case StepKind::zero_variance_filter: return "zero_variance_filter";
        case StepKind::role_update: return "role_update";
        case StepKind::custom_expr: return "custom_expr";
    }
    return "?";
}

StepKind parse_step_kind(std::string_view text) {
    for (StepKind k : {StepKind::impute_median, StepKind::impute_mean, StepKind::normalize, StepKind::dummy_encode,
                       StepKind::zero_variance_filter, StepKind::role_update, StepKind::custom_expr}) {
        if (to_string(k) == text) return k;
    }
    throw ConfigError("unknown recipe step '" + std::string(text) + "'");
}

std::string_view to_string(Selector selector) {
    switch (selector) {
        case Selector::names: return "names";
        case Selector::all_predictors: return "all_predictors";
        case Selector::all_numeric_predictors: return "all_numeric_predictors";
        case Selector::all_categorical_predictors: return "all_categorical_predictors";
    }
    return "?";
}

Selector parse_selector(std::string_view text) {
    for (Selector s : {Selector::all_predictors, Selector::all_numeric_predictors,
                       Selector::all_categorical_predictors}) {
        if (to_string(s) == text) return s;
    }
    throw ConfigError("unknown column selector '" + std::string(text) + "'");
}

RecipeSpec default_recipe(StepKind impute) {
    if (impute != StepKind::impute_median && impute != StepKind::impute_mean) {
        throw ConfigError("default recipe imputation must be impute_median or impute_mean");
    }
    RecipeSpec spec;
    StepSpec s;
    s.kind = impute;
    s.selector = Selector::all_predictors;
    spec.steps.push_back(s);
    s.kind = StepKind::dummy_encode;
    s.selector = Selector::all_categorical_predictors;
    spec.steps.push_back(s);
    s.kind = StepKind::zero_variance_filter;
    s.selector = Selector::all_predictors;
    spec.steps.push_back(s);
    s.kind = StepKind::normalize;
    s.selector = Selector::all_numeric_predictors;
    spec.steps.push_back(s);
    return spec;
}

std::vector<AuditFinding> audit_recipe(const RecipeSpec& spec, const Schema& schema) {
    std::vector<AuditFinding> findings;
    Schema cur = schema;
    bool numeric_added_unknown = false;

    auto find = [&](const std::string& name) -> ColumnInfo* {
        for (ColumnInfo& c : cur) {
            if (c.name == name) return &c;
        }
        return nullptr;
    };

    for (std::size_t i = 0; i < spec.steps.size(); ++i) {
        const StepSpec& step = spec.steps[i];
        const std::string where = "step " + std::to_string(i + 1) + " (" + std::string(to_string(step.kind)) + ")";
        auto add = [&](Severity sev, const char* rule, std::string message) {
            findings.push_back({sev, rule, {}, std::move(message), where});
        };

        if (step.values.size() > dsl::kMaxInlineLiterals) {
            add(Severity::reject, "R3",
                "step embeds " + std::to_string(step.values.size()) + " inline values (limit " +
                    std::to_string(dsl::kMaxInlineLiterals) + "); external data must not be embedded in a recipe");
        }
        if (!step.frozen.empty()) {
            add(Severity::reject, "R4",
                "step carries pre-frozen aggregate values; aggregates must be estimated inside each resample");
        }

        if (step.kind == StepKind::custom_expr) {
            if (step.target.empty()) add(Severity::reject, "S1", "custom_expr step has no target column");
            if (ColumnInfo* t = find(step.target); t && is_response(t->role)) {
                add(Severity::reject, "S3", "transform targets outcome column '" + step.target + "'");
            }
            dsl::AuditOptions opts;
            for (const ColumnInfo& c : cur) opts.columns.push_back(c.name);
            for (AuditFinding f : dsl::audit_expr(step.expr, opts)) {
                f.where = where;
                findings.push_back(std::move(f));
            }
            try {
                dsl::NodePtr root = dsl::parse_syntax(step.expr);
                std::function<void(const dsl::Node&)> walk = [&](const dsl::Node& n) {
                    if (n.kind == dsl::NodeKind::column) {
                        if (const ColumnInfo* c = find(n.name); c && is_response(c->role)) {
                            findings.push_back({Severity::reject, "S2", n.span,
                                                "outcome used in transform: '" + n.name + "' has role " +
                                                    std::string(to_string(c->role)),
                                                where});
                        }
                    }
                    for (const auto& a : n.args) walk(*a);
                };
                walk(*root);
            } catch (const ParseError&) {
                // Already reported as R0.
            }
            if (!step.target.empty() && !find(step.target)) {
                cur.push_back({step.target, ColumnKind::numeric, Role::predictor});
            }
            continue;
        }

        std::vector<ColumnInfo*> selected;
        if (step.selector == Selector::names) {
            if (step.columns.empty()) add(Severity::warn, "S5", "selector lists no columns");
            for (const std::string& name : step.columns) {
                ColumnInfo* c = find(name);
                if (!c) {
                    add(Severity::reject, "S1", "selector names absent column '" + name + "'");
                    continue;
                }
                selected.push_back(c);
                if (step.kind != StepKind::role_update && is_response(c->role)) {
                    add(Severity::reject, "S3", "transform targets outcome column '" + name + "'");
                }
            }
        } else {
            bool unknown_kind = false;
            for (ColumnInfo& c : cur) {
                if (c.role != Role::predictor) continue;
                if (step.selector == Selector::all_predictors) {
                    selected.push_back(&c);
                    continue;
                }
                if (!c.kind) {
                    unknown_kind = true;
                    continue;
                }
                const ColumnKind want = step.selector == Selector::all_numeric_predictors ? ColumnKind::numeric
                                                                                          : ColumnKind::categorical;
                if (*c.kind == want) selected.push_back(&c);
            }
            if (step.selector == Selector::all_numeric_predictors && numeric_added_unknown) unknown_kind = true;
            if (selected.empty() && !unknown_kind) {
                add(Severity::warn, "S5", "selector " + std::string(to_string(step.selector)) + " matches no column");
            }
        }

        if (step.kind == StepKind::role_update) {
            if (is_response(step.role)) {
                add(Severity::reject, "S4",
                    "role_update may not assign the " + std::string(to_string(step.role)) +
                        " role; response columns are fixed by the task");
            }
            for (ColumnInfo* c : selected) {
                if (is_response(c->role)) {
                    add(Severity::reject, "S4", "role_update changes the role of response column '" + c->name + "'");
                } else {
                    c->role = step.role;
                }
            }
        } else if (step.kind == StepKind::dummy_encode) {
            std::vector<std::string> gone;
            for (ColumnInfo* c : selected) {
                if (c->kind == ColumnKind::categorical || !c->kind) gone.push_back(c->name);
            }
            std::erase_if(cur, [&](const ColumnInfo& c) {
                return std::find(gone.begin(), gone.end(), c.name) != gone.end();
            });
            if (!gone.empty()) numeric_added_unknown = true;
        }
    }
    return findings;
}

FittedRecipe fit_recipe(const RecipeSpec& spec, const Dataset& analysis) {
    if (analysis.n_rows() == 0) throw DataError("cannot fit a recipe on an empty analysis set");
    FittedRecipe fitted;
    fitted.source_rows = analysis.n_rows();
    Dataset current = analysis;
    for (const StepSpec& s : spec.steps) {
        FittedStep step = fit_step(s, current, fitted.fit_warnings);
        std::vector<std::string> ignored;
        current = apply_step(step, current, ignored);
        fitted.steps.push_back(std::move(step));
    }
    fitted.fingerprint = fingerprint(fitted);
    return fitted;
}

Dataset apply_recipe(const FittedRecipe& fitted, const Dataset& data, std::vector<std::string>* warnings) {
    const auto& applied = data.applied_recipes();
    if (std::find(applied.begin(), applied.end(), fitted.fingerprint) != applied.end()) {
        throw GuardError("fitted recipe already applied to this data; recipes run exactly once per fold path");
    }
    std::vector<std::string> local;
    Dataset current = data;
    for (const FittedStep& step : fitted.steps) current = apply_step(step, current, local);
    if (warnings) warnings->insert(warnings->end(), local.begin(), local.end());
    return current.with_applied_recipe(fitted.fingerprint);
}

}  // namespace leakguard
