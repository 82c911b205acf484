#include "leakguard/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>

#include "leakguard/errors.hpp"

namespace leakguard {

using nlohmann::ordered_json;

namespace {

void check_keys(const ordered_json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

std::string get_string(const ordered_json& j, const char* key, const std::string& where, std::string fallback = "") {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_string()) throw ConfigError(where + "." + key + " must be a string");
    return j[key].get<std::string>();
}

double get_number(const ordered_json& j, const char* key, const std::string& where, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ConfigError(where + "." + key + " must be a number");
    return j[key].get<double>();
}

std::size_t get_count(const ordered_json& j, const char* key, const std::string& where, std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer() || j[key].get<long long>() < 0) {
        throw ConfigError(where + "." + key + " must be a non-negative integer");
    }
    return j[key].get<std::size_t>();
}

bool get_bool(const ordered_json& j, const char* key, const std::string& where, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) throw ConfigError(where + "." + key + " must be true or false");
    return j[key].get<bool>();
}

std::vector<double> get_numbers(const ordered_json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) return {};
    const ordered_json& a = j[key];
    if (a.is_number()) return {a.get<double>()};
    if (!a.is_array()) throw ConfigError(where + "." + key + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : a) {
        if (!v.is_number()) throw ConfigError(where + "." + key + " must be an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

std::vector<std::string> get_strings(const ordered_json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) return {};
    const ordered_json& a = j[key];
    if (a.is_string()) return {a.get<std::string>()};
    if (!a.is_array()) throw ConfigError(where + "." + key + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& v : a) {
        if (!v.is_string()) throw ConfigError(where + "." + key + " must be an array of strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

std::string resolve(const std::string& path, const std::string& base_dir) {
    if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
    return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

StepSpec parse_step(const ordered_json& j, const std::string& where) {
    check_keys(j, {"step", "selector", "columns", "role", "target", "expr", "values", "frozen"}, where);
    if (!j.contains("step")) throw ConfigError(where + " needs a 'step' kind");
    StepSpec s;
    s.kind = parse_step_kind(get_string(j, "step", where));
    if (j.contains("columns") && j.contains("selector")) {
        throw ConfigError(where + " gives both 'columns' and 'selector'");
    }
    s.columns = get_strings(j, "columns", where);
    s.selector = j.contains("selector") ? parse_selector(get_string(j, "selector", where)) : Selector::names;
    if (s.kind == StepKind::role_update) {
        if (!j.contains("role")) throw ConfigError(where + " (role_update) needs a 'role'");
        s.role = parse_role(get_string(j, "role", where));
    } else if (j.contains("role")) {
        throw ConfigError(where + ": 'role' applies to role_update steps only");
    }
    if (s.kind == StepKind::custom_expr) {
        s.target = get_string(j, "target", where);
        s.expr = get_string(j, "expr", where);
        if (s.target.empty() || s.expr.empty()) throw ConfigError(where + " (custom_expr) needs 'target' and 'expr'");
    } else if (j.contains("target") || j.contains("expr")) {
        throw ConfigError(where + ": 'target' and 'expr' apply to custom_expr steps only");
    }
    s.values = get_numbers(j, "values", where);
    s.frozen = get_numbers(j, "frozen", where);
    return s;
}

RecipeSpec parse_recipe(const ordered_json& j) {
    check_keys(j, {"default", "steps"}, "recipe");
    if (j.contains("default") && j.contains("steps")) throw ConfigError("recipe gives both 'default' and 'steps'");
    if (j.contains("steps")) {
        if (!j["steps"].is_array()) throw ConfigError("recipe.steps must be an array");
        RecipeSpec r;
        for (std::size_t i = 0; i < j["steps"].size(); ++i) {
            r.steps.push_back(parse_step(j["steps"][i], "recipe.steps[" + std::to_string(i) + "]"));
        }
        return r;
    }
    const std::string impute = get_string(j, "default", "recipe", "median");
    if (impute == "median") return default_recipe(StepKind::impute_median);
    if (impute == "mean") return default_recipe(StepKind::impute_mean);
    throw ConfigError("recipe.default must be 'median' or 'mean'");
}

std::vector<std::size_t> one_based(const ordered_json& a, const std::string& where) {
    if (!a.is_array()) throw ConfigError(where + " must be an array of 1-based row numbers");
    std::vector<std::size_t> out;
    for (const auto& v : a) {
        if (!v.is_number_integer() || v.get<long long>() < 1) {
            throw ConfigError(where + " must contain 1-based row numbers");
        }
        out.push_back(v.get<std::size_t>() - 1);
    }
    return out;
}

ResamplingSpec parse_resampling(const ordered_json& j) {
    const std::string w = "resampling";
    check_keys(j,
               {"method", "folds", "repeats", "times", "group", "order", "initial_window", "assess_window", "step",
                "expanding", "prop", "stratify", "splits"},
               w);
    ResamplingSpec r;
    r.method = parse_resample_method(get_string(j, "method", w, "cv"));
    r.folds = get_count(j, "folds", w, r.folds);
    r.repeats = get_count(j, "repeats", w, r.repeats);
    r.times = get_count(j, "times", w, r.times);
    r.group = get_string(j, "group", w);
    r.order = get_string(j, "order", w);
    r.initial_window = get_count(j, "initial_window", w, r.initial_window);
    r.assess_window = get_count(j, "assess_window", w, r.assess_window);
    r.step = get_count(j, "step", w, r.step);
    r.expanding = get_bool(j, "expanding", w, r.expanding);
    r.prop = get_number(j, "prop", w, r.prop);
    r.stratify = get_bool(j, "stratify", w, r.stratify);
    if (j.contains("splits")) {
        if (r.method != ResampleMethod::custom) throw ConfigError("resampling.splits requires method 'custom'");
        if (!j["splits"].is_array()) throw ConfigError("resampling.splits must be an array");
        for (std::size_t i = 0; i < j["splits"].size(); ++i) {
            const std::string sw = "resampling.splits[" + std::to_string(i) + "]";
            const ordered_json& s = j["splits"][i];
            check_keys(s, {"analysis", "assessment"}, sw);
            if (!s.contains("analysis") || !s.contains("assessment")) {
                throw ConfigError(sw + " needs 'analysis' and 'assessment'");
            }
            r.custom.push_back({one_based(s["analysis"], sw + ".analysis"), one_based(s["assessment"], sw + ".assessment")});
        }
    }
    if (r.method == ResampleMethod::custom && r.custom.empty()) throw ConfigError("custom resampling lists no splits");
    return r;
}

ModelEntry parse_model(const ordered_json& j, const std::string& where) {
    check_keys(j, {"id", "algorithm", "params", "tune", "cutpoints", "loss"}, where);
    ModelEntry m;
    m.spec.algorithm = get_string(j, "algorithm", where);
    if (m.spec.algorithm.empty()) throw ConfigError(where + " needs an 'algorithm'");
    m.spec.id = get_string(j, "id", where, m.spec.algorithm);
    if (j.contains("params")) {
        if (!j["params"].is_object()) throw ConfigError(where + ".params must be an object");
        for (const auto& [k, v] : j["params"].items()) {
            if (!v.is_number()) throw ConfigError(where + ".params." + k + " must be a number");
            m.spec.params[k] = v.get<double>();
        }
    }
    if (j.contains("tune")) {
        if (!j["tune"].is_object()) throw ConfigError(where + ".tune must be an object");
        for (const auto& [k, v] : j["tune"].items()) {
            (void)v;
            std::vector<double> values = get_numbers(j["tune"], k.c_str(), where + ".tune");
            if (values.empty()) throw ConfigError("empty tuning grid for '" + k + "' in " + where);
            if (m.spec.params.count(k)) throw ConfigError(where + " sets '" + k + "' in both params and tune");
            m.grid.emplace_back(k, std::move(values));
        }
    }
    m.spec.cutpoints = get_numbers(j, "cutpoints", where);
    if (j.contains("loss")) {
        const std::string loss = get_string(j, "loss", where);
        if (loss == "squared") {
            m.spec.loss = GbmLoss::squared;
        } else if (loss == "aft_normal") {
            m.spec.loss = GbmLoss::aft_normal;
        } else {
            throw ConfigError(where + ".loss must be 'squared' or 'aft_normal'");
        }
    }
    return m;
}

std::optional<Schema> parse_columns(const ordered_json& j) {
    if (!j.contains("columns")) return std::nullopt;
    if (!j["columns"].is_array()) throw ConfigError("data.columns must be an array");
    Schema schema;
    for (const auto& c : j["columns"]) {
        ColumnInfo info;
        if (c.is_string()) {
            info.name = c.get<std::string>();
        } else {
            check_keys(c, {"name", "kind"}, "data.columns entry");
            info.name = get_string(c, "name", "data.columns");
            const std::string kind = get_string(c, "kind", "data.columns");
            if (kind == "numeric") {
                info.kind = ColumnKind::numeric;
            } else if (kind == "categorical") {
                info.kind = ColumnKind::categorical;
            } else if (!kind.empty()) {
                throw ConfigError("data.columns kind must be 'numeric' or 'categorical'");
            }
        }
        if (info.name.empty()) throw ConfigError("data.columns entry has no name");
        schema.push_back(info);
    }
    return schema;
}

}  // namespace

ExperimentConfig parse_config(const ordered_json& doc, const std::string& base_dir) {
    try {
        check_keys(doc,
                   {"schema_version", "task", "data", "recipe", "resampling", "holdout", "models", "metrics",
                    "execution", "output"},
                   "config");
        if (!doc.contains("schema_version")) throw ConfigError("config needs a schema_version");
        if (!doc["schema_version"].is_number_integer() || doc["schema_version"].get<int>() != kConfigSchemaVersion) {
            throw ConfigError("unsupported schema_version (expected " + std::to_string(kConfigSchemaVersion) + ")");
        }
        ExperimentConfig cfg;
        ExperimentSpec& spec = cfg.spec;
        if (!doc.contains("task")) throw ConfigError("config needs a task");
        spec.outcome.task = parse_task(get_string(doc, "task", "config"));

        if (!doc.contains("data")) throw ConfigError("config needs a data section");
        const ordered_json& data = doc["data"];
        check_keys(data, {"train_csv", "test_csv", "label", "time", "status", "event_class", "columns"}, "data");
        cfg.train_csv = resolve(get_string(data, "train_csv", "data"), base_dir);
        cfg.test_csv = resolve(get_string(data, "test_csv", "data"), base_dir);
        spec.outcome.label = get_string(data, "label", "data");
        spec.outcome.time = get_string(data, "time", "data");
        spec.outcome.status = get_string(data, "status", "data");
        if (spec.outcome.task == TaskKind::survival) {
            if (spec.outcome.time.empty() || spec.outcome.status.empty()) {
                throw ConfigError("survival tasks need data.time and data.status");
            }
            if (!spec.outcome.label.empty()) throw ConfigError("survival tasks take time and status, not a label");
        } else {
            if (spec.outcome.label.empty()) throw ConfigError("data.label is required for this task");
            if (!spec.outcome.time.empty() || !spec.outcome.status.empty()) {
                throw ConfigError("data.time and data.status apply to survival tasks only");
            }
        }
        const std::string ev = get_string(data, "event_class", "data", "second");
        if (ev == "first") {
            spec.event_class = EventClass::first;
        } else if (ev == "second") {
            spec.event_class = EventClass::second;
        } else {
            throw ConfigError("data.event_class must be 'first' or 'second'");
        }
        cfg.columns = parse_columns(data);

        spec.recipe = doc.contains("recipe") ? parse_recipe(doc["recipe"]) : default_recipe();
        if (doc.contains("resampling")) {
            spec.resampling = parse_resampling(doc["resampling"]);
        } else if (spec.outcome.task == TaskKind::survival) {
            spec.resampling.method = ResampleMethod::none;
        }
        spec.holdout = get_number(doc, "holdout", "config", spec.holdout);

        if (!doc.contains("models") || !doc["models"].is_array() || doc["models"].empty()) {
            throw ConfigError("config needs a non-empty models array");
        }
        for (std::size_t i = 0; i < doc["models"].size(); ++i) {
            spec.models.push_back(parse_model(doc["models"][i], "models[" + std::to_string(i) + "]"));
        }

        if (doc.contains("metrics")) {
            const ordered_json& m = doc["metrics"];
            check_keys(m, {"primary", "standardize_c", "threshold", "bootstrap"}, "metrics");
            spec.primary_metric = get_string(m, "primary", "metrics");
            spec.standardize_c = get_bool(m, "standardize_c", "metrics", spec.standardize_c);
            spec.threshold = get_number(m, "threshold", "metrics", spec.threshold);
            if (m.contains("bootstrap")) {
                const ordered_json& b = m["bootstrap"];
                check_keys(b, {"enabled", "samples", "level"}, "metrics.bootstrap");
                spec.bootstrap.enabled = get_bool(b, "enabled", "metrics.bootstrap", spec.bootstrap.enabled);
                spec.bootstrap.samples = get_count(b, "samples", "metrics.bootstrap", spec.bootstrap.samples);
                spec.bootstrap.level = get_number(b, "level", "metrics.bootstrap", spec.bootstrap.level);
            }
        }
        if (!(spec.threshold > 0.0 && spec.threshold < 1.0)) throw ConfigError("metrics.threshold must lie in (0, 1)");

        if (doc.contains("execution")) {
            const ordered_json& e = doc["execution"];
            check_keys(e, {"seed", "workers"}, "execution");
            if (e.contains("seed")) {
                if (!e["seed"].is_number_integer() || e["seed"].get<long long>() < 0) {
                    throw ConfigError("execution.seed must be a non-negative integer");
                }
                spec.seed = e["seed"].get<std::uint64_t>();
            }
            spec.workers = get_count(e, "workers", "execution", spec.workers);
            if (spec.workers == 0) throw ConfigError("execution.workers must be at least 1");
        }
        if (doc.contains("output")) {
            const ordered_json& o = doc["output"];
            check_keys(o, {"results_path", "report_path"}, "output");
            cfg.results_path = resolve(get_string(o, "results_path", "output"), base_dir);
            cfg.report_path = resolve(get_string(o, "report_path", "output"), base_dir);
        }
        if (spec.resampling.method == ResampleMethod::custom && cfg.test_csv.empty()) {
            throw ConfigError("custom splits index the training rows; supply data.test_csv so they are unambiguous");
        }
        validate_experiment(spec);
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_config(doc, std::filesystem::path(path).parent_path().string());
}

ordered_json config_echo(const ExperimentConfig& cfg) {
    const ExperimentSpec& spec = cfg.spec;
    ordered_json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["task"] = to_string(spec.outcome.task);

    ordered_json data;
    if (!cfg.train_csv.empty()) data["train_csv"] = cfg.train_csv;
    if (!cfg.test_csv.empty()) data["test_csv"] = cfg.test_csv;
    if (spec.outcome.task == TaskKind::survival) {
        data["time"] = spec.outcome.time;
        data["status"] = spec.outcome.status;
    } else {
        data["label"] = spec.outcome.label;
    }
    data["event_class"] = spec.event_class == EventClass::first ? "first" : "second";
    if (cfg.columns) {
        ordered_json cols = ordered_json::array();
        for (const ColumnInfo& c : *cfg.columns) {
            ordered_json cj = {{"name", c.name}};
            if (c.kind) cj["kind"] = to_string(*c.kind);
            cols.push_back(cj);
        }
        data["columns"] = cols;
    }
    j["data"] = data;

    ordered_json steps = ordered_json::array();
    for (const StepSpec& s : spec.recipe.steps) {
        ordered_json sj;
        sj["step"] = to_string(s.kind);
        if (s.kind == StepKind::custom_expr) {
            sj["target"] = s.target;
            sj["expr"] = s.expr;
        } else if (s.selector == Selector::names) {
            sj["columns"] = s.columns;
        } else {
            sj["selector"] = to_string(s.selector);
        }
        if (s.kind == StepKind::role_update) sj["role"] = to_string(s.role);
        if (!s.values.empty()) sj["values"] = s.values;
        if (!s.frozen.empty()) sj["frozen"] = s.frozen;
        steps.push_back(sj);
    }
    j["recipe"] = {{"steps", steps}};

    const ResamplingSpec& r = spec.resampling;
    ordered_json rs;
    rs["method"] = to_string(r.method);
    rs["folds"] = r.folds;
    rs["repeats"] = r.repeats;
    rs["times"] = r.times;
    if (!r.group.empty()) rs["group"] = r.group;
    if (!r.order.empty()) rs["order"] = r.order;
    rs["initial_window"] = r.initial_window;
    rs["assess_window"] = r.assess_window;
    rs["step"] = r.step;
    rs["expanding"] = r.expanding;
    rs["prop"] = r.prop;
    rs["stratify"] = r.stratify;
    if (r.method == ResampleMethod::custom) {
        ordered_json splits = ordered_json::array();
        for (const CustomSplit& c : r.custom) {
            ordered_json a = ordered_json::array();
            ordered_json b = ordered_json::array();
            for (std::size_t i : c.analysis) a.push_back(i + 1);
            for (std::size_t i : c.assessment) b.push_back(i + 1);
            splits.push_back({{"analysis", a}, {"assessment", b}});
        }
        rs["splits"] = splits;
    }
    j["resampling"] = rs;
    j["holdout"] = spec.holdout;

    ordered_json models = ordered_json::array();
    for (const ModelEntry& m : spec.models) {
        ordered_json mj;
        mj["id"] = m.spec.id;
        mj["algorithm"] = m.spec.algorithm;
        ordered_json params = ordered_json::object();
        for (const auto& [k, v] : m.spec.params) params[k] = v;
        mj["params"] = params;
        if (!m.grid.empty()) {
            ordered_json tune = ordered_json::object();
            for (const auto& [k, v] : m.grid) tune[k] = v;
            mj["tune"] = tune;
        }
        if (!m.spec.cutpoints.empty()) mj["cutpoints"] = m.spec.cutpoints;
        if (m.spec.loss) mj["loss"] = *m.spec.loss == GbmLoss::squared ? "squared" : "aft_normal";
        models.push_back(mj);
    }
    j["models"] = models;

    ordered_json metrics;
    if (!spec.primary_metric.empty()) metrics["primary"] = spec.primary_metric;
    metrics["standardize_c"] = spec.standardize_c;
    metrics["threshold"] = spec.threshold;
    metrics["bootstrap"] = {{"enabled", spec.bootstrap.enabled},
                            {"samples", spec.bootstrap.samples},
                            {"level", spec.bootstrap.level}};
    j["metrics"] = metrics;
    j["execution"] = {{"seed", spec.seed}};
    return j;
}

}  // namespace leakguard
