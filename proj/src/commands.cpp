#include "leakguard/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>

#include "leakguard/csv.hpp"
#include "leakguard/errors.hpp"
#include "leakguard/report.hpp"

namespace leakguard {

using nlohmann::ordered_json;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const AuditError*>(&e)) return kExitAudit;
    if (dynamic_cast<const GuardError*>(&e)) return kExitGuard;
    if (dynamic_cast<const FitError*>(&e)) return kExitFit;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DataError*>(&e) ||
        dynamic_cast<const UnsupportedError*>(&e) || dynamic_cast<const ParseError*>(&e)) {
        return kExitConfig;
    }
    return kExitFit;
}

namespace {

int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path + "'");
    f << text;
}

std::string fmt(double v, int digits = 3) {
    if (std::isnan(v)) return "NA";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

Schema hinted_schema(const ExperimentConfig& cfg) {
    Schema schema = *cfg.columns;
    const OutcomeSpec& o = cfg.spec.outcome;
    for (ColumnInfo& c : schema) {
        if (o.task == TaskKind::survival) {
            if (c.name == o.time) c.role = Role::time;
            if (c.name == o.status) c.role = Role::status;
        } else if (c.name == o.label) {
            c.role = Role::outcome;
        }
    }
    return schema;
}

void print_findings(const std::vector<AuditFinding>& findings, std::ostream& os) {
    for (const AuditFinding& f : findings) {
        os << (f.severity == Severity::reject ? "reject " : "warn   ") << f.rule << "  "
           << (f.where.empty() ? "" : f.where + ": ") << f.message << "\n";
    }
}

void check_declared_columns(const ExperimentConfig& cfg, const Dataset& data) {
    if (!cfg.columns) return;
    for (const ColumnInfo& c : *cfg.columns) {
        const Column* col = data.find(c.name);
        if (!col) throw DataError("declared column '" + c.name + "' is not in the data");
        if (c.kind && *c.kind != col->kind && c.name != cfg.spec.outcome.label) {
            throw DataError("declared column '" + c.name + "' is " + std::string(to_string(*c.kind)) +
                            " but the data holds " + std::string(to_string(col->kind)) + " values");
        }
    }
}

}  // namespace

std::size_t resolve_workers(std::optional<std::size_t> flag, std::size_t config_value) {
    if (flag) {
        if (*flag == 0) throw ConfigError("workers must be at least 1");
        return *flag;
    }
    if (const char* env = std::getenv("LEAKGUARD_WORKERS"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 1) throw ConfigError("LEAKGUARD_WORKERS must be a positive integer");
        return static_cast<std::size_t>(v);
    }
    return config_value;
}

Dataset load_dataset(const std::string& path, const ExperimentSpec& spec) {
    Dataset data = read_csv(path);
    if (spec.outcome.task == TaskKind::classification) {
        const Column* y = data.find(spec.outcome.label);
        if (y && y->kind == ColumnKind::numeric) {
            std::vector<std::optional<std::string>> labels;
            for (double v : y->numeric) {
                if (std::isnan(v)) {
                    labels.emplace_back(std::nullopt);
                    continue;
                }
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.15g", v);
                labels.emplace_back(buf);
            }
            data = data.with_column(categorical_column(y->name, labels, y->role));
        }
    }
    return data;
}

int cmd_run(const std::string& config_path, const RunOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto start = std::chrono::steady_clock::now();
        ExperimentConfig cfg = load_config(config_path);
        cfg.spec.workers = resolve_workers(options.workers, cfg.spec.workers);
        if (!options.results_path.empty()) cfg.results_path = options.results_path;
        if (!options.report_path.empty()) cfg.report_path = options.report_path;

        // With column hints the recipe is rejected before any data is read.
        if (cfg.columns) {
            const auto findings = audit_recipe(cfg.spec.recipe, hinted_schema(cfg));
            if (has_reject(findings)) {
                print_findings(findings, err);
                return static_cast<int>(kExitAudit);
            }
        }
        if (cfg.train_csv.empty()) throw ConfigError("data.train_csv is required");
        Dataset data = load_dataset(cfg.train_csv, cfg.spec);
        check_declared_columns(cfg, data);
        std::optional<Dataset> test;
        if (!cfg.test_csv.empty()) test = load_dataset(cfg.test_csv, cfg.spec);

        const auto findings = audit_recipe(cfg.spec.recipe, validate_schema(data, cfg.spec.outcome).schema());
        print_findings(findings, err);
        if (has_reject(findings)) return static_cast<int>(kExitAudit);

        const EvaluationResult result = run_experiment(cfg.spec, data, test);
        const std::string report = render_report(result);
        out << report;

        ordered_json doc;
        doc["schema_version"] = kResultsSchemaVersion;
        doc["version"] = kVersion;
        doc["config"] = config_echo(cfg);
        const ordered_json body = results_json(result);
        for (auto it = body.begin(); it != body.end(); ++it) doc[it.key()] = it.value();
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        doc["wall_clock_seconds"] = seconds;
        if (!cfg.results_path.empty()) write_file(cfg.results_path, doc.dump(2) + "\n");
        if (!cfg.report_path.empty()) write_file(cfg.report_path, report);
        return static_cast<int>(kExitOk);
    });
}

int cmd_audit(const std::string& config_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ExperimentConfig cfg = load_config(config_path);
        if (!cfg.columns) {
            throw ConfigError("audit needs data.columns; the audit does not read the data file");
        }
        const auto findings = audit_recipe(cfg.spec.recipe, hinted_schema(cfg));
        ordered_json doc;
        doc["schema_version"] = kResultsSchemaVersion;
        doc["findings"] = findings_json(findings);
        doc["rejected"] = has_reject(findings);
        out << doc.dump(2) << "\n";
        print_findings(findings, err);
        return static_cast<int>(has_reject(findings) ? kExitAudit : kExitOk);
    });
}

int cmd_splits(const std::string& config_path, const std::string& out_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ExperimentConfig cfg = load_config(config_path);
        if (cfg.train_csv.empty()) throw ConfigError("data.train_csv is required");
        const Dataset data = validate_schema(load_dataset(cfg.train_csv, cfg.spec), cfg.spec.outcome);
        std::vector<std::string> warnings;
        std::vector<std::size_t> train_rows;
        std::vector<std::size_t> test_rows;
        if (cfg.test_csv.empty()) {
            std::tie(train_rows, test_rows) = holdout_rows(cfg.spec, data, &warnings);
        } else {
            train_rows.resize(data.n_rows());
            for (std::size_t i = 0; i < train_rows.size(); ++i) train_rows[i] = i;
        }
        const Dataset train = data.subset_rows(train_rows);
        const auto splits = make_splits(cfg.spec.resampling, train, outcome_strata(train, cfg.spec.outcome),
                                        resampling_seed(cfg.spec), &warnings);

        auto one_based = [](const std::vector<std::size_t>& v) {
            ordered_json a = ordered_json::array();
            for (std::size_t i : v) a.push_back(i + 1);
            return a;
        };
        ordered_json doc;
        doc["schema_version"] = kResultsSchemaVersion;
        doc["method"] = to_string(cfg.spec.resampling.method);
        doc["fingerprint"] = hex64(split_fingerprint(splits));
        doc["train_rows"] = one_based(train_rows);
        doc["test_rows"] = one_based(test_rows);
        ordered_json plan = ordered_json::array();
        for (const ResampleSplit& s : splits) {
            plan.push_back({{"label", s.label}, {"analysis", one_based(s.analysis)}, {"assessment", one_based(s.assessment)}});
        }
        doc["splits"] = plan;
        if (!cfg.spec.resampling.group.empty()) {
            ordered_json v = ordered_json::array();
            for (const GroupViolation& g :
                 check_group_integrity(splits, group_labels(train.column(cfg.spec.resampling.group)))) {
                v.push_back({{"split", g.split}, {"group", g.group}});
            }
            doc["group_violations"] = v;
        }
        doc["warnings"] = warnings;
        const std::string text = doc.dump(2) + "\n";
        if (out_path.empty()) {
            out << text;
        } else {
            write_file(out_path, text);
        }
        for (const auto& w : warnings) err << "warning: " << w << "\n";
        return static_cast<int>(kExitOk);
    });
}

int cmd_simulate_leakage(const SimulateOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto start = std::chrono::steady_clock::now();
        const SimResult r = run_leakage_study(options.config);
        const SimSummary& s = r.summary;
        out << "leaky=" << fmt(s.leaky_mean) << ", guarded=" << fmt(s.guarded_mean)
            << ", inflation=" << fmt(s.inflation.mean) << " CI=[" << fmt(s.inflation.lower) << ","
            << fmt(s.inflation.upper) << "]\n";
        out << "held-site guarded=" << fmt(s.guarded_site_mean) << ", inflation=" << fmt(s.site_inflation.mean)
            << " CI=[" << fmt(s.site_inflation.lower) << "," << fmt(s.site_inflation.upper) << "]\n";

        auto quantiles = [](std::vector<double> v) {
            ordered_json q;
            for (auto [name, p] : {std::pair{"min", 0.0}, {"q25", 0.25}, {"median", 0.5}, {"q75", 0.75}, {"max", 1.0}}) {
                q[name] = stats::quantile(v, p).value_or(std::nan(""));
            }
            return q;
        };
        if (options.distributions) {
            std::vector<double> leaky;
            std::vector<double> guarded_v;
            for (const SimRun& run : r.runs) {
                leaky.push_back(run.leaky_auc);
                guarded_v.push_back(run.guarded_auc);
            }
            const ordered_json ql = quantiles(leaky);
            const ordered_json qg = quantiles(guarded_v);
            out << "leaky   min/q25/median/q75/max: " << fmt(ql["min"]) << " " << fmt(ql["q25"]) << " "
                << fmt(ql["median"]) << " " << fmt(ql["q75"]) << " " << fmt(ql["max"]) << "\n";
            out << "guarded min/q25/median/q75/max: " << fmt(qg["min"]) << " " << fmt(qg["q25"]) << " "
                << fmt(qg["median"]) << " " << fmt(qg["q75"]) << " " << fmt(qg["max"]) << "\n";
        }

        if (!options.json_path.empty()) {
            const SimConfig& c = options.config;
            ordered_json doc;
            doc["schema_version"] = kResultsSchemaVersion;
            doc["version"] = kVersion;
            doc["config"] = {{"n_sims", c.n_sims},         {"n_sites", c.n_sites}, {"n_per_site", c.n_per_site},
                             {"offset_mean", c.offset_mean}, {"offset_sd", c.offset_sd}, {"signal", c.signal},
                             {"trees", c.trees},           {"seed", c.seed}};
            auto interval = [](const stats::TInterval& t) {
                return ordered_json{{"mean", t.mean}, {"sd", t.sd}, {"lower", t.lower}, {"upper", t.upper}, {"n", t.n}};
            };
            doc["summary"] = {{"leaky_mean", s.leaky_mean},
                              {"leaky_sd", s.leaky_sd},
                              {"guarded_mean", s.guarded_mean},
                              {"guarded_sd", s.guarded_sd},
                              {"inflation", interval(s.inflation)},
                              {"guarded_site_mean", s.guarded_site_mean},
                              {"guarded_site_sd", s.guarded_site_sd},
                              {"site_inflation", interval(s.site_inflation)}};
            if (options.distributions) {
                std::vector<double> leaky;
                std::vector<double> guarded_v;
                for (const SimRun& run : r.runs) {
                    leaky.push_back(run.leaky_auc);
                    guarded_v.push_back(run.guarded_auc);
                }
                doc["distributions"] = {{"leaky", quantiles(leaky)}, {"guarded", quantiles(guarded_v)}};
            }
            doc["wall_clock_seconds"] =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            write_file(options.json_path, doc.dump(2) + "\n");
        }
        if (!options.runs_csv.empty()) {
            std::string csv = "run,seed,leaky_auc,guarded_auc,guarded_site_auc\n";
            for (const SimRun& run : r.runs) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "%zu,%llu,%.17g,%.17g,%.17g\n", run.run + 1,
                              static_cast<unsigned long long>(run.seed), run.leaky_auc, run.guarded_auc,
                              run.guarded_site_auc);
                csv += buf;
            }
            write_file(options.runs_csv, csv);
        }
        return static_cast<int>(kExitOk);
    });
}

}  // namespace leakguard
