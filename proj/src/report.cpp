#include "leakguard/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace leakguard {

using nlohmann::ordered_json;

namespace {

std::string fixed(double v, int digits) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string short_num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

const char* base_label(const std::string& name) {
    static const std::pair<const char*, const char*> labels[] = {
        {"accuracy", "Accuracy"},        {"f_meas", "F1 Score"},     {"kappa", "Kappa"},
        {"precision", "Precision"},      {"sens", "Sensitivity"},    {"spec", "Specificity"},
        {"roc_auc", "ROC AUC"},          {"logloss", "Logloss"},     {"brier", "Brier Score"},
        {"ece", "ECE"},                  {"rmse", "RMSE"},           {"mae", "MAE"},
        {"rsq", "R-squared"},            {"harrell_c", "Harrell C-index"},
        {"uno_c", "Uno's C-index"},      {"ibs", "Integrated Brier Score"},
        {"rmst_diff", "RMST diff"},
    };
    for (const auto& [k, v] : labels) {
        if (name == k) return v;
    }
    return nullptr;
}

int display_rank(const std::string& name) {
    static const char* order[] = {"accuracy", "f_meas", "kappa", "precision", "sens", "spec", "roc_auc",
                                  "logloss", "brier", "ece", "rmse", "mae", "rsq", "harrell_c", "uno_c",
                                  "ibs", "rmst_diff"};
    for (int i = 0; i < static_cast<int>(std::size(order)); ++i) {
        if (name == order[i]) return i;
    }
    return 100;
}

// Survival Brier scores go after the summary metrics.
std::vector<std::size_t> display_order(const std::vector<MetricValue>& metrics, TaskKind task) {
    std::vector<std::size_t> idx(metrics.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto rank = [&](std::size_t i) {
        if (task == TaskKind::survival && metrics[i].name == "brier") return 200;
        return display_rank(metrics[i].name);
    };
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return rank(a) < rank(b); });
    return idx;
}

std::string pad(const std::string& s, std::size_t width) {
    const std::size_t w = display_width(s);
    return w >= width ? s : s + std::string(width - w, ' ');
}

// Columns are left aligned and separated by two spaces.
std::string table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = display_width(header[c]);
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], display_width(r[c]));
    }
    std::size_t total = 0;
    for (std::size_t w : width) total += w + 2;
    const std::string rule(total > 0 ? total - 1 : 0, '-');
    auto line = [&](const std::vector<std::string>& cells) {
        std::string out;
        for (std::size_t c = 0; c < cells.size(); ++c) out += pad(cells[c], width[c]) + (c + 1 < cells.size() ? "  " : "");
        while (!out.empty() && out.back() == ' ') out.pop_back();
        return out + "\n";
    };
    std::string out = rule + "\n" + line(header) + rule + "\n";
    for (const auto& r : rows) out += line(r);
    out += rule + "\n";
    return out;
}

ordered_json number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

ordered_json metric_json(const MetricValue& m) {
    ordered_json j;
    j["metric"] = m.key();
    j["name"] = m.name;
    j["estimate"] = m.available ? number(m.estimate) : ordered_json(nullptr);
    j["available"] = m.available;
    j["direction"] = m.direction == Direction::maximize ? "maximize" : "minimize";
    if (m.at_time) j["at_time"] = *m.at_time;
    if (m.ci) {
        j["ci"] = {{"lower", number(m.ci->lower)},
                   {"upper", number(m.ci->upper)},
                   {"level", m.ci->level},
                   {"n_boot", m.ci->n_boot},
                   {"n_dropped", m.ci->n_dropped}};
    }
    return j;
}

ordered_json tuned_json(const std::vector<std::pair<std::string, double>>& tuned) {
    ordered_json j = ordered_json::object();
    for (const auto& [k, v] : tuned) j[k] = v;
    return j;
}

std::vector<std::pair<std::string, double>> tuned_for(const TuneResult& t, const FoldRecord& f) {
    for (const Candidate& c : t.candidates) {
        if (c.model == f.model && c.index == f.candidate) return c.tuned;
    }
    return {};
}

}  // namespace

std::string hex64(std::uint64_t value) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::size_t display_width(const std::string& text) {
    std::size_t w = 0;
    for (unsigned char c : text) {
        if ((c & 0xC0) != 0x80) ++w;
    }
    return w;
}

std::string metric_label(const MetricValue& metric) {
    const char* base = base_label(metric.name);
    std::string label = base ? base : metric.name;
    if (metric.at_time) {
        if (metric.name == "brier") return "Brier(t=" + short_num(*metric.at_time) + ")";
        if (metric.name == "rmst_diff") return label + " (t<=" + short_num(*metric.at_time) + ")";
    }
    return label;
}

std::string render_report(const EvaluationResult& result) {
    std::ostringstream out;
    out << "===== leakguard Model Summary =====\n";
    out << "Task: " << to_string(result.task) << "\n";
    out << "Number of Models Trained: " << result.holdout.size() << "\n";
    out << "Rows: " << result.n_train << " train, " << result.n_test << " test\n\n";

    MetricValue primary;
    primary.name = result.primary_metric;
    const std::string plabel = metric_label(primary);
    out << "-- Table 1: Model Selection (Cross-Validation) --\n";
    if (result.cv.empty()) {
        out << "Note: resampling method is none; no cross-validation was run.\n\n";
    } else {
        out << "Note: This table determines the best model.\n\n";
        std::vector<std::size_t> order(result.cv.size());
        std::iota(order.begin(), order.end(), 0);
        // Rank by the same rule as selection.
        std::vector<std::size_t> ranked;
        std::vector<CvSummary> rest = result.cv;
        std::vector<std::size_t> rest_idx = order;
        while (!rest.empty()) {
            const std::size_t b = select_best(rest, result.direction);
            ranked.push_back(rest_idx[b]);
            rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(b));
            rest_idx.erase(rest_idx.begin() + static_cast<std::ptrdiff_t>(b));
        }
        std::vector<std::vector<std::string>> rows;
        std::vector<std::string> partial;
        for (std::size_t i : ranked) {
            const CvSummary& s = result.cv[i];
            std::string id = s.model_id + (result.selected && *result.selected == i ? "†" : "");
            rows.push_back({id, result.holdout[s.model].algorithm, fixed(s.mean, 4), fixed(s.sd, 4)});
            if (s.n_defined < s.n_folds) {
                partial.push_back(s.model_id + ": mean over " + std::to_string(s.n_defined) + " of " +
                                  std::to_string(s.n_folds) + " folds where the metric is defined");
            }
        }
        out << table({"Model", "Algorithm", plabel + " (CV mean)", plabel + " (CV SD)"}, rows);
        if (result.selected) out << "† Selected based on mean " << plabel << " across CV folds\n";
        for (const auto& p : partial) out << "Note: " << p << "\n";
        out << "\n";
    }

    out << "-- Table 2: Final Evaluation (Test Set) --\n";
    out << "Note: For reporting only; selection was based on CV above.\n\n";
    if (!result.holdout.empty()) {
        const auto order = display_order(result.holdout.front().metrics, result.task);
        std::vector<std::string> header = {"Model", "Algorithm"};
        for (std::size_t k : order) header.push_back(metric_label(result.holdout.front().metrics[k]));
        std::vector<std::vector<std::string>> rows;
        for (const HoldoutResult& h : result.holdout) {
            std::vector<std::string> r = {h.model_id, h.algorithm};
            for (std::size_t k : order) r.push_back(h.metrics[k].available ? fixed(h.metrics[k].estimate, 3) : "n/a");
            rows.push_back(std::move(r));
        }
        out << table(header, rows);

        bool any_ci = false;
        for (const HoldoutResult& h : result.holdout) {
            for (const MetricValue& m : h.metrics) any_ci = any_ci || m.ci.has_value();
        }
        if (any_ci) {
            const MetricValue* first = nullptr;
            for (const HoldoutResult& h : result.holdout) {
                for (const MetricValue& m : h.metrics) {
                    if (!first && m.ci) first = &m;
                }
            }
            out << "\nBootstrap " << fixed(first->ci->level * 100.0, 0) << "% percentile intervals (B="
                << first->ci->n_boot << ")\n";
            std::vector<std::vector<std::string>> ci_rows;
            for (const HoldoutResult& h : result.holdout) {
                std::vector<std::string> r = {h.model_id, h.algorithm};
                for (std::size_t k : order) {
                    const MetricValue& m = h.metrics[k];
                    r.push_back(m.ci ? "[" + fixed(m.ci->lower, 3) + ", " + fixed(m.ci->upper, 3) + "]" : "NA");
                }
                ci_rows.push_back(std::move(r));
            }
            out << table(header, ci_rows);
        }
    }
    if (!result.warnings.empty()) {
        out << "\nWarnings:\n";
        for (const auto& w : result.warnings) out << "  " << w << "\n";
    }
    return out.str();
}

ordered_json findings_json(const std::vector<AuditFinding>& findings) {
    ordered_json arr = ordered_json::array();
    for (const AuditFinding& f : findings) {
        arr.push_back({{"severity", f.severity == Severity::reject ? "reject" : "warn"},
                       {"rule", f.rule},
                       {"where", f.where},
                       {"span", {f.span.begin, f.span.end}},
                       {"message", f.message}});
    }
    return arr;
}

ordered_json results_json(const EvaluationResult& r) {
    ordered_json j;
    j["task"] = to_string(r.task);
    j["primary_metric"] = r.primary_metric;
    j["direction"] = r.direction == Direction::maximize ? "maximize" : "minimize";
    j["audit"] = findings_json(r.audit);
    j["n_train"] = r.n_train;
    j["n_test"] = r.n_test;

    ordered_json splits = ordered_json::array();
    for (const ResampleSplit& s : r.splits) {
        splits.push_back({{"label", s.label}, {"n_analysis", s.analysis.size()}, {"n_assessment", s.assessment.size()}});
    }
    j["splits"] = {{"fingerprint", hex64(r.split_fingerprint)}, {"count", r.splits.size()}, {"plan", splits}};

    ordered_json folds = ordered_json::array();
    for (const FoldRecord& f : r.tuning.records) {
        ordered_json fj;
        fj["split"] = f.split;
        fj["model"] = f.model_id;
        fj["candidate"] = f.candidate;
        fj["params"] = tuned_json(tuned_for(r.tuning, f));
        fj["recipe_fingerprint"] = hex64(f.recipe_fingerprint);
        if (f.leaky) fj["tag"] = f.tag;
        ordered_json metrics = ordered_json::object();
        for (const MetricValue& m : f.metrics) metrics[m.key()] = m.available ? number(m.estimate) : ordered_json(nullptr);
        fj["metrics"] = metrics;
        if (!f.warnings.empty()) fj["warnings"] = f.warnings;
        folds.push_back(std::move(fj));
    }
    j["folds"] = folds;

    ordered_json candidates = ordered_json::array();
    for (const CvSummary& s : r.tuning.summaries) {
        candidates.push_back({{"model", s.model_id},
                              {"candidate", s.candidate},
                              {"params", tuned_json(s.tuned)},
                              {"mean", number(s.mean)},
                              {"sd", number(s.sd)},
                              {"n_defined", s.n_defined},
                              {"n_folds", s.n_folds}});
    }
    j["tuning"] = candidates;

    ordered_json cv = ordered_json::array();
    for (std::size_t i = 0; i < r.cv.size(); ++i) {
        const CvSummary& s = r.cv[i];
        cv.push_back({{"model", s.model_id},
                      {"mean", number(s.mean)},
                      {"sd", number(s.sd)},
                      {"n_defined", s.n_defined},
                      {"n_folds", s.n_folds},
                      {"selected", r.selected && *r.selected == i}});
    }
    j["cv_summary"] = cv;
    j["selected_model"] = r.selected ? ordered_json(r.cv[*r.selected].model_id) : ordered_json(nullptr);

    j["final_recipe_fingerprint"] = hex64(r.final_recipe_fingerprint);
    ordered_json holdout = ordered_json::array();
    for (const HoldoutResult& h : r.holdout) {
        ordered_json hj;
        hj["model"] = h.model_id;
        hj["algorithm"] = h.algorithm;
        ordered_json params = ordered_json::object();
        for (const auto& [k, v] : h.params) params[k] = number(v);
        hj["params"] = params;
        ordered_json metrics = ordered_json::array();
        for (const MetricValue& m : h.metrics) metrics.push_back(metric_json(m));
        hj["metrics"] = metrics;
        if (!h.warnings.empty()) hj["warnings"] = h.warnings;
        holdout.push_back(std::move(hj));
    }
    j["holdout"] = holdout;
    if (r.selected) {
        ordered_json best = ordered_json::object();
        const HoldoutResult& h = r.holdout[r.cv[*r.selected].model];
        for (const auto& [k, v] : h.params) best[k] = number(v);
        j["best_params"] = best;
    }
    j["warnings"] = r.warnings;
    return j;
}

}  // namespace leakguard
