#include "leakguard/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include "leakguard/errors.hpp"
#include "leakguard/rng.hpp"

namespace leakguard {

namespace {

std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& ids) {
    std::vector<bool> in(n, false);
    for (std::size_t i : ids) in[i] = true;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (!in[i]) out.push_back(i);
    }
    return out;
}

// Rows grouped by stratum (first-appearance order of codes); tiny strata pooled.
std::vector<std::vector<std::size_t>> stratum_rows(std::size_t n, const Strata& strata, std::size_t min_size,
                                                   std::vector<std::string>* warnings) {
    if (strata.empty()) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        return {all};
    }
    if (strata.size() != n) throw DataError("strata length does not match row count");
    std::vector<int> order;
    std::map<int, std::vector<std::size_t>> by;
    for (std::size_t i = 0; i < n; ++i) {
        if (!by.count(strata[i])) order.push_back(strata[i]);
        by[strata[i]].push_back(i);
    }
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> pooled;
    for (int code : order) {
        auto& rows = by[code];
        if (rows.size() < min_size) {
            pooled.insert(pooled.end(), rows.begin(), rows.end());
        } else {
            out.push_back(rows);
        }
    }
    if (!pooled.empty()) {
        if (warnings) {
            warnings->push_back("stratum with fewer than " + std::to_string(min_size) +
                                " rows pooled for stratified sampling");
        }
        std::sort(pooled.begin(), pooled.end());
        out.push_back(pooled);
    }
    return out;
}

std::vector<ResampleSplit> vfold_once(std::size_t n, std::size_t folds, const Strata& strata, std::uint64_t seed,
                                      const std::string& prefix, std::vector<std::string>* warnings) {
    if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
    if (folds > n) {
        throw ConfigError("cannot make " + std::to_string(folds) + " folds from " + std::to_string(n) + " rows");
    }
    Rng rng(seed);
    std::vector<std::size_t> sequence;
    for (auto& rows : stratum_rows(n, strata, folds, warnings)) {
        rng.shuffle(rows);
        sequence.insert(sequence.end(), rows.begin(), rows.end());
    }
    std::vector<std::vector<std::size_t>> assess(folds);
    for (std::size_t pos = 0; pos < sequence.size(); ++pos) assess[pos % folds].push_back(sequence[pos]);
    std::vector<ResampleSplit> out;
    for (std::size_t f = 0; f < folds; ++f) {
        std::sort(assess[f].begin(), assess[f].end());
        out.push_back({complement(n, assess[f]), assess[f], prefix + "Fold" + std::to_string(f + 1)});
    }
    return out;
}

std::vector<std::size_t> sorted_by_order(const std::vector<double>& order, const char* design) {
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (std::isnan(order[i])) {
            throw GuardError(std::string(design) + " requires an ordering column without missing values (row " +
                             std::to_string(i + 1) + " is missing)");
        }
    }
    std::vector<std::size_t> idx(order.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return order[a] < order[b]; });
    return idx;
}

}  // namespace

std::string_view to_string(ResampleMethod method) {
    switch (method) {
        case ResampleMethod::cv: return "cv";
        case ResampleMethod::repeatedcv: return "repeatedcv";
        case ResampleMethod::boot: return "boot";
        case ResampleMethod::grouped_cv: return "grouped_cv";
        case ResampleMethod::blocked_cv: return "blocked_cv";
        case ResampleMethod::rolling_origin: return "rolling_origin";
        case ResampleMethod::validation_split: return "validation_split";
        case ResampleMethod::none: return "none";
        case ResampleMethod::custom: return "custom";
    }
    return "?";
}

ResampleMethod parse_resample_method(std::string_view text) {
    if (text == "nested_cv") throw UnsupportedError("resampling method nested_cv is not supported");
    for (ResampleMethod m : {ResampleMethod::cv, ResampleMethod::repeatedcv, ResampleMethod::boot,
                             ResampleMethod::grouped_cv, ResampleMethod::blocked_cv, ResampleMethod::rolling_origin,
                             ResampleMethod::validation_split, ResampleMethod::none, ResampleMethod::custom}) {
        if (to_string(m) == text) return m;
    }
    throw ConfigError("unknown resampling method '" + std::string(text) + "'");
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_partition(
    std::size_t n, double fraction, const Strata& strata, std::uint64_t seed, std::vector<std::string>* warnings) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("holdout fraction must lie strictly between 0 and 1");
    Rng rng(seed);
    std::vector<std::size_t> holdout;
    for (auto& rows : stratum_rows(n, strata, 2, warnings)) {
        rng.shuffle(rows);
        const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
        holdout.insert(holdout.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(holdout.begin(), holdout.end());
    if (holdout.empty() || holdout.size() == n) {
        throw ConfigError("holdout fraction " + std::to_string(fraction) + " leaves an empty side for " +
                          std::to_string(n) + " rows");
    }
    return {complement(n, holdout), holdout};
}

std::vector<ResampleSplit> make_vfold(std::size_t n, std::size_t folds, const Strata& strata, std::uint64_t seed,
                                      std::vector<std::string>* warnings) {
    return vfold_once(n, folds, strata, mix64({seed, 0}), "", warnings);
}

std::vector<ResampleSplit> make_repeated_vfold(std::size_t n, std::size_t folds, std::size_t repeats,
                                               const Strata& strata, std::uint64_t seed,
                                               std::vector<std::string>* warnings) {
    if (repeats < 1) throw ConfigError("repeats must be at least 1");
    std::vector<ResampleSplit> out;
    for (std::size_t r = 0; r < repeats; ++r) {
        auto part = vfold_once(n, folds, strata, mix64({seed, r}), "Rep" + std::to_string(r + 1) + ".",
                               r == 0 ? warnings : nullptr);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

std::vector<ResampleSplit> make_bootstrap(std::size_t n, std::size_t times, std::uint64_t seed) {
    if (times < 1) throw ConfigError("bootstrap needs times >= 1");
    if (n == 0) throw ConfigError("bootstrap needs at least one row");
    constexpr int kMaxAttempts = 100;
    std::vector<ResampleSplit> out;
    for (std::size_t b = 0; b < times; ++b) {
        bool done = false;
        for (int attempt = 0; attempt < kMaxAttempts && !done; ++attempt) {
            Rng rng(mix64({seed, b, static_cast<std::uint64_t>(attempt)}));
            std::vector<std::size_t> draw(n);
            for (auto& d : draw) d = rng.index(n);
            std::vector<std::size_t> oob = complement(n, draw);
            if (oob.empty()) continue;
            std::sort(draw.begin(), draw.end());
            out.push_back({std::move(draw), std::move(oob), "Boot" + std::to_string(b + 1)});
            done = true;
        }
        if (!done) {
            throw GuardError("bootstrap resample " + std::to_string(b + 1) + " has no out-of-bag rows after " +
                             std::to_string(kMaxAttempts) + " draws");
        }
    }
    return out;
}

std::vector<ResampleSplit> make_group_vfold(const std::vector<std::string>& groups, std::size_t v,
                                            std::uint64_t seed) {
    std::vector<std::string> distinct;
    std::map<std::string, std::size_t> index;
    for (const auto& g : groups) {
        if (index.emplace(g, distinct.size()).second) distinct.push_back(g);
    }
    if (v < 2) throw ConfigError("grouped cross-validation needs at least 2 folds");
    if (v > distinct.size()) {
        throw ConfigError("grouped cross-validation with " + std::to_string(v) + " folds needs at least " +
                          std::to_string(v) + " distinct groups; found " + std::to_string(distinct.size()));
    }
    std::vector<std::size_t> perm(distinct.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(mix64({seed, 0}));
    rng.shuffle(perm);
    std::vector<std::size_t> fold_of(distinct.size());
    for (std::size_t pos = 0; pos < perm.size(); ++pos) fold_of[perm[pos]] = pos % v;
    std::vector<std::vector<std::size_t>> assess(v);
    for (std::size_t i = 0; i < groups.size(); ++i) assess[fold_of[index[groups[i]]]].push_back(i);
    std::vector<ResampleSplit> out;
    for (std::size_t f = 0; f < v; ++f) {
        out.push_back({complement(groups.size(), assess[f]), assess[f], "Fold" + std::to_string(f + 1)});
    }
    return out;
}

std::vector<ResampleSplit> make_blocked(const std::vector<double>& order, std::size_t n_blocks) {
    const std::size_t n = order.size();
    if (n_blocks < 2) throw ConfigError("blocked cross-validation needs at least 2 blocks");
    if (n_blocks > n) throw ConfigError("more blocks than rows");
    const std::vector<std::size_t> idx = sorted_by_order(order, "blocked_cv");
    std::vector<ResampleSplit> out;
    std::size_t start = 0;
    for (std::size_t b = 0; b < n_blocks; ++b) {
        const std::size_t size = n / n_blocks + (b < n % n_blocks ? 1 : 0);
        std::vector<std::size_t> assess(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                        idx.begin() + static_cast<std::ptrdiff_t>(start + size));
        start += size;
        std::vector<std::size_t> sorted = assess;
        std::sort(sorted.begin(), sorted.end());
        out.push_back({complement(n, sorted), std::move(assess), "Block" + std::to_string(b + 1)});
    }
    return out;
}

std::vector<ResampleSplit> make_rolling_origin(const std::vector<double>& order, std::size_t initial_window,
                                               std::size_t assess_window, std::size_t step, bool expanding) {
    const std::size_t n = order.size();
    if (initial_window < 1 || assess_window < 1) {
        throw ConfigError("rolling_origin needs positive initial_window and assess_window");
    }
    if (step < 1) throw ConfigError("rolling_origin step must be at least 1");
    if (initial_window + assess_window > n) {
        throw ConfigError("rolling_origin windows (" + std::to_string(initial_window) + " + " +
                          std::to_string(assess_window) + ") exceed " + std::to_string(n) + " rows");
    }
    const std::vector<std::size_t> idx = sorted_by_order(order, "rolling_origin");
    std::vector<ResampleSplit> out;
    for (std::size_t s = 0; s * step + initial_window + assess_window <= n; ++s) {
        const std::size_t end = s * step + initial_window;
        const std::size_t begin = expanding ? 0 : s * step;
        if (order[idx[end - 1]] >= order[idx[end]]) {
            throw GuardError("rolling_origin slice " + std::to_string(s + 1) +
                             ": tied order values straddle the analysis/assessment boundary");
        }
        out.push_back({std::vector<std::size_t>(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                                idx.begin() + static_cast<std::ptrdiff_t>(end)),
                       std::vector<std::size_t>(idx.begin() + static_cast<std::ptrdiff_t>(end),
                                                idx.begin() + static_cast<std::ptrdiff_t>(end + assess_window)),
                       "Slice" + std::to_string(s + 1)});
    }
    return out;
}

std::vector<ResampleSplit> make_validation_split(std::size_t n, double prop, const Strata& strata,
                                                 std::uint64_t seed) {
    auto [keep, hold] = stratified_partition(n, 1.0 - prop, strata, mix64({seed, 0}));
    return {{std::move(keep), std::move(hold), "validation"}};
}

std::vector<ResampleSplit> make_custom(std::size_t n, const std::vector<CustomSplit>& custom) {
    if (custom.empty()) throw ConfigError("custom resampling lists no splits");
    std::vector<ResampleSplit> out;
    for (std::size_t s = 0; s < custom.size(); ++s) {
        const std::string label = "Custom" + std::to_string(s + 1);
        std::set<std::size_t> analysis;
        for (std::size_t i : custom[s].analysis) {
            if (i >= n) throw DataError(label + ": analysis row " + std::to_string(i + 1) + " out of range");
            analysis.insert(i);
        }
        for (std::size_t i : custom[s].assessment) {
            if (i >= n) throw DataError(label + ": assessment row " + std::to_string(i + 1) + " out of range");
            if (analysis.count(i)) {
                throw GuardError(label + ": row " + std::to_string(i + 1) + " is in both analysis and assessment");
            }
        }
        out.push_back({custom[s].analysis, custom[s].assessment, label});
    }
    return out;
}

void check_full_analysis(const ResampleSplit& split, std::size_t n) {
    std::vector<bool> seen(n, false);
    std::size_t distinct = 0;
    for (std::size_t i : split.analysis) {
        if (i < n && !seen[i]) {
            seen[i] = true;
            ++distinct;
        }
    }
    if (split.assessment.empty() || (n > 0 && distinct == n)) {
        throw GuardError("split " + split.label + ": analysis indices cover the full dataset; no holdout remains");
    }
}

std::vector<GroupViolation> check_group_integrity(const std::vector<ResampleSplit>& splits,
                                                  const std::vector<std::string>& groups) {
    std::vector<GroupViolation> out;
    for (const ResampleSplit& s : splits) {
        std::set<std::string> in_analysis;
        for (std::size_t i : s.analysis) in_analysis.insert(groups.at(i));
        std::set<std::string> reported;
        for (std::size_t i : s.assessment) {
            const std::string& g = groups.at(i);
            if (in_analysis.count(g) && reported.insert(g).second) out.push_back({s.label, g});
        }
    }
    return out;
}

std::uint64_t split_fingerprint(const std::vector<ResampleSplit>& splits) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    };
    for (const ResampleSplit& s : splits) {
        for (char c : s.label) mix(static_cast<unsigned char>(c));
        mix(s.analysis.size());
        for (std::size_t i : s.analysis) mix(i);
        mix(s.assessment.size());
        for (std::size_t i : s.assessment) mix(i);
    }
    return h;
}

std::vector<std::string> group_labels(const Column& column) {
    std::vector<std::string> out(column.size());
    for (std::size_t i = 0; i < column.size(); ++i) {
        if (column.is_missing(i)) {
            throw DataError("group column '" + column.name + "' is missing at row " + std::to_string(i + 1));
        }
        if (column.kind == ColumnKind::categorical) {
            out[i] = column.label(i);
        } else {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", column.numeric[i]);
            out[i] = buf;
        }
    }
    return out;
}

std::vector<ResampleSplit> make_splits(const ResamplingSpec& spec, const Dataset& data, const Strata& strata,
                                       std::uint64_t seed, std::vector<std::string>* warnings) {
    const std::size_t n = data.n_rows();
    const Strata none;
    const Strata& st = spec.stratify ? strata : none;
    auto order_values = [&]() {
        if (spec.order.empty()) {
            throw ConfigError(std::string(to_string(spec.method)) + " requires an order column");
        }
        const Column& c = data.column(spec.order);
        if (c.kind != ColumnKind::numeric) throw DataError("order column '" + spec.order + "' must be numeric");
        return c.numeric;
    };
    std::vector<ResampleSplit> splits;
    switch (spec.method) {
        case ResampleMethod::none: return {};
        case ResampleMethod::cv: splits = make_vfold(n, spec.folds, st, seed, warnings); break;
        case ResampleMethod::repeatedcv:
            splits = make_repeated_vfold(n, spec.folds, spec.repeats, st, seed, warnings);
            break;
        case ResampleMethod::boot: splits = make_bootstrap(n, spec.times, seed); break;
        case ResampleMethod::grouped_cv: {
            if (spec.group.empty()) throw ConfigError("grouped_cv requires a group column");
            splits = make_group_vfold(group_labels(data.column(spec.group)), spec.folds, seed);
            break;
        }
        case ResampleMethod::blocked_cv: splits = make_blocked(order_values(), spec.folds); break;
        case ResampleMethod::rolling_origin:
            splits = make_rolling_origin(order_values(), spec.initial_window, spec.assess_window, spec.step,
                                         spec.expanding);
            break;
        case ResampleMethod::validation_split: splits = make_validation_split(n, spec.prop, st, seed); break;
        case ResampleMethod::custom: splits = make_custom(n, spec.custom); break;
    }
    for (const ResampleSplit& s : splits) check_full_analysis(s, n);
    return splits;
}

}  // namespace leakguard
