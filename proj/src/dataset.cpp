#include "leakguard/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "leakguard/errors.hpp"
#include "leakguard/stats.hpp"

namespace leakguard {

std::string_view to_string(ColumnKind kind) {
    return kind == ColumnKind::numeric ? "numeric" : "categorical";
}

std::string_view to_string(Role role) {
    switch (role) {
        case Role::predictor: return "predictor";
        case Role::outcome: return "outcome";
        case Role::id: return "id";
        case Role::group: return "group";
        case Role::order: return "order";
        case Role::time: return "time";
        case Role::status: return "status";
    }
    return "predictor";
}

std::string_view to_string(TaskKind task) {
    switch (task) {
        case TaskKind::classification: return "classification";
        case TaskKind::regression: return "regression";
        case TaskKind::survival: return "survival";
    }
    return "classification";
}

Role parse_role(std::string_view text) {
    for (Role r : {Role::predictor, Role::outcome, Role::id, Role::group, Role::order, Role::time, Role::status}) {
        if (to_string(r) == text) return r;
    }
    throw ConfigError("unknown role '" + std::string(text) + "'");
}

TaskKind parse_task(std::string_view text) {
    for (TaskKind t : {TaskKind::classification, TaskKind::regression, TaskKind::survival}) {
        if (to_string(t) == text) return t;
    }
    throw ConfigError("unknown task '" + std::string(text) + "'");
}

bool Column::is_missing(std::size_t row) const {
    return kind == ColumnKind::numeric ? std::isnan(numeric[row]) : codes[row] == kMissingLevel;
}

const std::string& Column::label(std::size_t row) const {
    static const std::string empty;
    const std::int32_t code = codes[row];
    return code == kMissingLevel ? empty : levels[static_cast<std::size_t>(code)];
}

Column numeric_column(std::string name, std::vector<double> values, Role role) {
    Column c;
    c.name = std::move(name);
    c.kind = ColumnKind::numeric;
    c.role = role;
    c.numeric = std::move(values);
    return c;
}

Column categorical_column(std::string name, const std::vector<std::optional<std::string>>& values, Role role) {
    Column c;
    c.name = std::move(name);
    c.kind = ColumnKind::categorical;
    c.role = role;
    c.codes.reserve(values.size());
    std::unordered_map<std::string, std::int32_t> index;
    for (const auto& v : values) {
        if (!v) {
            c.codes.push_back(kMissingLevel);
            continue;
        }
        auto [it, inserted] = index.try_emplace(*v, static_cast<std::int32_t>(c.levels.size()));
        if (inserted) c.levels.push_back(*v);
        c.codes.push_back(it->second);
    }
    return c;
}

Column categorical_column(std::string name, std::vector<std::int32_t> codes, std::vector<std::string> levels,
                          Role role) {
    Column c;
    c.name = std::move(name);
    c.kind = ColumnKind::categorical;
    c.role = role;
    c.codes = std::move(codes);
    c.levels = std::move(levels);
    for (std::int32_t code : c.codes) {
        if (code != kMissingLevel && (code < 0 || static_cast<std::size_t>(code) >= c.levels.size())) {
            throw DataError("column '" + c.name + "' has a level code outside its level list");
        }
    }
    return c;
}

Dataset::Dataset(std::vector<Column> columns) : columns_(std::move(columns)) {
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        const Column& c = columns_[i];
        if (!seen.insert(c.name).second) throw DataError("duplicate column name '" + c.name + "'");
        if (i == 0) n_rows_ = c.size();
        if (c.size() != n_rows_) {
            throw DataError("column '" + c.name + "' has " + std::to_string(c.size()) + " rows, expected " +
                            std::to_string(n_rows_));
        }
        std::unordered_set<std::string> levels(c.levels.begin(), c.levels.end());
        if (levels.size() != c.levels.size()) throw DataError("column '" + c.name + "' has duplicate levels");
    }
}

const Column* Dataset::find(std::string_view name) const {
    for (const Column& c : columns_) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

const Column& Dataset::column(std::string_view name) const {
    const Column* c = find(name);
    if (!c) throw DataError("unknown column '" + std::string(name) + "'");
    return *c;
}

std::vector<std::string> Dataset::names() const {
    std::vector<std::string> out;
    for (const Column& c : columns_) out.push_back(c.name);
    return out;
}

std::vector<std::string> Dataset::names_with_role(Role role) const {
    std::vector<std::string> out;
    for (const Column& c : columns_) {
        if (c.role == role) out.push_back(c.name);
    }
    return out;
}

Schema Dataset::schema() const {
    Schema out;
    for (const Column& c : columns_) out.push_back({c.name, c.kind, c.role});
    return out;
}

Dataset Dataset::with_column(Column column) const {
    if (!columns_.empty() && column.size() != n_rows_) {
        throw DataError("column '" + column.name + "' length does not match dataset");
    }
    Dataset out = *this;
    for (Column& c : out.columns_) {
        if (c.name == column.name) {
            c = std::move(column);
            return out;
        }
    }
    if (out.columns_.empty()) out.n_rows_ = column.size();
    out.columns_.push_back(std::move(column));
    return out;
}

Dataset Dataset::without_column(std::string_view name) const {
    Dataset out = *this;
    std::erase_if(out.columns_, [&](const Column& c) { return c.name == name; });
    return out;
}

Dataset Dataset::with_role(std::string_view name, Role role) const {
    Dataset out = *this;
    for (Column& c : out.columns_) {
        if (c.name == name) {
            c.role = role;
            return out;
        }
    }
    throw DataError("unknown column '" + std::string(name) + "'");
}

Dataset Dataset::subset_rows(std::span<const std::size_t> ids) const {
    for (std::size_t id : ids) {
        if (id >= n_rows_) {
            throw DataError("row index " + std::to_string(id) + " out of range for " + std::to_string(n_rows_) +
                            " rows");
        }
    }
    Dataset out;
    out.n_rows_ = ids.size();
    out.applied_recipes_ = applied_recipes_;
    out.columns_.reserve(columns_.size());
    for (const Column& c : columns_) {
        Column s;
        s.name = c.name;
        s.kind = c.kind;
        s.role = c.role;
        s.levels = c.levels;
        if (c.kind == ColumnKind::numeric) {
            s.numeric.reserve(ids.size());
            for (std::size_t id : ids) s.numeric.push_back(c.numeric[id]);
        } else {
            s.codes.reserve(ids.size());
            for (std::size_t id : ids) s.codes.push_back(c.codes[id]);
        }
        out.columns_.push_back(std::move(s));
    }
    return out;
}

Dataset Dataset::with_applied_recipe(std::uint64_t fingerprint) const {
    Dataset out = *this;
    out.applied_recipes_.push_back(fingerprint);
    return out;
}

ColumnSummary column_summary(const Dataset& dataset, std::string_view name) {
    const Column& c = dataset.column(name);
    ColumnSummary s;
    s.n = c.size();
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (c.is_missing(i)) ++s.missing;
    }
    if (c.kind == ColumnKind::numeric) {
        s.mean = stats::mean(c.numeric);
        s.sd = stats::sd(c.numeric);
        s.median = stats::median(c.numeric);
    } else {
        std::vector<std::size_t> counts(c.levels.size(), 0);
        for (std::int32_t code : c.codes) {
            if (code != kMissingLevel) ++counts[static_cast<std::size_t>(code)];
        }
        for (std::size_t l = 0; l < c.levels.size(); ++l) s.level_counts.emplace_back(c.levels[l], counts[l]);
    }
    return s;
}

Dataset align_levels(const Dataset& reference, const Dataset& other) {
    std::vector<Column> columns = other.columns();
    for (Column& c : columns) {
        const Column* ref = reference.find(c.name);
        if (!ref || ref->kind != ColumnKind::categorical || c.kind != ColumnKind::categorical) continue;
        std::vector<std::string> levels = ref->levels;
        std::unordered_map<std::string, std::int32_t> index;
        for (std::size_t l = 0; l < levels.size(); ++l) index.emplace(levels[l], static_cast<std::int32_t>(l));
        std::vector<std::int32_t> remap(c.levels.size());
        for (std::size_t l = 0; l < c.levels.size(); ++l) {
            auto [it, inserted] = index.try_emplace(c.levels[l], static_cast<std::int32_t>(levels.size()));
            if (inserted) levels.push_back(c.levels[l]);
            remap[l] = it->second;
        }
        for (std::int32_t& code : c.codes) {
            if (code != kMissingLevel) code = remap[static_cast<std::size_t>(code)];
        }
        c.levels = std::move(levels);
    }
    Dataset out(std::move(columns));
    for (std::uint64_t fp : other.applied_recipes()) out = out.with_applied_recipe(fp);
    return out;
}

namespace {

void assign_role(std::vector<Column>& columns, const std::string& name, Role role, const char* what) {
    if (name.empty()) throw DataError(std::string("missing ") + what + " column name");
    for (Column& c : columns) {
        if (c.name == name) {
            c.role = role;
            return;
        }
    }
    throw DataError(std::string("missing ") + what + " column '" + name + "'");
}

}  // namespace

Dataset validate_schema(const Dataset& dataset, const OutcomeSpec& outcome) {
    if (dataset.n_cols() == 0 || dataset.n_rows() == 0) throw DataError("dataset is empty");
    std::vector<Column> columns = dataset.columns();

    // Response roles are owned by the outcome spec; stale ones are contradictions.
    auto reject_other = [&](Role role, const std::vector<std::string>& allowed) {
        for (const Column& c : columns) {
            if (c.role == role && std::find(allowed.begin(), allowed.end(), c.name) == allowed.end()) {
                throw DataError("column '" + c.name + "' has role " + std::string(to_string(role)) +
                                " but the outcome spec names a different column");
            }
        }
    };

    if (outcome.task == TaskKind::survival) {
        reject_other(Role::outcome, {});
        reject_other(Role::time, {outcome.time});
        reject_other(Role::status, {outcome.status});
        if (outcome.time == outcome.status) throw DataError("time and status must be different columns");
        assign_role(columns, outcome.time, Role::time, "time");
        assign_role(columns, outcome.status, Role::status, "status");
        const Column* time = nullptr;
        const Column* status = nullptr;
        for (const Column& c : columns) {
            if (c.name == outcome.time) time = &c;
            if (c.name == outcome.status) status = &c;
        }
        if (time->kind != ColumnKind::numeric) throw DataError("time column must be numeric");
        if (status->kind != ColumnKind::numeric) throw DataError("status must be 0/1 (numeric)");
        for (std::size_t i = 0; i < time->size(); ++i) {
            const double s = status->numeric[i];
            if (std::isnan(s) || (s != 0.0 && s != 1.0)) {
                throw DataError("status must be 0/1; row " + std::to_string(i + 1) + " has " +
                                (std::isnan(s) ? std::string("a missing value") : std::to_string(s)));
            }
            const double t = time->numeric[i];
            if (std::isnan(t)) throw DataError("time is missing at row " + std::to_string(i + 1));
            if (!(t > 0.0)) throw DataError("nonpositive time at row " + std::to_string(i + 1));
        }
    } else {
        reject_other(Role::outcome, {outcome.label});
        reject_other(Role::time, {});
        reject_other(Role::status, {});
        assign_role(columns, outcome.label, Role::outcome, "outcome");
        const Column* y = nullptr;
        for (const Column& c : columns) {
            if (c.name == outcome.label) y = &c;
        }
        if (outcome.task == TaskKind::classification && y->kind != ColumnKind::categorical) {
            throw DataError("classification requires a categorical outcome; '" + y->name + "' is numeric");
        }
        if (outcome.task == TaskKind::regression && y->kind != ColumnKind::numeric) {
            throw DataError("regression requires a numeric outcome; '" + y->name + "' is categorical");
        }
        for (std::size_t i = 0; i < y->size(); ++i) {
            if (y->is_missing(i)) throw DataError("outcome is missing at row " + std::to_string(i + 1));
        }
    }
    Dataset out(std::move(columns));
    for (std::uint64_t fp : dataset.applied_recipes()) out = out.with_applied_recipe(fp);
    return out;
}

}  // namespace leakguard
