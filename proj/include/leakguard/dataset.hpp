#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace leakguard {

enum class ColumnKind { numeric, categorical };
enum class Role { predictor, outcome, id, group, order, time, status };
enum class TaskKind { classification, regression, survival };

std::string_view to_string(ColumnKind kind);
std::string_view to_string(Role role);
std::string_view to_string(TaskKind task);
Role parse_role(std::string_view text);
TaskKind parse_task(std::string_view text);

/// Level index used for a missing categorical entry.
inline constexpr std::int32_t kMissingLevel = -1;

/// One named, typed column. Numeric columns use NaN for missing; categorical
/// columns store indices into `levels` (kMissingLevel for missing).
struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    Role role = Role::predictor;
    std::vector<double> numeric;
    std::vector<std::int32_t> codes;
    std::vector<std::string> levels;

    std::size_t size() const { return kind == ColumnKind::numeric ? numeric.size() : codes.size(); }
    bool is_missing(std::size_t row) const;
    /// Level label or "" for missing; categorical only.
    const std::string& label(std::size_t row) const;
};

Column numeric_column(std::string name, std::vector<double> values, Role role = Role::predictor);
/// Levels are assigned in first-appearance order; std::nullopt marks missing.
Column categorical_column(std::string name, const std::vector<std::optional<std::string>>& values,
                          Role role = Role::predictor);
Column categorical_column(std::string name, std::vector<std::int32_t> codes, std::vector<std::string> levels,
                          Role role = Role::predictor);

struct ColumnInfo {
    std::string name;
    std::optional<ColumnKind> kind;
    Role role = Role::predictor;
};

/// Column names, kinds and roles without row data; what the audit works on.
using Schema = std::vector<ColumnInfo>;

/// Immutable column table. All mutators return new datasets.
class Dataset {
public:
    Dataset() = default;
    /// Throws DataError on ragged columns, duplicate names or level lists
    /// with duplicates.
    explicit Dataset(std::vector<Column> columns);

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return columns_.size(); }
    const std::vector<Column>& columns() const { return columns_; }

    bool has(std::string_view name) const { return find(name) != nullptr; }
    const Column* find(std::string_view name) const;
    const Column& column(std::string_view name) const;
    std::vector<std::string> names() const;
    std::vector<std::string> names_with_role(Role role) const;
    Schema schema() const;

    Dataset with_column(Column column) const;
    Dataset without_column(std::string_view name) const;
    Dataset with_role(std::string_view name, Role role) const;

    /// Row projection in the requested order; keeps level lists intact.
    Dataset subset_rows(std::span<const std::size_t> ids) const;

    /// Fingerprints of fitted recipes already applied to this data.
    const std::vector<std::uint64_t>& applied_recipes() const { return applied_recipes_; }
    Dataset with_applied_recipe(std::uint64_t fingerprint) const;

private:
    std::vector<Column> columns_;
    std::size_t n_rows_ = 0;
    std::vector<std::uint64_t> applied_recipes_;
};

struct ColumnSummary {
    std::size_t n = 0;
    std::size_t missing = 0;
    std::optional<double> mean;
    std::optional<double> sd;
    std::optional<double> median;
    std::vector<std::pair<std::string, std::size_t>> level_counts;
};

ColumnSummary column_summary(const Dataset& dataset, std::string_view name);

/// Which columns carry the response for a task.
struct OutcomeSpec {
    TaskKind task = TaskKind::classification;
    std::string label;   // classification / regression
    std::string time;    // survival
    std::string status;  // survival
};

/// Recodes categorical columns of `other` to the level order of the
/// same-named columns in `reference`; levels unseen there are appended.
Dataset align_levels(const Dataset& reference, const Dataset& other);

/// Resolves outcome roles and checks them against the task. Idempotent.
Dataset validate_schema(const Dataset& dataset, const OutcomeSpec& outcome);

}  // namespace leakguard
