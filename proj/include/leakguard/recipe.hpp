#pragma once

// Declarative preprocessing with separate fit and apply phases. A fitted
// recipe holds only aggregate parameters estimated from its analysis rows.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "leakguard/audit.hpp"
#include "leakguard/dataset.hpp"
#include "leakguard/transform_dsl.hpp"

namespace leakguard {

enum class StepKind {
    impute_median,
    impute_mean,
    normalize,
    dummy_encode,
    zero_variance_filter,
    role_update,
    custom_expr,
};

enum class Selector {
    names,                  // explicit column list
    all_predictors,
    all_numeric_predictors,
    all_categorical_predictors,
};

std::string_view to_string(StepKind kind);
StepKind parse_step_kind(std::string_view text);
std::string_view to_string(Selector selector);
Selector parse_selector(std::string_view text);

struct StepSpec {
    StepKind kind = StepKind::normalize;
    Selector selector = Selector::names;
    std::vector<std::string> columns;  // Selector::names
    Role role = Role::predictor;       // role_update
    std::string target;                // custom_expr
    std::string expr;                  // custom_expr
    /// Inline numeric payload carried by the step. Never used for fitting;
    /// present only so the audit can see embedded data.
    std::vector<double> values;
    /// Aggregate values supplied with the step itself (custom_expr).
    std::vector<double> frozen;
};

struct RecipeSpec {
    std::vector<StepSpec> steps;
};

/// impute (median or mean), dummy_encode, zero_variance_filter, normalize.
RecipeSpec default_recipe(StepKind impute = StepKind::impute_median);

std::vector<AuditFinding> audit_recipe(const RecipeSpec& spec, const Schema& schema);

struct FittedStep {
    StepKind kind = StepKind::normalize;
    std::vector<std::string> columns;
    /// impute: fill value (numeric) per column; normalize: center.
    std::vector<double> center;
    /// normalize: scale.
    std::vector<double> scale;
    /// impute on categorical columns: fill label per column ("" for numeric).
    std::vector<std::string> fill_label;
    /// dummy_encode: full level list per column; level 0 is the reference.
    std::vector<std::vector<std::string>> levels;
    /// normalize / zero_variance_filter: columns removed at apply time.
    std::vector<std::string> dropped;
    Role role = Role::predictor;
    std::string target;
    std::optional<dsl::Expr> expr;
    dsl::FrozenAggregates frozen;
};

struct FittedRecipe {
    std::vector<FittedStep> steps;
    std::size_t source_rows = 0;
    std::vector<std::string> fit_warnings;
    /// FNV-1a hash over every frozen parameter.
    std::uint64_t fingerprint = 0;
};

/// Steps are fit sequentially: step k sees the analysis data after steps
/// 1..k-1 have been applied.
FittedRecipe fit_recipe(const RecipeSpec& spec, const Dataset& analysis);

/// Applies frozen parameters. Throws GuardError if this fitted recipe was
/// already applied to `data`; unseen categorical levels produce all-zero
/// indicators and a warning.
Dataset apply_recipe(const FittedRecipe& fitted, const Dataset& data, std::vector<std::string>* warnings = nullptr);

}  // namespace leakguard
