#pragma once

// Resampling plans as plain index structures over dataset rows (0-based).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "leakguard/dataset.hpp"

namespace leakguard {

struct ResampleSplit {
    std::vector<std::size_t> analysis;
    std::vector<std::size_t> assessment;
    std::string label;
};

enum class ResampleMethod {
    cv,
    repeatedcv,
    boot,
    grouped_cv,
    blocked_cv,
    rolling_origin,
    validation_split,
    none,
    custom,
};

std::string_view to_string(ResampleMethod method);
/// Throws UnsupportedError for nested_cv, ConfigError for unknown names.
ResampleMethod parse_resample_method(std::string_view text);

struct CustomSplit {
    std::vector<std::size_t> analysis;
    std::vector<std::size_t> assessment;
};

struct ResamplingSpec {
    ResampleMethod method = ResampleMethod::cv;
    std::size_t folds = 5;
    std::size_t repeats = 1;
    std::size_t times = 25;        // boot
    std::string group;             // grouped_cv
    std::string order;             // blocked_cv, rolling_origin
    std::size_t initial_window = 0;
    std::size_t assess_window = 0;
    std::size_t step = 1;
    bool expanding = false;
    double prop = 0.75;            // validation_split: analysis share
    bool stratify = true;          // cv / repeatedcv / validation_split
    std::vector<CustomSplit> custom;
};

/// Stratum codes per row; empty means unstratified.
using Strata = std::vector<int>;

/// Splits `n` rows into a kept part and a holdout of about `fraction * n`
/// rows, stratum by stratum. Strata with fewer than 2 rows are pooled.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_partition(
    std::size_t n, double fraction, const Strata& strata, std::uint64_t seed, std::vector<std::string>* warnings = nullptr);

std::vector<ResampleSplit> make_vfold(std::size_t n, std::size_t folds, const Strata& strata, std::uint64_t seed,
                                      std::vector<std::string>* warnings = nullptr);
std::vector<ResampleSplit> make_repeated_vfold(std::size_t n, std::size_t folds, std::size_t repeats,
                                               const Strata& strata, std::uint64_t seed,
                                               std::vector<std::string>* warnings = nullptr);
std::vector<ResampleSplit> make_bootstrap(std::size_t n, std::size_t times, std::uint64_t seed);
std::vector<ResampleSplit> make_group_vfold(const std::vector<std::string>& groups, std::size_t v,
                                            std::uint64_t seed);
std::vector<ResampleSplit> make_blocked(const std::vector<double>& order, std::size_t n_blocks);
std::vector<ResampleSplit> make_rolling_origin(const std::vector<double>& order, std::size_t initial_window,
                                               std::size_t assess_window, std::size_t step, bool expanding);
std::vector<ResampleSplit> make_validation_split(std::size_t n, double prop, const Strata& strata,
                                                 std::uint64_t seed);
std::vector<ResampleSplit> make_custom(std::size_t n, const std::vector<CustomSplit>& custom);

/// Throws GuardError ("no holdout remains") when the analysis ids cover all
/// `n` rows or the assessment set is empty.
void check_full_analysis(const ResampleSplit& split, std::size_t n);

struct GroupViolation {
    std::string split;
    std::string group;
};

/// Every group that appears on both sides of the same split.
std::vector<GroupViolation> check_group_integrity(const std::vector<ResampleSplit>& splits,
                                                  const std::vector<std::string>& groups);

std::uint64_t split_fingerprint(const std::vector<ResampleSplit>& splits);

/// Row labels of a column, for grouping (numeric values printed with %.17g).
std::vector<std::string> group_labels(const Column& column);

/// Builds the plan named by `spec` from `data` and runs check_full_analysis
/// on every split.
std::vector<ResampleSplit> make_splits(const ResamplingSpec& spec, const Dataset& data, const Strata& strata,
                                       std::uint64_t seed, std::vector<std::string>* warnings = nullptr);

}  // namespace leakguard
