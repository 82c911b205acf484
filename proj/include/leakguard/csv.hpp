#pragma once

// RFC 4180 CSV ingestion into a typed Dataset.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "leakguard/dataset.hpp"

namespace leakguard {

struct CsvTable {
    std::vector<std::string> header;
    /// Missing cells ("" or NA) are nullopt.
    std::vector<std::vector<std::optional<std::string>>> rows;
};

/// Throws DataError on an empty input, duplicate headers, an unterminated
/// quote or a ragged row (the message names the physical line).
CsvTable parse_csv(std::string_view text);

/// A column is numeric when every non-missing cell parses as a decimal
/// number; otherwise categorical with first-appearance levels.
Dataset table_to_dataset(const CsvTable& table);

Dataset read_csv(const std::string& path);

}  // namespace leakguard
