#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace leakguard {

enum class Severity { reject, warn };

/// Byte range [begin, end) into the expression source text.
struct SourceSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Rule ids:
///   R0 syntax error          R1 unknown identifier     R2 I/O-suggestive identifier
///   R3 embedded data (> 25 inline literals)            R4 pre-frozen aggregates
///   S1 selector names an absent column                 S2 outcome used in transform
///   S3 transform targets an outcome column             S4 role conflict
///   S5 selector matches no column (warn)
struct AuditFinding {
    Severity severity = Severity::reject;
    std::string rule;
    SourceSpan span;
    std::string message;
    /// Step position ("step 2") or empty for bare expressions.
    std::string where;
};

inline bool has_reject(const std::vector<AuditFinding>& findings) {
    for (const auto& f : findings) {
        if (f.severity == Severity::reject) return true;
    }
    return false;
}

}  // namespace leakguard
