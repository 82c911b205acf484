#pragma once

// Expression language for custom column transforms.
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')' | '-' factor
//   IDENT  := [A-Za-z_][A-Za-z0-9_.]*
//
// Elementwise builtins: log exp abs sqrt.
// Aggregate builtins:   mean sd median min max q25 q75 (one argument, no nesting).
//
// Aggregates are estimated by fit_expr on analysis rows and frozen; apply_expr
// substitutes the frozen values and never re-estimates anything.

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "leakguard/audit.hpp"
#include "leakguard/dataset.hpp"

namespace leakguard::dsl {

enum class NodeKind { number, column, negate, binary, call };
enum class BinaryOp { add, sub, mul, div };
enum class FunctionClass { elementwise, aggregate, unknown };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    NodeKind kind = NodeKind::number;
    SourceSpan span;
    double value = 0.0;            // number
    std::string name;              // column / call
    BinaryOp op = BinaryOp::add;   // binary
    std::vector<NodePtr> args;     // negate: 1, binary: 2, call: n
    int aggregate_id = -1;         // aggregate calls, numbered in evaluation order
};

FunctionClass classify_function(std::string_view name);

/// Validated expression: known functions only, aggregates not nested,
/// aggregate calls take exactly one argument.
class Expr {
public:
    const Node& root() const { return *root_; }
    const NodePtr& root_ptr() const { return root_; }
    const std::string& source() const { return source_; }
    int aggregate_count() const { return aggregate_count_; }
    /// Distinct column names in first-reference order.
    std::vector<std::string> columns() const;

private:
    friend Expr parse_expr(std::string_view text);
    NodePtr root_;
    std::string source_;
    int aggregate_count_ = 0;
};

/// Syntax-only parse; unknown functions are kept as call nodes. Throws ParseError.
NodePtr parse_syntax(std::string_view text);

/// Full parse. Throws ParseError for syntax errors, unknown functions and
/// nested aggregates.
Expr parse_expr(std::string_view text);

/// Canonical text form; parse_expr(print_expr(e)) reproduces e's structure.
std::string print_expr(const Node& node);
inline std::string print_expr(const Expr& expr) { return print_expr(expr.root()); }

/// Structural equality ignoring source spans.
bool same_structure(const Node& a, const Node& b);

struct FrozenAggregates {
    /// Indexed by Node::aggregate_id.
    std::vector<double> values;
};

FrozenAggregates fit_expr(const Expr& expr, const Dataset& analysis);

struct ApplyResult {
    std::vector<double> values;
    std::vector<std::string> warnings;
};

ApplyResult apply_expr(const Expr& expr, const FrozenAggregates& frozen, const Dataset& data);

struct AuditOptions {
    /// Identifiers that resolve to dataset columns.
    std::vector<std::string> columns;
    /// The expression arrived with aggregate values already filled in.
    bool has_prefrozen_aggregates = false;
};

/// Static rule scan over the expression AST. Never throws; syntax errors
/// become an R0 finding.
std::vector<AuditFinding> audit_expr(std::string_view text, const AuditOptions& options);

/// True if `identifier` looks like an I/O or environment access (rule R2).
bool is_io_identifier(std::string_view identifier);

inline constexpr std::size_t kMaxInlineLiterals = 25;

}  // namespace leakguard::dsl
