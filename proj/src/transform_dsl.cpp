#include "leakguard/transform_dsl.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include "leakguard/errors.hpp"
#include "leakguard/stats.hpp"

namespace leakguard::dsl {

namespace {

constexpr std::array<std::string_view, 4> kElementwise = {"log", "exp", "abs", "sqrt"};
constexpr std::array<std::string_view, 7> kAggregates = {"mean", "sd", "median", "min", "max", "q25", "q75"};
constexpr std::array<std::string_view, 10> kIoTokens = {"read", "write", "load", "save", "open",
                                                        "system", "download", "connect", "env", "fetch"};

enum class Tok { number, ident, plus, minus, star, slash, lparen, rparen, comma, end };

struct Token {
    Tok kind;
    std::size_t begin;
    std::size_t end;
    double number = 0.0;
};

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) {}

    Token next() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        const std::size_t start = pos_;
        if (pos_ >= text_.size()) return {Tok::end, start, start};
        const char c = text_[pos_];
        auto single = [&](Tok kind) {
            ++pos_;
            return Token{kind, start, pos_};
        };
        switch (c) {
            case '+': return single(Tok::plus);
            case '-': return single(Tok::minus);
            case '*': return single(Tok::star);
            case '/': return single(Tok::slash);
            case '(': return single(Tok::lparen);
            case ')': return single(Tok::rparen);
            case ',': return single(Tok::comma);
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number(start);
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (pos_ < text_.size()) {
                const char d = text_[pos_];
                if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '.') {
                    ++pos_;
                } else {
                    break;
                }
            }
            return {Tok::ident, start, pos_};
        }
        throw ParseError(std::string("unexpected character '") + c + "'", start);
    }

private:
    Token number(std::size_t start) {
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                ++pos_;
                ++n;
            }
            return n;
        };
        std::size_t n = digits();
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            n += digits();
        }
        if (n == 0) throw ParseError("malformed number", start);
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            const std::size_t save = pos_;
            ++pos_;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (digits() == 0) pos_ = save;
        }
        Token t{Tok::number, start, pos_};
        const char* first = text_.data() + start;
        const char* last = text_.data() + pos_;
        auto [ptr, ec] = std::from_chars(first, last, t.number);
        if (ec != std::errc() || ptr != last) throw ParseError("malformed number", start);
        return t;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text), lexer_(text) { advance(); }

    NodePtr parse() {
        NodePtr root = expr();
        if (tok_.kind != Tok::end) throw ParseError("unexpected trailing input", tok_.begin);
        return root;
    }

private:
    void advance() { tok_ = lexer_.next(); }

    NodePtr expr() {
        NodePtr left = term();
        while (tok_.kind == Tok::plus || tok_.kind == Tok::minus) {
            const BinaryOp op = tok_.kind == Tok::plus ? BinaryOp::add : BinaryOp::sub;
            advance();
            NodePtr right = term();
            left = binary(op, std::move(left), std::move(right));
        }
        return left;
    }

    NodePtr term() {
        NodePtr left = factor();
        while (tok_.kind == Tok::star || tok_.kind == Tok::slash) {
            const BinaryOp op = tok_.kind == Tok::star ? BinaryOp::mul : BinaryOp::div;
            advance();
            NodePtr right = factor();
            left = binary(op, std::move(left), std::move(right));
        }
        return left;
    }

    NodePtr factor() {
        const Token t = tok_;
        switch (t.kind) {
            case Tok::number: {
                advance();
                auto n = std::make_shared<Node>();
                n->kind = NodeKind::number;
                n->value = t.number;
                n->span = {t.begin, t.end};
                return n;
            }
            case Tok::minus: {
                advance();
                NodePtr operand = factor();
                auto n = std::make_shared<Node>();
                n->kind = NodeKind::negate;
                n->span = {t.begin, operand->span.end};
                n->args.push_back(std::move(operand));
                return n;
            }
            case Tok::lparen: {
                advance();
                NodePtr inner = expr();
                if (tok_.kind != Tok::rparen) throw ParseError("expected ')'", tok_.begin);
                advance();
                return inner;
            }
            case Tok::ident: {
                advance();
                auto n = std::make_shared<Node>();
                n->name = std::string(text_.substr(t.begin, t.end - t.begin));
                if (tok_.kind != Tok::lparen) {
                    n->kind = NodeKind::column;
                    n->span = {t.begin, t.end};
                    return n;
                }
                advance();
                n->kind = NodeKind::call;
                n->args.push_back(expr());
                while (tok_.kind == Tok::comma) {
                    advance();
                    n->args.push_back(expr());
                }
                if (tok_.kind != Tok::rparen) throw ParseError("expected ')' or ','", tok_.begin);
                n->span = {t.begin, tok_.end};
                advance();
                return n;
            }
            case Tok::end: throw ParseError("unexpected end of expression", t.begin);
            default: throw ParseError("unexpected token", t.begin);
        }
    }

    NodePtr binary(BinaryOp op, NodePtr left, NodePtr right) {
        auto n = std::make_shared<Node>();
        n->kind = NodeKind::binary;
        n->op = op;
        n->span = {left->span.begin, right->span.end};
        n->args.push_back(std::move(left));
        n->args.push_back(std::move(right));
        return n;
    }

    std::string_view text_;
    Lexer lexer_;
    Token tok_{Tok::end, 0, 0};
};

// Copies the tree, validating functions and numbering aggregates.
NodePtr validate(const Node& node, bool inside_aggregate, int& next_aggregate) {
    auto out = std::make_shared<Node>(node);
    if (node.kind == NodeKind::call) {
        const FunctionClass fc = classify_function(node.name);
        if (fc == FunctionClass::unknown) throw ParseError("unknown function '" + node.name + "'", node.span.begin);
        if (node.args.size() != 1) {
            throw ParseError("function '" + node.name + "' takes exactly one argument", node.span.begin);
        }
        if (fc == FunctionClass::aggregate) {
            if (inside_aggregate) throw ParseError("nested aggregate '" + node.name + "'", node.span.begin);
            out->aggregate_id = next_aggregate++;
            out->args = {validate(*node.args[0], true, next_aggregate)};
            return out;
        }
    }
    out->args.clear();
    for (const NodePtr& a : node.args) out->args.push_back(validate(*a, inside_aggregate, next_aggregate));
    return out;
}

int precedence(const Node& n) {
    if (n.kind == NodeKind::binary) return (n.op == BinaryOp::add || n.op == BinaryOp::sub) ? 1 : 2;
    if (n.kind == NodeKind::negate) return 3;
    return 4;
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s(buf);
    // Shortest representation that round-trips.
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) {
            s = buf;
            break;
        }
    }
    return s;
}

struct Evaluator {
    const Dataset& data;
    const FrozenAggregates* frozen;  // null while fitting
    std::size_t div_zero = 0;
    std::size_t log_domain = 0;
    std::size_t sqrt_domain = 0;

    std::vector<double> eval(const Node& n) {
        const std::size_t rows = data.n_rows();
        switch (n.kind) {
            case NodeKind::number: return std::vector<double>(rows, n.value);
            case NodeKind::column: {
                const Column& c = data.column(n.name);
                if (c.kind != ColumnKind::numeric) {
                    throw DataError("expression references categorical column '" + n.name + "'");
                }
                return c.numeric;
            }
            case NodeKind::negate: {
                std::vector<double> v = eval(*n.args[0]);
                for (double& x : v) x = -x;
                return v;
            }
            case NodeKind::binary: {
                std::vector<double> a = eval(*n.args[0]);
                const std::vector<double> b = eval(*n.args[1]);
                for (std::size_t i = 0; i < rows; ++i) {
                    switch (n.op) {
                        case BinaryOp::add: a[i] += b[i]; break;
                        case BinaryOp::sub: a[i] -= b[i]; break;
                        case BinaryOp::mul: a[i] *= b[i]; break;
                        case BinaryOp::div:
                            if (b[i] == 0.0 && !std::isnan(a[i])) {
                                ++div_zero;
                                a[i] = std::numeric_limits<double>::quiet_NaN();
                            } else {
                                a[i] /= b[i];
                            }
                            break;
                    }
                }
                return a;
            }
            case NodeKind::call: break;
        }
        if (n.aggregate_id >= 0) {
            if (frozen) return std::vector<double>(rows, frozen->values.at(static_cast<std::size_t>(n.aggregate_id)));
            throw Error("internal: aggregate evaluated without frozen values");
        }
        std::vector<double> v = eval(*n.args[0]);
        for (double& x : v) {
            if (std::isnan(x)) continue;
            if (n.name == "log") {
                if (x <= 0.0) {
                    ++log_domain;
                    x = std::numeric_limits<double>::quiet_NaN();
                } else {
                    x = std::log(x);
                }
            } else if (n.name == "exp") {
                x = std::exp(x);
            } else if (n.name == "abs") {
                x = std::abs(x);
            } else if (n.name == "sqrt") {
                if (x < 0.0) {
                    ++sqrt_domain;
                    x = std::numeric_limits<double>::quiet_NaN();
                } else {
                    x = std::sqrt(x);
                }
            }
        }
        return v;
    }
};

double aggregate(std::string_view name, const std::vector<double>& values) {
    std::optional<double> r;
    if (name == "mean") r = stats::mean(values);
    else if (name == "sd") r = stats::sd(values);
    else if (name == "median") r = stats::median(values);
    else if (name == "min") r = stats::min(values);
    else if (name == "max") r = stats::max(values);
    else if (name == "q25") r = stats::quantile(values, 0.25);
    else if (name == "q75") r = stats::quantile(values, 0.75);
    if (!r) throw DataError("aggregate " + std::string(name) + "() has no non-missing values to estimate from");
    return *r;
}

void collect_aggregates(const Node& n, std::vector<const Node*>& out) {
    if (n.aggregate_id >= 0) {
        out.push_back(&n);
        return;
    }
    for (const NodePtr& a : n.args) collect_aggregates(*a, out);
}

void collect_columns(const Node& n, std::vector<std::string>& out) {
    if (n.kind == NodeKind::column && std::find(out.begin(), out.end(), n.name) == out.end()) out.push_back(n.name);
    for (const NodePtr& a : n.args) collect_columns(*a, out);
}

bool is_literal(const Node& n) {
    return n.kind == NodeKind::number || (n.kind == NodeKind::negate && n.args[0]->kind == NodeKind::number);
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

FunctionClass classify_function(std::string_view name) {
    if (std::find(kElementwise.begin(), kElementwise.end(), name) != kElementwise.end()) {
        return FunctionClass::elementwise;
    }
    if (std::find(kAggregates.begin(), kAggregates.end(), name) != kAggregates.end()) {
        return FunctionClass::aggregate;
    }
    return FunctionClass::unknown;
}

std::vector<std::string> Expr::columns() const {
    std::vector<std::string> out;
    collect_columns(*root_, out);
    return out;
}

NodePtr parse_syntax(std::string_view text) { return Parser(text).parse(); }

Expr parse_expr(std::string_view text) {
    NodePtr raw = parse_syntax(text);
    Expr e;
    int next = 0;
    e.root_ = validate(*raw, false, next);
    e.aggregate_count_ = next;
    e.source_ = std::string(text);
    return e;
}

std::string print_expr(const Node& n) {
    switch (n.kind) {
        case NodeKind::number: return format_number(n.value);
        case NodeKind::column: return n.name;
        case NodeKind::negate: {
            const Node& a = *n.args[0];
            const std::string inner = print_expr(a);
            return precedence(a) < 3 ? "-(" + inner + ")" : "-" + inner;
        }
        case NodeKind::binary: {
            const Node& l = *n.args[0];
            const Node& r = *n.args[1];
            const int p = precedence(n);
            std::string ls = print_expr(l);
            std::string rs = print_expr(r);
            if (precedence(l) < p) ls = "(" + ls + ")";
            if (precedence(r) <= p) rs = "(" + rs + ")";
            static constexpr std::array<const char*, 4> ops = {" + ", " - ", " * ", " / "};
            return ls + ops[static_cast<std::size_t>(n.op)] + rs;
        }
        case NodeKind::call: {
            std::string s = n.name + "(";
            for (std::size_t i = 0; i < n.args.size(); ++i) {
                if (i) s += ", ";
                s += print_expr(*n.args[i]);
            }
            return s + ")";
        }
    }
    return {};
}

bool same_structure(const Node& a, const Node& b) {
    if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
    switch (a.kind) {
        case NodeKind::number:
            if (a.value != b.value) return false;
            break;
        case NodeKind::column:
        case NodeKind::call:
            if (a.name != b.name) return false;
            break;
        case NodeKind::binary:
            if (a.op != b.op) return false;
            break;
        case NodeKind::negate: break;
    }
    for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (!same_structure(*a.args[i], *b.args[i])) return false;
    }
    return true;
}

FrozenAggregates fit_expr(const Expr& expr, const Dataset& analysis) {
    for (const std::string& name : expr.columns()) {
        const Column& c = analysis.column(name);
        if (c.kind != ColumnKind::numeric) throw DataError("expression references categorical column '" + name + "'");
    }
    std::vector<const Node*> aggs;
    collect_aggregates(expr.root(), aggs);
    FrozenAggregates frozen;
    frozen.values.assign(static_cast<std::size_t>(expr.aggregate_count()), 0.0);
    Evaluator ev{analysis, nullptr};
    for (const Node* agg : aggs) {
        const std::vector<double> inner = ev.eval(*agg->args[0]);
        frozen.values[static_cast<std::size_t>(agg->aggregate_id)] = aggregate(agg->name, inner);
    }
    return frozen;
}

ApplyResult apply_expr(const Expr& expr, const FrozenAggregates& frozen, const Dataset& data) {
    if (frozen.values.size() != static_cast<std::size_t>(expr.aggregate_count())) {
        throw DataError("frozen aggregates do not match the expression");
    }
    Evaluator ev{data, &frozen};
    ApplyResult out;
    out.values = ev.eval(expr.root());
    if (ev.div_zero) {
        out.warnings.push_back("division by zero in '" + expr.source() + "' on " + std::to_string(ev.div_zero) +
                               " row(s); result set to missing");
    }
    if (ev.log_domain) {
        out.warnings.push_back("log of nonpositive value in '" + expr.source() + "' on " +
                               std::to_string(ev.log_domain) + " row(s); result set to missing");
    }
    if (ev.sqrt_domain) {
        out.warnings.push_back("sqrt of negative value in '" + expr.source() + "' on " +
                               std::to_string(ev.sqrt_domain) + " row(s); result set to missing");
    }
    return out;
}

bool is_io_identifier(std::string_view identifier) {
    const std::string id = lower(identifier);
    std::size_t start = 0;
    while (start <= id.size()) {
        std::size_t stop = id.find_first_of("_.", start);
        if (stop == std::string::npos) stop = id.size();
        const std::string_view part(id.data() + start, stop - start);
        if (!part.empty()) {
            for (std::string_view token : kIoTokens) {
                if (part.starts_with(token) || part.ends_with(token)) return true;
            }
        }
        start = stop + 1;
    }
    return false;
}

std::vector<AuditFinding> audit_expr(std::string_view text, const AuditOptions& options) {
    std::vector<AuditFinding> findings;
    NodePtr root;
    try {
        root = parse_syntax(text);
    } catch (const ParseError& e) {
        findings.push_back({Severity::reject, "R0", {e.position(), e.position()}, e.what(), {}});
        return findings;
    }

    auto is_column = [&](const std::string& name) {
        return std::find(options.columns.begin(), options.columns.end(), name) != options.columns.end();
    };

    std::function<void(const Node&, bool)> walk = [&](const Node& n, bool inside_aggregate) {
        if (n.kind == NodeKind::column) {
            if (!is_column(n.name)) {
                findings.push_back({Severity::reject, "R1", n.span,
                                    "unknown identifier '" + n.name + "' (not a dataset column)", {}});
            }
            if (is_io_identifier(n.name)) {
                findings.push_back({Severity::reject, "R2", n.span,
                                    "identifier '" + n.name + "' suggests file, network or environment access", {}});
            }
        }
        bool aggregate_here = false;
        if (n.kind == NodeKind::call) {
            const FunctionClass fc = classify_function(n.name);
            if (fc == FunctionClass::unknown) {
                findings.push_back({Severity::reject, "R1", n.span, "unknown function '" + n.name + "'", {}});
            } else if (n.args.size() != 1) {
                findings.push_back({Severity::reject, "R0", n.span,
                                    "function '" + n.name + "' takes exactly one argument", {}});
            }
            if (is_io_identifier(n.name)) {
                findings.push_back({Severity::reject, "R2", n.span,
                                    "function '" + n.name + "' suggests file, network or environment access", {}});
            }
            if (fc == FunctionClass::aggregate) {
                if (inside_aggregate) {
                    findings.push_back({Severity::reject, "R0", n.span, "nested aggregate '" + n.name + "'", {}});
                }
                aggregate_here = true;
            }
            const auto literals = static_cast<std::size_t>(
                std::count_if(n.args.begin(), n.args.end(), [](const NodePtr& a) { return is_literal(*a); }));
            if (literals > kMaxInlineLiterals) {
                findings.push_back({Severity::reject, "R3", n.span,
                                    "call '" + n.name + "' embeds " + std::to_string(literals) +
                                        " inline values (limit " + std::to_string(kMaxInlineLiterals) +
                                        "); external data must not be embedded in a transform",
                                    {}});
            }
        }
        for (const NodePtr& a : n.args) walk(*a, inside_aggregate || aggregate_here);
    };
    walk(*root, false);

    if (options.has_prefrozen_aggregates) {
        findings.push_back({Severity::reject, "R4", root->span,
                            "expression carries pre-frozen aggregate values; aggregates must be estimated "
                            "inside each resample",
                            {}});
    }
    return findings;
}

}  // namespace leakguard::dsl
