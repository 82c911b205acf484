#include <cmath>
#include <cstring>
#include <string>

#include "doctest.h"
#include "leakguard/errors.hpp"
#include "leakguard/rng.hpp"
#include "leakguard/transform_dsl.hpp"
#include "oracles.hpp"

using namespace leakguard;
using namespace leakguard::dsl;

namespace {

Dataset xs(std::vector<double> v) { return Dataset({numeric_column("x", std::move(v))}); }

bool has_rule(const std::vector<AuditFinding>& f, const std::string& rule) {
    for (const auto& x : f)
        if (x.rule == rule && x.severity == Severity::reject) return true;
    return false;
}

std::string random_expr(Rng& rng, int depth, bool allow_agg) {
    int pick = static_cast<int>(rng.index(depth <= 0 ? 2 : 7));
    switch (pick) {
        case 0: return std::to_string(static_cast<int>(rng.index(9)) + 1) + ".5";
        case 1: return rng.index(2) ? "x" : "y";
        case 2: return "-" + random_expr(rng, depth - 1, allow_agg);
        case 3: {
            const char* ops[] = {" + ", " - ", " * ", " / "};
            return "(" + random_expr(rng, depth - 1, allow_agg) + ops[rng.index(4)] +
                   random_expr(rng, depth - 1, allow_agg) + ")";
        }
        case 4: {
            const char* fns[] = {"log", "exp", "abs", "sqrt"};
            return std::string(fns[rng.index(4)]) + "(" + random_expr(rng, depth - 1, allow_agg) + ")";
        }
        default: {
            if (!allow_agg) return "x";
            const char* aggs[] = {"mean", "sd", "median", "min", "max", "q25", "q75"};
            return std::string(aggs[rng.index(7)]) + "(" + random_expr(rng, depth - 1, false) + ")";
        }
    }
}

}  // namespace

TEST_CASE("parse: standardization expression structure") {
    auto e = parse_expr("(x - mean(x)) / sd(x)");
    const Node& r = e.root();
    REQUIRE(r.kind == NodeKind::binary);
    CHECK(r.op == BinaryOp::div);
    const Node& num = *r.args[0];
    REQUIRE(num.kind == NodeKind::binary);
    CHECK(num.op == BinaryOp::sub);
    CHECK(num.args[0]->kind == NodeKind::column);
    CHECK(num.args[1]->kind == NodeKind::call);
    CHECK(num.args[1]->name == "mean");
    CHECK(r.args[1]->name == "sd");
    CHECK(e.aggregate_count() == 2);
    CHECK(e.columns() == std::vector<std::string>{"x"});
}

TEST_CASE("parse: precedence") {
    auto e = parse_expr("-x * 2 + 3");
    const Node& r = e.root();
    REQUIRE(r.op == BinaryOp::add);
    CHECK(r.args[0]->op == BinaryOp::mul);
    CHECK(r.args[0]->args[0]->kind == NodeKind::negate);
}

TEST_CASE("parse: syntax error position") {
    try {
        (void)parse_expr("x +");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.position() == 3);
    }
}

TEST_CASE("parse: nested aggregate and unknown function") {
    CHECK_THROWS_WITH_AS((void)parse_expr("mean(mean(x))"), doctest::Contains("nested aggregate"), ParseError);
    CHECK_THROWS_AS((void)parse_expr("frobnicate(x)"), ParseError);
}

TEST_CASE("parse/print/parse is a fixpoint") {
    Rng rng(11);
    for (int i = 0; i < 300; ++i) {
        std::string text = random_expr(rng, 4, true);
        auto a = parse_expr(text);
        auto printed = print_expr(a);
        auto b = parse_expr(printed);
        CHECK_MESSAGE(same_structure(a.root(), b.root()), text);
        CHECK(print_expr(b) == printed);
    }
}

TEST_CASE("fit_expr: mean, sd and quartiles") {
    auto m = fit_expr(parse_expr("mean(x)"), xs({1, 2, 3}));
    CHECK(m.values.at(0) == 2.0);
    auto s = fit_expr(parse_expr("sd(x)"), xs({1, 2, 3}));
    CHECK(s.values.at(0) == 1.0);
    auto q = fit_expr(parse_expr("q25(x)"), xs({1, 2, 3, 4}));
    CHECK(q.values.at(0) == doctest::Approx(oracle::type7({1, 2, 3, 4}, 0.25)).epsilon(1e-15));
    auto q75 = fit_expr(parse_expr("q75(x)"), xs({4, 1, 9, 2, 7}));
    CHECK(q75.values.at(0) == doctest::Approx(oracle::type7({4, 1, 9, 2, 7}, 0.75)).epsilon(1e-15));
}

TEST_CASE("fit_expr ignores missing values and rejects all-missing input") {
    auto m = fit_expr(parse_expr("mean(x)"), xs({1, NAN, 3}));
    CHECK(m.values.at(0) == 2.0);
    CHECK_THROWS_AS(fit_expr(parse_expr("mean(x)"), xs({NAN, NAN})), DataError);
}

TEST_CASE("apply_expr uses frozen aggregates") {
    auto e = parse_expr("(x - mean(x)) / sd(x)");
    auto frozen = fit_expr(e, xs({1, 2, 3}));
    auto on_new = apply_expr(e, frozen, xs({4}));
    CHECK(on_new.values == std::vector<double>{2.0});
    auto on_self = apply_expr(e, frozen, xs({1, 2, 3}));
    CHECK(on_self.values == std::vector<double>{-1.0, 0.0, 1.0});
}

TEST_CASE("apply_expr: zero sd gives missing output and a warning") {
    auto e = parse_expr("(x - mean(x)) / sd(x)");
    auto frozen = fit_expr(e, xs({5, 5, 5}));
    auto out = apply_expr(e, frozen, xs({1, 2}));
    CHECK(std::isnan(out.values[0]));
    CHECK(std::isnan(out.values[1]));
    CHECK_FALSE(out.warnings.empty());
}

TEST_CASE("apply_expr: log of nonpositive and missing propagation") {
    auto e = parse_expr("log(x)");
    auto out = apply_expr(e, fit_expr(e, xs({1})), xs({-1, NAN, std::exp(1.0)}));
    CHECK(std::isnan(out.values[0]));
    CHECK(std::isnan(out.values[1]));
    CHECK(out.values[2] == doctest::Approx(1.0));
    CHECK_FALSE(out.warnings.empty());
}

TEST_CASE("apply_expr is pure") {
    auto e = parse_expr("(x - median(x)) * q75(x) + exp(x / 10)");
    auto frozen = fit_expr(e, xs({0.3, 1.7, 2.2, 5.0}));
    auto data = xs({0.1, 0.7, 9.3, -2.0});
    auto a = apply_expr(e, frozen, data);
    auto b = apply_expr(e, frozen, data);
    REQUIRE(a.values.size() == b.values.size());
    CHECK(std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0);
}

TEST_CASE("fit_expr depends only on analysis rows") {
    auto e = parse_expr("(x - mean(x)) / sd(x)");
    Rng rng(3);
    std::vector<double> v(30);
    for (auto& x : v) x = rng.normal();
    Dataset full = xs(v);
    std::vector<std::size_t> analysis{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    auto base = fit_expr(e, full.subset_rows(analysis));
    for (std::size_t i = 10; i < 30; ++i) v[i] = 1e6 * rng.normal();
    auto again = fit_expr(e, xs(v).subset_rows(analysis));
    CHECK(base.values == again.values);
}

TEST_CASE("audit: clean standardization has no findings") {
    AuditOptions o;
    o.columns = {"x"};
    CHECK(audit_expr("(x - mean(x)) / sd(x)", o).empty());
}

TEST_CASE("audit: read_file triggers R1 and R2") {
    AuditOptions o;
    o.columns = {"x"};
    auto f = audit_expr("read_file(x)", o);
    CHECK(has_rule(f, "R1"));
    CHECK(has_rule(f, "R2"));
}

TEST_CASE("audit: unknown identifier is R1") {
    AuditOptions o;
    o.columns = {"x"};
    CHECK(has_rule(audit_expr("x + lookup_value", o), "R1"));
}

TEST_CASE("audit: every I/O token is flagged wherever it appears") {
    AuditOptions o;
    o.columns = {"x"};
    for (const char* token : {"read", "write", "load", "save", "open", "system", "download", "connect", "env",
                              "fetch"}) {
        CHECK(is_io_identifier(token));
        CHECK_MESSAGE(has_rule(audit_expr(std::string("x * ") + token, o), "R2"), token);
        CHECK_MESSAGE(has_rule(audit_expr(std::string("log(") + token + "(x) + 1)", o), "R2"), token);
    }
}

TEST_CASE("audit: whitespace cannot hide a finding") {
    AuditOptions o;
    o.columns = {"x"};
    CHECK(has_rule(audit_expr("  x\n+\t\tsystem ( x )", o), "R2"));
}

TEST_CASE("audit: more than 25 inline literals is R3") {
    AuditOptions o;
    o.columns = {"x"};
    std::string call = "max(";
    for (int i = 0; i < 26; ++i) call += (i ? "," : "") + std::to_string(i);
    call += ")";
    CHECK(has_rule(audit_expr(call, o), "R3"));
    std::string ok = "x";
    for (int i = 0; i < 25; ++i) ok += " + " + std::to_string(i);
    CHECK_FALSE(has_rule(audit_expr(ok, o), "R3"));
}

TEST_CASE("audit: pre-frozen aggregates are R4") {
    AuditOptions o;
    o.columns = {"x"};
    o.has_prefrozen_aggregates = true;
    CHECK(has_rule(audit_expr("x - mean(x)", o), "R4"));
}

TEST_CASE("audit: syntax errors become R0 and never throw") {
    AuditOptions o;
    CHECK(has_rule(audit_expr("x +", o), "R0"));
}
