#include <cmath>
#include <string>

#include "doctest.h"
#include "leakguard/csv.hpp"
#include "leakguard/dataset.hpp"
#include "leakguard/errors.hpp"
#include "leakguard/rng.hpp"

using namespace leakguard;

namespace {

Dataset small_survival() {
    return Dataset({numeric_column("time", {5, 3, 8, 2}), numeric_column("status", {1, 0, 1, 1}),
                    numeric_column("x", {0.1, 0.2, 0.3, 0.4}),
                    categorical_column("g", {std::string("a"), std::string("b"), std::string("a"), std::nullopt})});
}

OutcomeSpec surv_outcome() { return {TaskKind::survival, "", "time", "status"}; }

}  // namespace

TEST_CASE("validate_schema accepts a survival table and resolves roles") {
    auto d = validate_schema(small_survival(), surv_outcome());
    CHECK(d.column("time").role == Role::time);
    CHECK(d.column("status").role == Role::status);
    CHECK(d.column("x").role == Role::predictor);
}

TEST_CASE("validate_schema is idempotent") {
    auto once = validate_schema(small_survival(), surv_outcome());
    auto twice = validate_schema(once, surv_outcome());
    REQUIRE(once.n_cols() == twice.n_cols());
    for (std::size_t c = 0; c < once.n_cols(); ++c) {
        CHECK(once.columns()[c].name == twice.columns()[c].name);
        CHECK(once.columns()[c].role == twice.columns()[c].role);
    }
}

TEST_CASE("status outside 0/1 is rejected") {
    auto d = Dataset({numeric_column("time", {1, 2}), numeric_column("status", {1, 2})});
    CHECK_THROWS_WITH_AS(validate_schema(d, surv_outcome()), doctest::Contains("status must be 0/1"), DataError);
}

TEST_CASE("nonpositive event time is rejected") {
    auto d = Dataset({numeric_column("time", {0, 2}), numeric_column("status", {1, 1})});
    CHECK_THROWS_AS(validate_schema(d, surv_outcome()), DataError);
}

TEST_CASE("duplicate column names are rejected") {
    CHECK_THROWS_AS(Dataset({numeric_column("x", {1}), numeric_column("x", {2})}), DataError);
}

TEST_CASE("missing outcome column is rejected") {
    auto d = Dataset({numeric_column("x", {1, 2})});
    CHECK_THROWS_AS(validate_schema(d, {TaskKind::regression, "y", "", ""}), DataError);
}

TEST_CASE("classification needs a categorical outcome") {
    auto d = Dataset({numeric_column("x", {1, 2}), numeric_column("y", {0, 1})});
    CHECK_THROWS_AS(validate_schema(d, {TaskKind::classification, "y", "", ""}), DataError);
}

TEST_CASE("subset_rows identity, empty and reorder") {
    auto d = small_survival();
    std::vector<std::size_t> all{0, 1, 2, 3};
    auto same = d.subset_rows(all);
    CHECK(same.column("x").numeric == d.column("x").numeric);
    CHECK(same.column("g").codes == d.column("g").codes);

    auto empty = d.subset_rows(std::vector<std::size_t>{});
    CHECK(empty.n_rows() == 0);
    CHECK(empty.n_cols() == d.n_cols());
    CHECK(empty.column("g").levels == d.column("g").levels);

    auto picked = d.subset_rows(std::vector<std::size_t>{2, 0});
    CHECK(picked.column("x").numeric == std::vector<double>{0.3, 0.1});
}

TEST_CASE("subset_rows rejects out-of-range ids") {
    CHECK_THROWS_AS(small_survival().subset_rows(std::vector<std::size_t>{4}), DataError);
}

TEST_CASE("subset_rows composes and keeps level lists") {
    Rng rng(7);
    std::vector<std::optional<std::string>> labels;
    std::vector<double> v;
    for (int i = 0; i < 40; ++i) {
        labels.push_back(std::string(1, static_cast<char>('a' + rng.index(5))));
        v.push_back(rng.normal());
    }
    Dataset d({numeric_column("v", v), categorical_column("c", labels)});
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::size_t> a(1 + rng.index(30)), b(1 + rng.index(20));
        for (auto& i : a) i = rng.index(40);
        for (auto& j : b) j = rng.index(a.size());
        std::vector<std::size_t> ab;
        for (auto j : b) ab.push_back(a[j]);
        auto lhs = d.subset_rows(a).subset_rows(b);
        auto rhs = d.subset_rows(ab);
        CHECK(lhs.column("v").numeric == rhs.column("v").numeric);
        CHECK(lhs.column("c").codes == rhs.column("c").codes);
        CHECK(lhs.column("c").levels == d.column("c").levels);
    }
}

TEST_CASE("column_summary") {
    Dataset d({numeric_column("a", {1, 2, 3}), numeric_column("b", {1, NAN, 3}), numeric_column("c", {NAN, NAN, NAN})});
    auto a = column_summary(d, "a");
    CHECK(*a.mean == 2.0);
    CHECK(*a.median == 2.0);
    CHECK(*a.sd == 1.0);
    auto b = column_summary(d, "b");
    CHECK(*b.mean == 2.0);
    CHECK(b.missing == 1);
    auto c = column_summary(d, "c");
    CHECK_FALSE(c.mean.has_value());
    CHECK(c.missing == 3);
    CHECK_THROWS_AS(column_summary(d, "zz"), DataError);
}

TEST_CASE("categorical levels follow first appearance") {
    auto c = categorical_column("y", {std::string("Control"), std::string("Case"), std::string("Control")});
    CHECK(c.levels == std::vector<std::string>{"Control", "Case"});
    CHECK(c.codes == std::vector<std::int32_t>{0, 1, 0});
}

TEST_CASE("align_levels recodes to the reference order") {
    Dataset ref({categorical_column("g", {std::string("a"), std::string("b")})});
    Dataset other({categorical_column("g", {std::string("c"), std::string("b"), std::string("a")})});
    auto aligned = align_levels(ref, other);
    const auto& g = aligned.column("g");
    CHECK(g.levels == std::vector<std::string>{"a", "b", "c"});
    CHECK(g.codes == std::vector<std::int32_t>{2, 1, 0});
}

// ---------------------------------------------------------------- CSV

TEST_CASE("csv: numeric and categorical inference") {
    auto d = table_to_dataset(parse_csv("x,y\n1,a\n2,b\n"));
    CHECK(d.column("x").kind == ColumnKind::numeric);
    CHECK(d.column("y").kind == ColumnKind::categorical);
    CHECK(d.column("y").levels == std::vector<std::string>{"a", "b"});
}

TEST_CASE("csv: NA is missing") {
    auto d = table_to_dataset(parse_csv("x\n1\nNA\n"));
    CHECK(d.column("x").kind == ColumnKind::numeric);
    CHECK(std::isnan(d.column("x").numeric[1]));
    CHECK(column_summary(d, "x").missing == 1);
}

TEST_CASE("csv: ragged row names its line") {
    CHECK_THROWS_WITH_AS(parse_csv("x,y\n1,a\n2,b,c\n"), doctest::Contains("line 3"), DataError);
}

TEST_CASE("csv: quoting, CRLF and BOM") {
    auto t = parse_csv("\xEF\xBB\xBFname,v\r\n\"a, \"\"b\"\"\",1\r\n");
    REQUIRE(t.header == std::vector<std::string>{"name", "v"});
    REQUIRE(t.rows.size() == 1);
    CHECK(*t.rows[0][0] == "a, \"b\"");
}

TEST_CASE("csv: malformed inputs") {
    CHECK_THROWS_AS(parse_csv(""), DataError);
    CHECK_THROWS_AS(parse_csv("x,x\n1,2\n"), DataError);
    CHECK_THROWS_AS(parse_csv("x\n\"open\n"), DataError);
}
