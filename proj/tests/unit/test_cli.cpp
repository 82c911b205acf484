#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "leakguard/commands.hpp"
#include "leakguard/config.hpp"
#include "leakguard/errors.hpp"

using namespace leakguard;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const fs::path& cfg, RunOptions opts = {}) {
    std::ostringstream out, err;
    int code = cmd_run(cfg.string(), opts, out, err);
    return {code, out.str(), err.str()};
}

Run audit(const fs::path& cfg) {
    std::ostringstream out, err;
    int code = cmd_audit(cfg.string(), out, err);
    return {code, out.str(), err.str()};
}

Run splits(const fs::path& cfg) {
    std::ostringstream out, err;
    int code = cmd_splits(cfg.string(), "", out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("config: unknown keys and versions are rejected") {
    auto doc = fixtures::classification_config("train.csv");
    doc["extra"] = 1;
    CHECK_THROWS_AS(parse_config(doc), ConfigError);
    doc = fixtures::classification_config("train.csv");
    doc["schema_version"] = 2;
    CHECK_THROWS_AS(parse_config(doc), ConfigError);
    doc = fixtures::classification_config("train.csv");
    doc["models"][0]["params"]["bogus"] = 1;
    CHECK_THROWS_AS(parse_config(doc), ConfigError);
    doc = fixtures::classification_config("train.csv");
    doc["resampling"]["method"] = "nested_cv";
    CHECK_THROWS_AS(parse_config(doc), UnsupportedError);
}

TEST_CASE("config: relative paths resolve against the config directory") {
    auto cfg = parse_config(fixtures::classification_config("train.csv"), "/data/exp");
    CHECK(cfg.train_csv == "/data/exp/train.csv");
    CHECK(cfg.spec.seed == 7);
    CHECK(cfg.spec.models.size() == 2);
    CHECK(cfg.spec.bootstrap.samples == 60);
}

TEST_CASE("config: survival defaults to no resampling") {
    auto doc = ordered_json::parse(R"({"schema_version": 1, "task": "survival",
        "data": {"train_csv": "s.csv", "time": "t", "status": "d"},
        "models": [{"algorithm": "cox_ph"}]})");
    auto cfg = parse_config(doc);
    CHECK(cfg.spec.resampling.method == ResampleMethod::none);
    CHECK(cfg.spec.models[0].spec.id == "cox_ph");
    CHECK(cfg.spec.bootstrap.samples == 500);
    CHECK(cfg.spec.holdout == 0.2);
}

TEST_CASE("run: minimal classification config produces both tables") {
    auto dir = fixtures::scratch("cli_run");
    fixtures::write_text(dir / "train.csv", fixtures::classification_csv(150, 1));
    auto doc = fixtures::classification_config("train.csv");
    doc["output"] = {{"results_path", "results.json"}, {"report_path", "report.txt"}};
    fixtures::write_json(dir / "cfg.json", doc);
    auto r = run(dir / "cfg.json");
    CHECK_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("Table 1") != std::string::npos);
    CHECK(r.out.find("Table 2") != std::string::npos);
    auto results = ordered_json::parse(fixtures::read_text(dir / "results.json"));
    CHECK(results["schema_version"] == 1);
    CHECK(results.contains("config"));
    CHECK(results.contains("wall_clock_seconds"));
    CHECK(fixtures::read_text(dir / "report.txt") == r.out);
}

TEST_CASE("run: echoed config reproduces the results") {
    auto dir = fixtures::scratch("cli_echo");
    fixtures::write_text(dir / "train.csv", fixtures::classification_csv(120, 2));
    fixtures::write_json(dir / "cfg.json", fixtures::classification_config("train.csv"));
    RunOptions o;
    o.results_path = (dir / "a.json").string();
    REQUIRE(run(dir / "cfg.json", o).code == 0);
    auto first = ordered_json::parse(fixtures::read_text(dir / "a.json"));
    fixtures::write_json(dir / "echo.json", first["config"]);
    o.results_path = (dir / "b.json").string();
    auto r2 = run(dir / "echo.json", o);
    REQUIRE_MESSAGE(r2.code == 0, r2.err);
    auto second = ordered_json::parse(fixtures::read_text(dir / "b.json"));
    first.erase("wall_clock_seconds");
    second.erase("wall_clock_seconds");
    CHECK(first.dump() == second.dump());
}

TEST_CASE("run: full-analysis custom split exits 4") {
    auto dir = fixtures::scratch("cli_guard");
    fixtures::write_text(dir / "train.csv", fixtures::classification_csv(20, 3));
    fixtures::write_text(dir / "test.csv", fixtures::classification_csv(10, 4));
    auto doc = fixtures::classification_config("train.csv");
    doc["data"]["test_csv"] = "test.csv";
    ordered_json all = ordered_json::array();
    for (int i = 1; i <= 20; ++i) all.push_back(i);
    doc["resampling"] = {{"method", "custom"}, {"splits", {{{"analysis", all}, {"assessment", {1}}}}}};
    fixtures::write_json(dir / "cfg.json", doc);
    CHECK(run(dir / "cfg.json").code == kExitGuard);
}

TEST_CASE("run: read_file in a recipe exits 3 and prints findings") {
    auto dir = fixtures::scratch("cli_audit_run");
    fixtures::write_text(dir / "train.csv", fixtures::classification_csv(40, 5));
    auto doc = fixtures::classification_config("train.csv");
    doc["recipe"]["steps"].push_back({{"step", "custom_expr"}, {"target", "z"}, {"expr", "read_file(a)"}});
    fixtures::write_json(dir / "cfg.json", doc);
    auto r = run(dir / "cfg.json");
    CHECK(r.code == kExitAudit);
    CHECK(r.err.find("R2") != std::string::npos);
}

TEST_CASE("audit: clean, embedded table and unknown identifier") {
    auto dir = fixtures::scratch("cli_audit");
    // The data file does not exist; the audit must not need it.
    auto doc = fixtures::classification_config("missing.csv");
    fixtures::write_json(dir / "clean.json", doc);
    auto clean = audit(dir / "clean.json");
    CHECK(clean.code == 0);
    CHECK(ordered_json::parse(clean.out)["findings"].empty());

    auto big = doc;
    ordered_json values = ordered_json::array();
    for (int i = 0; i < 1000; ++i) values.push_back(i * 0.5);
    big["recipe"]["steps"].push_back(
        {{"step", "custom_expr"}, {"target", "z"}, {"expr", "a * 2"}, {"values", values}});
    fixtures::write_json(dir / "big.json", big);
    auto r3 = audit(dir / "big.json");
    CHECK(r3.code == kExitAudit);
    CHECK(r3.out.find("\"R3\"") != std::string::npos);

    auto unknown = doc;
    unknown["recipe"]["steps"].push_back({{"step", "custom_expr"}, {"target", "z"}, {"expr", "a + mystery"}});
    fixtures::write_json(dir / "unknown.json", unknown);
    auto r1 = audit(dir / "unknown.json");
    CHECK(r1.code == kExitAudit);
    CHECK(r1.out.find("\"R1\"") != std::string::npos);
}

TEST_CASE("splits: grouped, rolling and blocked designs") {
    auto dir = fixtures::scratch("cli_splits");
    fixtures::write_text(dir / "train.csv", fixtures::classification_csv(100, 6));
    fixtures::write_text(dir / "test.csv", fixtures::classification_csv(10, 7));

    auto grouped = fixtures::classification_config("train.csv");
    grouped["data"]["test_csv"] = "test.csv";
    grouped["resampling"] = {{"method", "grouped_cv"}, {"group", "clinic"}, {"folds", 10}};
    fixtures::write_json(dir / "grouped.json", grouped);
    auto g = splits(dir / "grouped.json");
    REQUIRE_MESSAGE(g.code == 0, g.err);
    auto gj = ordered_json::parse(g.out);
    CHECK(gj["splits"].size() == 10);
    CHECK(gj["group_violations"].empty());
    for (const auto& s : gj["splits"]) {
        std::set<int> clinics;
        for (int row : s["assessment"]) clinics.insert((row - 1) % 10);
        CHECK(clinics.size() == 1);
    }

    std::string ordered = "t,a,y\n";
    for (int i = 1; i <= 10; ++i) ordered += std::to_string(i) + "," + std::to_string(i * 0.1) + "," + (i % 2 ? "A" : "B") + "\n";
    fixtures::write_text(dir / "ordered.csv", ordered);
    fixtures::write_text(dir / "ordered_test.csv", "t,a,y\n11,0.3,A\n12,0.4,B\n");
    auto rolling = ordered_json::parse(R"({"schema_version": 1, "task": "classification",
        "data": {"train_csv": "ordered.csv", "test_csv": "ordered_test.csv", "label": "y"},
        "resampling": {"method": "rolling_origin", "order": "t", "initial_window": 5,
                       "assess_window": 2, "step": 2},
        "models": [{"algorithm": "logistic_reg"}]})");
    fixtures::write_json(dir / "rolling.json", rolling);
    auto r = splits(dir / "rolling.json");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto rj = ordered_json::parse(r.out);
    REQUIRE(rj["splits"].size() == 2);
    CHECK(rj["splits"][0]["analysis"] == ordered_json({1, 2, 3, 4, 5}));
    CHECK(rj["splits"][0]["assessment"] == ordered_json({6, 7}));
    CHECK(rj["splits"][1]["analysis"] == ordered_json({3, 4, 5, 6, 7}));
    CHECK(rj["splits"][1]["assessment"] == ordered_json({8, 9}));

    fixtures::write_text(dir / "gap.csv", "t,a,y\n1,0.1,A\nNA,0.2,B\n3,0.3,A\n4,0.4,B\n5,0.5,A\n6,0.6,B\n");
    auto blocked = ordered_json::parse(R"({"schema_version": 1, "task": "classification",
        "data": {"train_csv": "gap.csv", "test_csv": "ordered_test.csv", "label": "y"},
        "resampling": {"method": "blocked_cv", "order": "t", "folds": 3},
        "models": [{"algorithm": "logistic_reg"}]})");
    fixtures::write_json(dir / "blocked.json", blocked);
    CHECK(splits(dir / "blocked.json").code == kExitGuard);
}

TEST_CASE("simulate-leakage: two runs and a single site") {
    SimulateOptions o;
    o.config.n_sims = 2;
    o.config.n_sites = 3;
    o.config.n_per_site = 30;
    o.config.trees = 5;
    std::ostringstream out, err;
    CHECK(cmd_simulate_leakage(o, out, err) == 0);
    CHECK(out.str().find("inflation=") != std::string::npos);
    o.config.n_sites = 1;
    std::ostringstream out2, err2;
    CHECK(cmd_simulate_leakage(o, out2, err2) == kExitConfig);
}

TEST_CASE("exit codes are distinct") {
    CHECK(exit_code_for(AuditError("x")) == 3);
    CHECK(exit_code_for(GuardError("x")) == 4);
    CHECK(exit_code_for(ConfigError("x")) == 2);
    CHECK(exit_code_for(DataError("x")) == 2);
    CHECK(exit_code_for(UnsupportedError("x")) == 2);
    CHECK(exit_code_for(FitError("x")) == 1);
}

TEST_CASE("worker flag beats the environment and the config") {
    CHECK(resolve_workers(3, 1) == 3);
    CHECK_THROWS_AS(resolve_workers(0, 1), ConfigError);
}

TEST_CASE("executable reports usage errors as configuration errors") {
    auto dir = fixtures::scratch("cli_exe");
    CHECK(fixtures::run_cli("--version", dir / "log.txt") == 0);
    CHECK(fixtures::run_cli("frobnicate", dir / "log.txt") == 2);
    CHECK(fixtures::run_cli("audit " + (dir / "nope.json").string(), dir / "log.txt") == 2);
}
