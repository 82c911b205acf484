#pragma once

// Scratch files and CLI invocation shared by the unit and acceptance tests.

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "leakguard/rng.hpp"

namespace fixtures {

namespace fs = std::filesystem;

inline fs::path scratch(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("leakguard_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
}

inline std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Two numeric predictors, a clinic grouping column and a Control/Case label.
inline std::string classification_csv(std::size_t n, std::uint64_t seed) {
    leakguard::Rng rng(seed);
    std::string out = "a,b,clinic,y\n";
    for (std::size_t i = 0; i < n; ++i) {
        double a = rng.normal(), b = rng.normal();
        double p = 1.0 / (1.0 + std::exp(-(1.5 * a - b)));
        const char* y = i == 0 ? "Control" : (rng.uniform() < p ? "Case" : "Control");
        char line[128];
        std::snprintf(line, sizeof line, "%.6f,%.6f,C%zu,%s\n", a, b, i % 10, y);
        out += line;
    }
    return out;
}

/// Minimal valid classification config around `csv` (relative to the config).
inline nlohmann::ordered_json classification_config(const std::string& csv) {
    return nlohmann::ordered_json::parse(R"({
      "schema_version": 1,
      "task": "classification",
      "data": {"train_csv": ")" + csv + R"(", "label": "y",
               "columns": ["a", "b", "clinic", "y"]},
      "recipe": {"steps": [{"step": "role_update", "columns": ["clinic"], "role": "id"},
                            {"step": "normalize", "selector": "all_numeric_predictors"}]},
      "resampling": {"method": "cv", "folds": 5},
      "models": [{"id": "logit", "algorithm": "logistic_reg"},
                 {"id": "forest", "algorithm": "rand_forest", "params": {"trees": 25}}],
      "metrics": {"bootstrap": {"samples": 60}},
      "execution": {"seed": 7}
    })");
}

inline void write_json(const fs::path& path, const nlohmann::ordered_json& doc) { write_text(path, doc.dump(2)); }

/// Runs the CLI with `args`, returning its exit status; output goes to `log`.
inline int run_cli(const std::string& args, const fs::path& log) {
    std::string cmd = std::string("\"") + LEAKGUARD_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    int status = std::system(cmd.c_str());
    if (status == -1 || !WIFEXITED(status)) return -1;
    return WEXITSTATUS(status);
}

}  // namespace fixtures
