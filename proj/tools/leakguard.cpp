// leakguard command-line front end.

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "leakguard/commands.hpp"
#include "leakguard/report.hpp"

int main(int argc, char** argv) {
    using namespace leakguard;
    CLI::App app{"Leakage-aware model evaluation"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    std::string config;
    RunOptions run_opts;
    std::size_t run_workers = 0;
    auto* run = app.add_subcommand("run", "Split, audit, tune with guarded resampling and evaluate the holdout");
    run->add_option("config", config, "Experiment config (JSON)")->required();
    run->add_option("--workers", run_workers, "Worker threads (overrides LEAKGUARD_WORKERS and the config)")
        ->check(CLI::PositiveNumber);
    run->add_option("--results", run_opts.results_path, "Results JSON path");
    run->add_option("--report", run_opts.report_path, "Text report path");

    auto* audit = app.add_subcommand("audit", "Audit the recipe without reading any data");
    audit->add_option("config", config, "Experiment config (JSON)")->required();

    std::string splits_out;
    auto* splits = app.add_subcommand("splits", "Print the resampling plan as JSON (1-based rows)");
    splits->add_option("config", config, "Experiment config (JSON)")->required();
    splits->add_option("--out", splits_out, "Write the plan here instead of stdout");

    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate-leakage", "Multi-site leakage Monte Carlo study");
    simulate->add_option("--n-sims", sim.config.n_sims, "Number of runs")->capture_default_str();
    simulate->add_option("--seed", sim.config.seed, "Master seed")->capture_default_str();
    simulate->add_option("--sites", sim.config.n_sites, "Sites per run")->capture_default_str();
    simulate->add_option("--per-site", sim.config.n_per_site, "Rows per site")->capture_default_str();
    simulate->add_option("--trees", sim.config.trees, "Trees per forest")->capture_default_str();
    simulate->add_option("--offset-mean", sim.config.offset_mean, "Mean of the site offsets")->capture_default_str();
    simulate->add_option("--offset-sd", sim.config.offset_sd, "SD of the site offsets")->capture_default_str();
    simulate->add_option("--signal", sim.config.signal, "Logit coefficient of the latent signal")->capture_default_str();
    std::size_t sim_workers = 0;
    simulate->add_option("--workers", sim_workers, "Concurrent runs")->check(CLI::PositiveNumber);
    simulate->add_option("--json", sim.json_path, "Summary JSON path");
    simulate->add_option("--runs-csv", sim.runs_csv, "Per-run CSV path");
    simulate->add_flag("--distributions", sim.distributions, "Also report per-arm AUC quantiles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    if (*run) {
        if (run_workers > 0) run_opts.workers = run_workers;
        return cmd_run(config, run_opts, std::cout, std::cerr);
    }
    if (*audit) return cmd_audit(config, std::cout, std::cerr);
    if (*splits) return cmd_splits(config, splits_out, std::cout, std::cerr);
    try {
        sim.config.workers = resolve_workers(sim_workers > 0 ? std::optional<std::size_t>(sim_workers) : std::nullopt, 1);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return cmd_simulate_leakage(sim, std::cout, std::cerr);
}
