// Command-line front end: loads a run config, applies overrides, dispatches
// to one of the experiment drivers and writes CSV outputs plus a manifest.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wrcm/experiments.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = "out";
    int threads = 0;
    bool seed_given = false;
    std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run-config file")->required();
    cmd->add_option("--set", args.overrides, "override a config key, e.g. --set run.k=1");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--threads", args.threads, "worker pool size (overrides run.threads)");
    cmd->add_option("--seed", args.seed, "master seed (overrides run.master_seed)")
        ->each([&args](const std::string&) { args.seed_given = true; });
}

wrcm::RunConfig load(const CommonArgs& args, const std::string& experiment) {
    std::ifstream in(args.config_path);
    if (!in) throw wrcm::ConfigError("cannot open config file " + args.config_path);
    wrcm::RunConfig config = wrcm::parse_config(in);
    for (const std::string& assignment : args.overrides)
        wrcm::apply_override(config, assignment);
    if (args.threads > 0) config.threads = args.threads;
    if (args.seed_given) config.master_seed = args.seed;
    if (!config.experiment.empty() && config.experiment != experiment)
        throw wrcm::ConfigError("config declares experiment '" + config.experiment +
                                "' but subcommand is '" + experiment + "'");
    config.validate();
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"weighted random connection model toolkit"};
    app.require_subcommand(1);

    CommonArgs solve_args, simulate_args, fig1_args, check_args, planted_args;
    CLI::App* solve = app.add_subcommand("solve", "solve the degree-k scaling equation");
    CLI::App* simulate = app.add_subcommand("simulate", "degree-k count replications + statistics");
    CLI::App* fig1 = app.add_subcommand("fig1", "isolated-node weight vs intensity experiment");
    CLI::App* check = app.add_subcommand("check", "evaluate assumptions A.1-A.3 along an s-grid");
    CLI::App* planted = app.add_subcommand("planted", "planted-point degree experiment");
    add_common(solve, solve_args);
    add_common(simulate, simulate_args);
    add_common(fig1, fig1_args);
    add_common(check, check_args);
    add_common(planted, planted_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) {
            const auto config = load(solve_args, "solve");
            const auto result = wrcm::run_solve(config, std::filesystem::path(solve_args.out_dir));
            for (const wrcm::SolveRow& row : result.rows) {
                if (row.ok)
                    std::printf("s=%g k=%d sigma_s=%.10g v_s=%.10g residual=%.3g evals=%zu\n",
                                row.s, row.k, row.solution.sigma_s, row.solution.v_s,
                                row.solution.residual, row.solution.n_evals);
                else
                    std::printf("s=%g k=%d error: %s\n", row.s, row.k, row.error.c_str());
            }
        } else if (simulate->parsed()) {
            const auto config = load(simulate_args, "simulate");
            const auto result =
                wrcm::run_simulate(config, std::filesystem::path(simulate_args.out_dir));
            for (const wrcm::IntensityResult& ir : result.intensities)
                std::printf(
                    "s=%g k=%d reps=%zu mean_D=%.4f dispersion=%.4f gof_p=%.4f subbox_p=%.4f\n",
                    ir.s, config.k, ir.replications.size(), ir.count_summary.mean,
                    ir.count_summary.dispersion, ir.poisson_report.p_value,
                    ir.subbox_report.min_p);
        } else if (fig1->parsed()) {
            const auto config = load(fig1_args, "fig1");
            const auto result = wrcm::run_fig1(config, std::filesystem::path(fig1_args.out_dir));
            std::printf("fitted slope %.4f (stderr %.4f), prediction %.4f\n", result.fit.slope,
                        result.fit.stderr_slope, -1.0 / config.rho);
            for (double s : result.dropped)
                std::printf("warning: intensity %g dropped (no isolated nodes)\n", s);
        } else if (check->parsed()) {
            const auto config = load(check_args, "check");
            const auto report = wrcm::run_check(config, std::filesystem::path(check_args.out_dir));
            std::printf("eta=%.4f K=%.4f  A.1 %s  A.2 %s  A.3 %s\n", report.eta, report.K,
                        report.pass_a1 ? "pass" : "fail", report.pass_a2 ? "pass" : "fail",
                        report.pass_a3 ? "pass" : "fail");
            for (const wrcm::AssumptionRow& row : report.rows)
                std::printf("s=%g sigma_s=%.6g A1=%.4g A2=%.4g A3=%.4g\n", row.s, row.sigma_s,
                            row.a1, row.a2, row.a3);
        } else if (planted->parsed()) {
            const auto config = load(planted_args, "planted");
            const auto result =
                wrcm::run_planted(config, std::filesystem::path(planted_args.out_dir));
            const auto deg = wrcm::summarize_counts(result.degrees);
            const auto out_deg = wrcm::summarize_counts(result.out_degrees);
            std::printf("degree: mc=%.5f target=%.5f | out-degree: mc=%.5f target=%.5f\n",
                        deg.mean, result.target_mean_degree, out_deg.mean,
                        result.target_mean_out_degree);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
