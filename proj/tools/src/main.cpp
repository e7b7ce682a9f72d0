#include "waterlab_tools/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace waterlab::tools;

    CLI::App app{"waterlab: water pipe flow control over a simulated wireless network"};
    app.require_subcommand(1);

    RunRequest run;
    std::uint64_t seed = 0;
    auto* run_cmd = app.add_subcommand("run", "Run a scenario and write timeseries.csv, anomalies.csv, summary.txt");
    run_cmd->add_option("scenario", run.scenario, "Scenario file")->required();
    auto* seed_opt = run_cmd->add_option("--seed", seed, "Override the scenario seed");
    run_cmd->add_option("--out", run.out_dir, "Output directory")->capture_default_str();
    run_cmd->add_option("--horizon", run.horizon, "Override sim.horizon (seconds)");
    run_cmd->add_option("--set", run.overrides, "Override any key, e.g. channel.drop_probability=0.3");
    run_cmd->add_option("--sweep", run.sweep, "Run one scenario per value, e.g. channel.drop_probability=0,0.1,0.2");
    run_cmd->add_option("--threads", run.threads, "Worker threads for sweeps (0: all cores)");

    auto* verify_cmd = app.add_subcommand("verify", "Run the analytic oracle checks");

    std::filesystem::path csv;
    double omega = 0.0;
    auto* fit_cmd = app.add_subcommand("fit-reference", "Fit the Fourier demand reference to a demand CSV");
    fit_cmd->add_option("csv", csv, "Demand CSV (t_seconds,demand_m3s)")->required();
    fit_cmd->add_option("--omega", omega, "Base angular frequency [rad/s]")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kValidationFailure;
    }

    if (run_cmd->parsed()) {
        if (*seed_opt) run.seed = seed;
        return cmd_run(run, std::cout, std::cerr);
    }
    if (verify_cmd->parsed()) return cmd_verify(std::cout);
    if (fit_cmd->parsed()) return cmd_fit_reference(csv, omega, std::cout, std::cerr);
    return kValidationFailure;
}
