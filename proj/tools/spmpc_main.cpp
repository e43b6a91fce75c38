#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spmpc/cli.hpp"
#include "spmpc/errors.hpp"

using namespace spmpc;

int main(int argc, char** argv) {
    CLI::App app{"Resource-constrained intervention for networked spreading "
                 "processes: validation, simulation, closed-loop control and "
                 "scenario tooling"};
    app.require_subcommand(1);

    CliOptions opt;
    std::string config, out = ".";
    app.add_option("--config", config, "JSON config overriding defaults");
    app.add_option("--out", out, "output directory");
    app.add_option("--seed", opt.seed, "random seed for outbreak draws");
    app.add_option("--tol-feas", opt.tol_feas, "solver feasibility tolerance");
    app.add_option("--tol-opt", opt.tol_opt, "solver stationarity tolerance");
    app.add_option("--tail-tol", opt.tail_tol, "risk truncation tolerance");

    std::string network_path, state_path, scenario_path, landscape_path;
    int steps = 100;
    double gamma_bar = -1.0;
    int horizon = -1;
    std::vector<double> budgets{10.0, 20.0, 30.0};
    int demo_rows = 0, demo_cols = 0;

    auto* validate =
        app.add_subcommand("validate", "check a network instance file");
    validate->add_option("network", network_path)->required();

    auto* simulate =
        app.add_subcommand("simulate", "uncontrolled trajectory and risk");
    simulate->add_option("network", network_path)->required();
    simulate->add_option("state", state_path)->required();
    simulate->add_option("--steps", steps, "number of plant steps");

    auto* mpc = app.add_subcommand("mpc", "closed-loop run on a scenario");
    mpc->add_option("scenario", scenario_path)->required();
    mpc->add_option("--gamma-bar", gamma_bar,
                    "per-step budget (default: scenario value)");
    mpc->add_option("--horizon", horizon, "horizon L (default: scenario)");
    mpc->add_option("--steps", steps, "closed-loop steps");

    auto* gamma_m = app.add_subcommand(
        "gamma-m", "minimum admissibility resource and K table");
    gamma_m->add_option("network", network_path)->required();
    gamma_m->add_option("--budgets", budgets, "budgets for the K table");

    auto* gen = app.add_subcommand("scenario-gen",
                                   "landscape to instance files");
    gen->add_option("--landscape", landscape_path, "landscape JSON");
    gen->add_option("--demo-rows", demo_rows, "procedural demo rows");
    gen->add_option("--demo-cols", demo_cols, "procedural demo cols");

    CLI11_PARSE(app, argc, argv);
    opt.config_path = config;
    opt.out_dir = out;

    try {
        opt.load_config();
        if (validate->parsed())
            return cmd_validate(network_path, std::cout);
        if (simulate->parsed())
            return cmd_simulate(network_path, state_path, steps, opt);
        if (mpc->parsed())
            return cmd_mpc(scenario_path, gamma_bar, horizon, steps, opt);
        if (gamma_m->parsed())
            return cmd_gamma_m(network_path, budgets, opt, std::cout);
        if (gen->parsed())
            return cmd_scenario_gen(landscape_path, demo_rows, demo_cols, opt);
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        if (!e.dump_path.empty())
            std::cerr << "program dump: " << e.dump_path << "\n";
        return kExitInternal;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
