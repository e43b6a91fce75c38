#include "spmpc/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spmpc/errors.hpp"

namespace spmpc {

using nlohmann::json;

namespace {

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw DomainError("cannot create output directory " + dir.string() +
                          ": " + ec.message());
}

json options_json(const CliOptions& opt) {
    return {{"config", opt.config_path.string()},
            {"out", opt.out_dir.string()},
            {"seed", opt.seed},
            {"tol_feas", opt.tol_feas},
            {"tol_opt", opt.tol_opt},
            {"tail_tol", opt.tail_tol},
            {"epsilon2", opt.epsilon2}};
}

void write_manifest(const std::filesystem::path& dir, const std::string& cmd,
                    const json& inputs, const CliOptions& opt,
                    const json& extra = json::object()) {
    json doc;
    doc["command"] = cmd;
    doc["inputs"] = inputs;
    doc["options"] = options_json(opt);
    doc["seed"] = opt.seed;
    doc["tool_version"] = kToolVersion;
    doc["threads"] = kernels::thread_count();
    doc["backend"] =
        kernels::backend() == kernels::Backend::OpenMP ? "openmp" : "serial";
    for (auto it = extra.begin(); it != extra.end(); ++it)
        doc[it.key()] = it.value();
    std::ofstream out(dir / "manifest.json");
    if (!out)
        throw DomainError("cannot write manifest in " + dir.string());
    out << doc.dump(2) << "\n";
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out)
        throw DomainError("cannot write " + p.string());
    return out;
}

} // namespace

void CliOptions::load_config() {
    if (config_path.empty())
        return;
    std::ifstream in(config_path);
    if (!in)
        throw DomainError("cannot open config file: " + config_path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DomainError("config file " + config_path.string() + ": " +
                          e.what());
    }
    seed = doc.value("seed", seed);
    tol_feas = doc.value("tol_feas", tol_feas);
    tol_opt = doc.value("tol_opt", tol_opt);
    tail_tol = doc.value("tail_tol", tail_tol);
    epsilon2 = doc.value("epsilon2", epsilon2);
}

StateVector read_state_csv(const std::filesystem::path& path, int n) {
    std::ifstream in(path);
    if (!in)
        throw DomainError("cannot open state file: " + path.string());
    StateVector x(n, 0.0);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || (lineno == 1 && line.rfind("node", 0) == 0))
            continue;
        int node = -1;
        double v = 0.0;
        if (std::sscanf(line.c_str(), "%d,%lf", &node, &v) != 2)
            throw DomainError(path.string() + ":" + std::to_string(lineno) +
                              ": expected 'node,x'");
        if (node < 0 || node >= n)
            throw DomainError(path.string() + ":" + std::to_string(lineno) +
                              ": node index out of range");
        x[node] = v;
    }
    check_state(x);
    return x;
}

void write_state_csv(const std::filesystem::path& path, const StateVector& x) {
    auto out = open_out(path);
    out << "node,x\n";
    char buf[64];
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, x[i]);
        out << buf;
    }
}

int cmd_validate(const std::filesystem::path& network_path,
                 std::ostream& out) {
    const SpreadingNetwork net = load_network_unvalidated(network_path);
    const auto problems = net.validate();
    if (!problems.empty()) {
        out << "INVALID instance (" << problems.size() << " problems):\n";
        for (const auto& p : problems)
            out << "  - " << p << "\n";
        return kExitDomain;
    }
    double worst_colsum = 0.0;
    {
        std::vector<double> colsum(net.n, 0.0);
        for (const Edge& e : net.edges)
            colsum[e.j] += e.beta_upper;
        for (double c : colsum)
            worst_colsum = std::max(worst_colsum, net.h * c);
    }
    out << "step-size: h*delta_upper <= 1, h*delta_cap <= 1, worst column "
           "sum h*sum beta_upper = "
        << worst_colsum << " (< 1)\n";
    const double margin = check_assumption1(net);
    out << "assumption 1 margin 1 - alpha*rho(A_upper) = " << margin << "\n";
    const auto margins = admissibility_margins(net, unmodified_rates(net));
    double worst = margins.empty() ? 0.0 : margins[0];
    int worst_j = 0;
    for (int j = 0; j < net.n; ++j)
        if (margins[j] < worst) {
            worst = margins[j];
            worst_j = j;
        }
    out << "admissibility margins at unmodified rates: worst " << worst
        << " at node " << worst_j
        << (worst > 0.0 ? " (already admissible)" : "") << "\n";
    if (margin <= 0.0) {
        out << "FAIL: Assumption 1 does not hold\n";
        return kExitDomain;
    }
    out << "OK\n";
    return kExitOk;
}

int cmd_simulate(const std::filesystem::path& network_path,
                 const std::filesystem::path& state_path, int steps,
                 const CliOptions& opt) {
    if (steps < 0)
        throw DomainError("simulate: steps must be nonnegative");
    const SpreadingNetwork net = load_network(network_path);
    StateVector x = read_state_csv(state_path, net.n);
    const RateState rates = unmodified_rates(net);
    const SystemMatrices a = build_system_matrix(net, rates);

    std::vector<StateVector> traj;
    std::vector<RiskSeriesRow> series;
    traj.reserve(steps + 1);
    const std::vector<double> p = terminal_priority(net, rates);
    for (int k = 0; k <= steps; ++k) {
        traj.push_back(x);
        const RiskValue rv = evaluate_risk(net, {rates}, x, opt.tail_tol);
        double bound = 0.0;
        for (int i = 0; i < net.n; ++i)
            bound += p[i] * x[i];
        series.push_back({k, rv.risk, bound, rv.truncation_bound});
        if (k < steps)
            x = step_nonlinear(a, x);
    }

    ensure_dir(opt.out_dir);
    {
        auto out = open_out(opt.out_dir / "trajectory.csv");
        write_trajectory_csv(out, traj);
    }
    {
        auto out = open_out(opt.out_dir / "risk_series.csv");
        write_risk_series_csv(out, series);
    }
    write_manifest(opt.out_dir, "simulate",
                   {{"network", network_path.string()},
                    {"state", state_path.string()},
                    {"steps", steps}},
                   opt);
    return kExitOk;
}

int cmd_mpc(const std::filesystem::path& scenario_path, double gamma_bar,
            int L, int steps, const CliOptions& opt) {
    if (steps < 0)
        throw DomainError("mpc: steps must be nonnegative");
    WildfireParams params;
    const Landscape scape = load_landscape(scenario_path, &params);
    if (gamma_bar > 0.0)
        params.gamma_bar = gamma_bar;
    if (L > 0)
        params.L = L;
    const SpreadingNetwork net = build_wildfire_network(scape, params);
    const StateVector x0 = seed_outbreak(scape, opt.seed);

    MpcConfig cfg;
    cfg.L = params.L;
    cfg.gamma_bar = params.gamma_bar;
    cfg.steps = steps;
    cfg.tail_tol = opt.tail_tol;
    cfg.epsilon2 = opt.epsilon2;
    cfg.solver.tol_feas = opt.tol_feas;
    cfg.solver.tol_opt = opt.tol_opt;
    ensure_dir(opt.out_dir);
    cfg.dump_dir = opt.out_dir.string();

    const MpcRunLog log = mpc_run(net, unmodified_rates(net), x0, cfg);

    {
        auto out = open_out(opt.out_dir / "run_log.csv");
        write_run_log_csv(out, log);
    }
    for (std::size_t k = 0; k < log.allocations.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "alloc_%04zu.csv", k);
        auto out = open_out(opt.out_dir / name);
        dump_allocation_csv(net, log.allocations[k], out, cfg.alloc_eps);
    }
    {
        json diags = json::array();
        for (std::size_t k = 0; k < log.diagnostics.size(); ++k) {
            const OcpDiagnostics& d = log.diagnostics[k];
            diags.push_back({{"k", k},
                             {"bellman_residual", d.bellman_residual},
                             {"floor_index", d.floor_index},
                             {"rates_monotone", d.rates_monotone},
                             {"priorities_monotone", d.priorities_monotone},
                             {"all_in_applicable", d.all_in_applicable},
                             {"all_in_gap", d.all_in_gap},
                             {"spent_first_stage", d.spent_first_stage},
                             {"shift_feasible", log.steps[k].shift_feasible},
                             {"shift_violation",
                              log.steps[k].shift_violation}});
        }
        auto out = open_out(opt.out_dir / "diagnostics.json");
        out << diags.dump(2) << "\n";
    }
    {
        json side = {{"gamma_m", log.gamma_m},
                     {"k_estimate", log.k_estimate},
                     {"k_empirical", log.k_empirical},
                     {"config",
                      {{"L", cfg.L},
                       {"gamma_bar", cfg.gamma_bar},
                       {"steps", cfg.steps},
                       {"tail_tol", cfg.tail_tol},
                       {"epsilon2", cfg.epsilon2},
                       {"seed", opt.seed}}}};
        if (!log.assumption2_note.empty())
            side["assumption2_note"] = log.assumption2_note;
        auto out = open_out(opt.out_dir / "kestimate.json");
        out << side.dump(2) << "\n";
    }
    write_manifest(opt.out_dir, "mpc",
                   {{"scenario", scenario_path.string()},
                    {"gamma_bar", cfg.gamma_bar},
                    {"L", cfg.L},
                    {"steps", steps}},
                   opt);
    return kExitOk;
}

int cmd_gamma_m(const std::filesystem::path& network_path,
                const std::vector<double>& budgets, const CliOptions& opt,
                std::ostream& out) {
    const SpreadingNetwork net = load_network(network_path);
    const double gm = compute_gamma_m(net, opt.epsilon2);
    out << "Gamma_M = " << gm << "\n";
    out << "budget,K\n";
    for (double b : budgets) {
        if (!(b > 0.0))
            throw DomainError("gamma-m: budgets must be positive");
        out << b << "," << static_cast<int>(std::ceil(gm / b)) << "\n";
    }
    return kExitOk;
}

int cmd_scenario_gen(const std::filesystem::path& landscape_path,
                     int demo_rows, int demo_cols, const CliOptions& opt) {
    WildfireParams params;
    Landscape scape;
    if (!landscape_path.empty()) {
        scape = load_landscape(landscape_path, &params);
    } else {
        if (demo_rows <= 0 || demo_cols <= 0)
            throw DomainError(
                "scenario-gen: give a landscape file or demo dimensions");
        scape = demo_landscape(demo_rows, demo_cols, opt.seed);
    }
    const SpreadingNetwork net = build_wildfire_network(scape, params);
    const StateVector x0 = seed_outbreak(scape, opt.seed);

    ensure_dir(opt.out_dir);
    save_landscape(scape, params, opt.out_dir / "landscape.json");
    save_network(net, opt.out_dir / "network.json");
    write_state_csv(opt.out_dir / "x0.csv", x0);
    {
        auto out = open_out(opt.out_dir / "landscape_raster.csv");
        write_landscape_raster_csv(out, scape);
    }
    write_manifest(opt.out_dir, "scenario-gen",
                   {{"landscape", landscape_path.string()},
                    {"demo_rows", demo_rows},
                    {"demo_cols", demo_cols}},
                   opt,
                   {{"n", net.n}, {"edges", net.edge_count()},
                    {"alpha", net.alpha}});
    return kExitOk;
}

} // namespace spmpc
