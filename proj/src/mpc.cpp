#include "spmpc/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "spmpc/errors.hpp"

namespace spmpc {

ShiftCandidate warm_start_shift(const SpreadingNetwork& net,
                                const OcpSolution& prev) {
    const int L = static_cast<int>(prev.rates.size());
    ShiftCandidate c;
    c.rates.reserve(L);
    c.U.reserve(L);
    for (int l = 0; l < L; ++l)
        c.rates.push_back(prev.rates[std::min(l + 1, L - 1)]);
    for (int l = 0; l + 1 < L; ++l)
        c.U.push_back(prev.U[l + 1]);
    c.U.push_back(zero_allocation(net));
    c.p.p.assign(L + 1, {});
    for (int l = 0; l <= L; ++l)
        c.p.p[l] = prev.p.p[std::min(l + 1, L)];
    return c;
}

FeasibilityReport check_candidate(const OcpInstance& inst,
                                  const ShiftCandidate& cand, double tol) {
    const SpreadingNetwork& net = *inst.net;
    FeasibilityReport rep;
    auto worse = [&rep](double viol, const std::string& what) {
        if (viol > rep.worst_violation) {
            rep.worst_violation = viol;
            rep.what = what;
        }
        if (viol > 0.0)
            rep.feasible = false;
    };

    const int L = inst.L;
    if (static_cast<int>(cand.rates.size()) != L ||
        cand.p.horizon() != L)
        throw DomainError("check_candidate: horizon mismatch");

    // Nonnegative priorities and the Bellman inequality per stage.
    for (int l = 0; l <= L; ++l)
        for (int i = 0; i < net.n; ++i)
            if (cand.p.p[l][i] < -tol)
                worse(-cand.p.p[l][i], "p >= 0 at stage " + std::to_string(l));
    for (int l = 0; l < L; ++l) {
        const SystemMatrices a = build_system_matrix(net, cand.rates[l]);
        std::vector<double> prod(net.n);
        kernels::spmv(a.offdiag_t, cand.p.p[l + 1], prod);
        for (int j = 0; j < net.n; ++j) {
            const double rhs =
                net.cost[j] +
                net.alpha * (prod[j] + a.diag[j] * cand.p.p[l + 1][j]);
            const double scale = 1.0 + std::abs(cand.p.p[l][j]);
            worse((rhs - cand.p.p[l][j]) / scale,
                  "Bellman stage " + std::to_string(l) + " node " +
                      std::to_string(j));
        }
    }

    // Rate monotonicity, bounds and budgets.
    const RateState floor = floor_rates(net);
    const RateState* prev = &inst.current_rates;
    for (int l = 0; l < L; ++l) {
        const RateState& cur = cand.rates[l];
        for (int s = 0; s < net.edge_count(); ++s) {
            worse(cur.beta[s] - prev->beta[s] - tol,
                  "beta monotone, stage " + std::to_string(l));
            worse(floor.beta[s] - cur.beta[s] - tol,
                  "beta floor, stage " + std::to_string(l));
        }
        for (int i = 0; i < net.n; ++i) {
            worse(prev->delta[i] - cur.delta[i] - tol,
                  "delta monotone, stage " + std::to_string(l));
            worse(cur.delta[i] - floor.delta[i] - tol,
                  "delta ceiling, stage " + std::to_string(l));
        }
        const double spent =
            resource_cost(net, allocation_between(net, *prev, cur));
        worse((spent - inst.gamma_bar) / (1.0 + inst.gamma_bar),
              "budget, stage " + std::to_string(l));
        prev = &cur;
    }
    if (rep.worst_violation <= tol)
        rep.feasible = true;
    return rep;
}

namespace {

// Strictly interior warm point for the compiled program, or empty when the
// inflated candidate is not strictly feasible (cold start then).
std::vector<double> warm_point(const OcpInstance& inst, const BuiltOcp& built,
                               const ShiftCandidate& cand) {
    const SpreadingNetwork& net = *inst.net;
    const OcpLayout& lay = built.layout;
    std::vector<double> z(built.program.m, 0.0);
    const double inflate = 1e-3;
    for (int l = 0; l < lay.L; ++l)
        for (int i = 0; i < lay.n; ++i) {
            const double p = cand.p.p[l][i];
            if (!(p > 0.0))
                return {};
            z[lay.y_index(l, i)] = std::log(p * (1.0 + inflate));
        }
    if (!lay.active_slots.empty()) {
        double total_w = 0.0;
        for (int s : lay.active_slots)
            total_w += net.slot_weight(s);
        const double tau_budget = inst.gamma_bar > 0.0
                                      ? 1e-9 * inst.gamma_bar / total_w
                                      : 1e-12;
        for (int l = 0; l < lay.L; ++l) {
            for (std::size_t a = 0; a < lay.active_slots.size(); ++a) {
                const int s = lay.active_slots[a];
                const double cap = lay.umax.u[s];
                // Shrink-and-lift: the multiplicative shrink buys more
                // budget/cap slack than the strictly-positive floor costs.
                const double floor_u =
                    std::min({1e-12, cap * 1e-8 / (2.0 * lay.L), tau_budget});
                const double u = cand.U[l].u[s] * (1.0 - 1e-8) + floor_u;
                z[lay.u_index(l, static_cast<int>(a))] = u;
            }
        }
    }
    double acc = 0.0;
    for (int i = 0; i < lay.n; ++i)
        acc += (inst.x[i] + lay.epsilon) * cand.p.p[0][i] * 1.001;
    z[built.layout.var_r] = std::log(acc) + 0.1;

    // Must be strictly feasible for every constraint of the program.
    for (const auto& c : built.program.lse_constraints)
        if (!(eval_lse(c, z) < 0.0))
            return {};
    for (const auto& c : built.program.linear_constraints)
        if (!(eval_lin(c, z) < 0.0))
            return {};
    for (int v = 0; v < built.program.m; ++v)
        if (!(z[v] > built.program.lower[v] && z[v] < built.program.upper[v]))
            return {};
    return z;
}

} // namespace

MpcStepResult mpc_step(const SpreadingNetwork& net, const RateState& rates,
                       const StateVector& x, const MpcConfig& cfg,
                       const ShiftCandidate* warm, int k) {
    OcpInstance inst;
    inst.net = &net;
    inst.current_rates = rates;
    inst.x = x;
    inst.L = cfg.L;
    inst.gamma_bar = cfg.gamma_bar;
    inst.epsilon = cfg.epsilon;

    BuiltOcp built = build_relaxed_ocp(inst);

    MpcStepResult res;
    res.log.k = k;
    SolverSettings settings = cfg.solver;
    if (warm != nullptr) {
        if (cfg.check_shift_feasibility) {
            const FeasibilityReport rep = check_candidate(inst, *warm);
            res.log.shift_feasible = rep.feasible;
            res.log.shift_violation = rep.worst_violation;
        }
        std::vector<double> wz = warm_point(inst, built, *warm);
        if (!wz.empty()) {
            built.program.initial_point = std::move(wz);
            settings.mu0 = cfg.warm_mu0;
        }
    }

    Solution sol = solve(built.program, settings);
    if (sol.status != SolveStatus::Optimal) {
        std::string dump;
        if (!cfg.dump_dir.empty()) {
            std::filesystem::create_directories(cfg.dump_dir);
            dump = cfg.dump_dir + "/ocp_failure_k" + std::to_string(k) +
                   ".json";
            std::ofstream out(dump);
            dump_program_json(built.program, out);
        }
        std::ostringstream os;
        os << "mpc step " << k << ": solver returned " << to_string(sol.status)
           << " (" << sol.message << ")";
        throw SolverError(os.str(), dump);
    }

    res.sol = extract_solution(inst, built, sol);
    res.diag = diagnose(inst, res.sol);
    res.new_rates = res.sol.rates.front();

    // Implemented rates never increase any entry of A.
    for (int s = 0; s < net.edge_count(); ++s)
        if (res.new_rates.beta[s] > rates.beta[s] + 1e-12)
            throw NumericError("mpc step: beta increased on an edge");
    for (int i = 0; i < net.n; ++i)
        if (res.new_rates.delta[i] < rates.delta[i] - 1e-12)
            throw NumericError("mpc step: delta decreased on a node");

    res.log.gamma_spent = res.diag.spent_first_stage;
    res.log.solver_iters = sol.newton_iters;
    res.log.nnz_alloc = 0;
    for (double u : res.sol.U.front().u)
        if (u > cfg.alloc_eps)
            ++res.log.nnz_alloc;

    const RiskValue rv = evaluate_risk(net, res.sol.rates, x, cfg.tail_tol);
    res.log.risk = rv.risk;
    res.log.truncation_bound = rv.truncation_bound;
    res.log.risk_bound = 0.0;
    for (int i = 0; i < net.n; ++i)
        res.log.risk_bound += res.sol.p.p[0][i] * x[i];

    res.log.decrease_certificate = 0.0;
    for (int i = 0; i < net.n; ++i)
        res.log.decrease_certificate +=
            (net.cost[i] - (1.0 - net.alpha) * res.sol.p.p[0][i]) * x[i];
    res.log.decrease_certificate /= net.alpha;
    return res;
}

MpcRunLog mpc_run(const SpreadingNetwork& net, const RateState& rates0,
                  const StateVector& x0, const MpcConfig& cfg) {
    net.require_valid();
    check_rates_in_bounds(net, rates0);
    check_state(x0);
    if (cfg.steps < 0)
        throw DomainError("mpc_run: negative step count");

    MpcRunLog log;
    try {
        log.gamma_m = compute_gamma_m(net, cfg.epsilon2);
        log.k_estimate =
            cfg.gamma_bar > 0.0
                ? static_cast<int>(std::ceil(log.gamma_m / cfg.gamma_bar))
                : -1;
    } catch (const DomainError& e) {
        log.gamma_m = -1.0;
        log.k_estimate = -1;
        log.assumption2_note = e.what();
    }

    StateVector x = x0;
    RateState rates = rates0;
    ShiftCandidate warm;
    bool have_warm = false;
    log.states.push_back(x);
    for (int k = 0; k < cfg.steps; ++k) {
        MpcStepResult step =
            mpc_step(net, rates, x, cfg, have_warm ? &warm : nullptr, k);

        if (step.log.gamma_spent >
            cfg.gamma_bar + 1e-6 * std::max(1.0, cfg.gamma_bar))
            throw NumericError("mpc_run: budget exceeded at step " +
                               std::to_string(k));
        if (step.log.risk >
            step.log.risk_bound + step.log.truncation_bound +
                1e-9 * (1.0 + std::abs(step.log.risk_bound)))
            throw NumericError("mpc_run: risk exceeded its bound at step " +
                               std::to_string(k));

        rates = step.new_rates;
        const SystemMatrices a = build_system_matrix(net, rates);
        x = step_nonlinear(a, x);

        warm = warm_start_shift(net, step.sol);
        have_warm = true;

        log.steps.push_back(step.log);
        log.states.push_back(x);
        log.rate_history.push_back(rates);
        log.allocations.push_back(step.sol.U.front());
        log.diagnostics.push_back(step.diag);
    }

    // Empirical onset of monotone decrease of the risk bound.
    log.k_empirical = 0;
    for (int k = static_cast<int>(log.steps.size()) - 1; k >= 1; --k) {
        if (log.steps[k].risk_bound >= log.steps[k - 1].risk_bound) {
            log.k_empirical = k;
            break;
        }
    }
    return log;
}

int k_estimate(const SpreadingNetwork& net, double gamma_bar,
               double epsilon2) {
    if (!(gamma_bar > 0.0))
        throw DomainError("k_estimate: gamma_bar must be positive");
    const double gm = compute_gamma_m(net, epsilon2);
    return static_cast<int>(std::ceil(gm / gamma_bar));
}

void write_run_log_csv(std::ostream& out, const MpcRunLog& log) {
    out << "k,risk,risk_bound,gamma_spent,nnz_alloc,solver_iters\n";
    char buf[160];
    for (const auto& s : log.steps) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%d,%d\n", s.k,
                      s.risk, s.risk_bound, s.gamma_spent, s.nnz_alloc,
                      s.solver_iters);
        out << buf;
    }
}

} // namespace spmpc
