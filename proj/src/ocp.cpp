#include "spmpc/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "spmpc/errors.hpp"

namespace spmpc {

namespace {

// Merge accumulated coefficients into a term, dropping exact cancellations
// (y(L) aliases y(L-1), so terminal-stage terms lose their y entries).
LseTerm make_term(const std::map<int, double>& coefs, double offset) {
    LseTerm t;
    t.offset = offset;
    for (auto [v, c] : coefs)
        if (c != 0.0)
            t.lin.push_back({v, c});
    return t;
}

} // namespace

double default_epsilon(const SpreadingNetwork& net) {
    double cmin = net.cost.empty() ? 1.0 : net.cost[0];
    for (double c : net.cost)
        cmin = std::min(cmin, c);
    return 1e-6 * cmin;
}

BuiltOcp build_relaxed_ocp(const OcpInstance& inst) {
    const SpreadingNetwork& net = *inst.net;
    net.require_valid();
    check_rates_in_bounds(net, inst.current_rates);
    check_state(inst.x);
    if (inst.L < 1)
        throw DomainError("ocp: horizon must be at least 1");
    if (inst.gamma_bar < 0.0)
        throw DomainError("ocp: budget must be nonnegative");
    const double margin = check_assumption1(net);
    if (margin <= 0.0) {
        std::ostringstream os;
        os << "ocp: Assumption 1 fails, 1 - alpha*rho(A_upper) = " << margin;
        throw DomainError(os.str());
    }

    BuiltOcp b;
    OcpLayout& lay = b.layout;
    lay.n = net.n;
    lay.L = inst.L;
    lay.epsilon = inst.epsilon > 0.0 ? inst.epsilon : default_epsilon(net);
    lay.umax = max_allocation(net, inst.current_rates);
    lay.slot_active_index.assign(net.slot_count(), -1);
    // A zero budget freezes the rates: no allocation variables at all.
    if (inst.gamma_bar > 0.0) {
        for (int s = 0; s < net.slot_count(); ++s)
            if (lay.umax.u[s] > OcpLayout::pin_tol) {
                lay.slot_active_index[s] =
                    static_cast<int>(lay.active_slots.size());
                lay.active_slots.push_back(s);
            }
    }

    ConvexProgram& p = b.program;
    lay.var_r = p.add_var("r");
    for (int l = 0; l < inst.L; ++l)
        for (int i = 0; i < net.n; ++i)
            p.add_var("y[" + std::to_string(l) + "][" + std::to_string(i) +
                      "]");
    lay.u_base = p.m;
    const int n_active = static_cast<int>(lay.active_slots.size());
    for (int l = 0; l < inst.L; ++l)
        for (int a = 0; a < n_active; ++a) {
            const int s = lay.active_slots[a];
            auto [ri, rj] = net.slot_rc(s);
            // For a single stage the cumulative cap is a plain box bound.
            const double hi = inst.L == 1 ? lay.umax.u[s]
                                          : std::numeric_limits<double>::infinity();
            p.add_var("U[" + std::to_string(l) + "][" + std::to_string(ri) +
                          "][" + std::to_string(rj) + "]",
                      0.0, hi);
        }

    const double alpha = net.alpha;
    const double h = net.h;

    // Objective epigraph: log sum_i exp(log(x_i + eps) + y_i^0 - r) <= 0.
    {
        LseConstraint c16a;
        c16a.name = "epigraph";
        for (int i = 0; i < net.n; ++i) {
            LseTerm t;
            t.offset = std::log(inst.x[i] + lay.epsilon);
            t.lin.push_back({lay.y_index(0, i), 1.0});
            t.lin.push_back({lay.var_r, -1.0});
            c16a.terms.push_back(std::move(t));
        }
        p.lse_constraints.push_back(std::move(c16a));
        p.objective[lay.var_r] = 1.0;
    }

    // Bellman inequality per node and stage, in log variables.
    for (int l = 0; l < inst.L; ++l) {
        for (int j = 0; j < net.n; ++j) {
            LseConstraint c;
            c.name = "bellman[" + std::to_string(l) + "][" +
                     std::to_string(j) + "]";
            // spreading terms: one per in-edge of column j
            for (int k = net.col_ptr[j]; k < net.col_ptr[j + 1]; ++k) {
                const int s = net.col_edge[k];
                const Edge& e = net.edges[s];
                const double a_ij = alpha * h * inst.current_rates.beta[s];
                if (a_ij <= 0.0)
                    continue;
                std::map<int, double> coefs;
                coefs[lay.y_index(l + 1, e.i)] += 1.0;
                coefs[lay.y_index(l, j)] -= 1.0;
                for (int s2 = 0; s2 <= l; ++s2)
                    if (int uv = lay.u_var(s2, s); uv >= 0)
                        coefs[uv] -= 1.0;
                c.terms.push_back(make_term(coefs, std::log(a_ij)));
            }
            // recovery headroom term
            {
                const double b_j =
                    alpha * h * (net.delta_cap[j] - inst.current_rates.delta[j]);
                if (b_j > 0.0) {
                    std::map<int, double> coefs;
                    coefs[lay.y_index(l + 1, j)] += 1.0;
                    coefs[lay.y_index(l, j)] -= 1.0;
                    const int ds = net.edge_count() + j;
                    for (int s2 = 0; s2 <= l; ++s2)
                        if (int uv = lay.u_var(s2, ds); uv >= 0)
                            coefs[uv] -= 1.0;
                    c.terms.push_back(make_term(coefs, std::log(b_j)));
                }
            }
            // stage cost term
            {
                std::map<int, double> coefs;
                coefs[lay.y_index(l, j)] -= 1.0;
                c.terms.push_back(make_term(coefs, std::log(net.cost[j])));
            }
            // saturated-recovery term
            {
                const double d_j = alpha * (1.0 - h * net.delta_cap[j]);
                if (d_j > 0.0) {
                    std::map<int, double> coefs;
                    coefs[lay.y_index(l + 1, j)] += 1.0;
                    coefs[lay.y_index(l, j)] -= 1.0;
                    c.terms.push_back(make_term(coefs, std::log(d_j)));
                }
            }
            p.lse_constraints.push_back(std::move(c));
        }
    }

    // Cumulative cap (multi-stage case; single-stage caps are box bounds)
    if (inst.L > 1) {
        for (int a = 0; a < n_active; ++a) {
            const int s = lay.active_slots[a];
            LinConstraint lc;
            lc.name = "cap[" + std::to_string(s) + "]";
            lc.offset = -lay.umax.u[s];
            for (int l = 0; l < inst.L; ++l)
                lc.lin.push_back({lay.u_index(l, a), 1.0});
            p.linear_constraints.push_back(std::move(lc));
        }
    }
    // Per-stage weighted budget
    if (inst.gamma_bar > 0.0 && n_active > 0) {
        for (int l = 0; l < inst.L; ++l) {
            LinConstraint lc;
            lc.name = "budget[" + std::to_string(l) + "]";
            lc.offset = -inst.gamma_bar;
            for (int a = 0; a < n_active; ++a)
                lc.lin.push_back(
                    {lay.u_index(l, a), net.slot_weight(lay.active_slots[a])});
            p.linear_constraints.push_back(std::move(lc));
        }
    }

    p.initial_point = initial_point(inst, lay);
    return b;
}

std::vector<double> initial_point(const OcpInstance& inst,
                                  const OcpLayout& lay) {
    const SpreadingNetwork& net = *inst.net;
    std::vector<double> z(1 + lay.n * lay.L +
                              static_cast<int>(lay.active_slots.size()) *
                                  lay.L,
                          0.0);
    const std::vector<double> p0 = terminal_priority(net, inst.current_rates);

    // Inflated fixed-point priorities satisfy the Bellman inequality
    // strictly; near-zero allocations keep the bound barriers strict and
    // only slacken the Bellman terms further.
    const double inflate = 1e-3;
    for (int l = 0; l < lay.L; ++l)
        for (int i = 0; i < lay.n; ++i)
            z[lay.y_index(l, i)] = std::log(p0[i] * (1.0 + inflate));

    if (!lay.active_slots.empty()) {
        double total_w = 0.0;
        for (int s : lay.active_slots)
            total_w += net.slot_weight(s);
        const double tau_budget =
            inst.gamma_bar > 0.0 ? inst.gamma_bar / (2.0 * total_w) : 1e-8;
        for (int l = 0; l < lay.L; ++l)
            for (std::size_t a = 0; a < lay.active_slots.size(); ++a) {
                const int s = lay.active_slots[a];
                z[lay.u_index(l, static_cast<int>(a))] =
                    std::min({1e-8, lay.umax.u[s] / (2.0 * lay.L), tau_budget});
            }
    }

    const double eps = lay.epsilon;
    double acc = 0.0;
    for (int i = 0; i < lay.n; ++i)
        acc += (inst.x[i] + eps) * p0[i] * (1.0 + inflate);
    z[lay.var_r] = std::log(acc) + 0.1;
    return z;
}

OcpSolution extract_solution(const OcpInstance& inst, const BuiltOcp& built,
                             const Solution& sol) {
    if (sol.status != SolveStatus::Optimal)
        throw DomainError(std::string("extract_solution: solver status is ") +
                          to_string(sol.status));
    const SpreadingNetwork& net = *inst.net;
    const OcpLayout& lay = built.layout;

    OcpSolution out;
    out.solver_report = sol;
    out.p.p.assign(lay.L + 1, std::vector<double>(lay.n));
    for (int l = 0; l < lay.L; ++l)
        for (int i = 0; i < lay.n; ++i)
            out.p.p[l][i] = std::exp(sol.z[lay.y_index(l, i)]);
    out.p.p[lay.L] = out.p.p[lay.L - 1];

    out.U.assign(lay.L, zero_allocation(net));
    for (int l = 0; l < lay.L; ++l)
        for (std::size_t a = 0; a < lay.active_slots.size(); ++a)
            out.U[l].u[lay.active_slots[a]] =
                sol.z[lay.u_index(l, static_cast<int>(a))];

    out.rates.reserve(lay.L);
    RateState cur = inst.current_rates;
    for (int l = 0; l < lay.L; ++l) {
        ApplyResult ap = apply_allocation(net, cur, out.U[l]);
        if (ap.bounds_violated && ap.worst_violation > 1e-6) {
            std::ostringstream os;
            os << "extract_solution: reconstructed rates violate bounds at "
                  "slot "
               << ap.worst_slot << " by " << ap.worst_violation;
            throw DomainError(os.str());
        }
        cur = ap.rates;
        out.rates.push_back(cur);
    }

    double obj = 0.0;
    for (int i = 0; i < lay.n; ++i)
        obj += (inst.x[i] + lay.epsilon) * out.p.p[0][i];
    out.objective = obj;
    const double er = std::exp(sol.z[lay.var_r]);
    if (std::abs(obj - er) > 1e-6 * er) {
        std::ostringstream os;
        os << "extract_solution: objective " << obj
           << " disagrees with exp(r) = " << er;
        throw DomainError(os.str());
    }
    return out;
}

OcpDiagnostics diagnose(const OcpInstance& inst, const OcpSolution& sol) {
    const SpreadingNetwork& net = *inst.net;
    OcpDiagnostics d;
    const int L = static_cast<int>(sol.rates.size());

    // Bellman residual under the reconstructed schedule.
    for (int l = 0; l < L; ++l) {
        const SystemMatrices a = build_system_matrix(net, sol.rates[l]);
        std::vector<double> prod(net.n);
        kernels::spmv(a.offdiag_t, sol.p.p[l + 1], prod);
        for (int j = 0; j < net.n; ++j) {
            const double rhs = net.cost[j] +
                               net.alpha * (prod[j] +
                                            a.diag[j] * sol.p.p[l + 1][j]);
            d.bellman_residual = std::max(d.bellman_residual,
                                          std::abs(sol.p.p[l][j] - rhs));
        }
    }

    // Floor index: largest l with A*(l-1) strictly above the floor matrix
    // somewhere. Compare in A-entry units (h*beta, 1 - h*delta).
    const RateState floor = floor_rates(net);
    auto strictly_above_floor = [&](const RateState& r) {
        for (int s = 0; s < net.edge_count(); ++s)
            if (net.h * (r.beta[s] - floor.beta[s]) >
                OcpDiagnostics::strict_slack)
                return true;
        for (int i = 0; i < net.n; ++i)
            if (net.h * (floor.delta[i] - r.delta[i]) >
                OcpDiagnostics::strict_slack)
                return true;
        return false;
    };
    d.floor_index = 0;
    for (int l = 0; l < L; ++l) {
        const RateState& prev = l == 0 ? inst.current_rates : sol.rates[l - 1];
        if (strictly_above_floor(prev))
            d.floor_index = l + 1;
    }

    // Monotonicity of A* and p* up to the floor index.
    auto a_decreases = [&](const RateState& r1, const RateState& r2,
                           bool& strict) {
        strict = false;
        for (int s = 0; s < net.edge_count(); ++s) {
            const double diff = net.h * (r1.beta[s] - r2.beta[s]);
            if (diff < -OcpDiagnostics::strict_slack)
                return false;
            if (diff > OcpDiagnostics::strict_slack)
                strict = true;
        }
        for (int i = 0; i < net.n; ++i) {
            const double diff = net.h * (r2.delta[i] - r1.delta[i]);
            if (diff < -OcpDiagnostics::strict_slack)
                return false;
            if (diff > OcpDiagnostics::strict_slack)
                strict = true;
        }
        return true;
    };
    for (int l = 0; l < std::min(d.floor_index, L); ++l) {
        const RateState& prev = l == 0 ? inst.current_rates : sol.rates[l - 1];
        bool strict = false;
        if (!a_decreases(prev, sol.rates[l], strict) || !strict)
            d.rates_monotone = false;
    }
    for (int l = 1; l < std::min(d.floor_index, L); ++l) {
        bool ge = true, strict = false;
        for (int i = 0; i < net.n; ++i) {
            const double diff = sol.p.p[l - 1][i] - sol.p.p[l][i];
            if (diff < -OcpDiagnostics::strict_slack)
                ge = false;
            if (diff > OcpDiagnostics::strict_slack)
                strict = true;
        }
        if (!ge || !strict)
            d.priorities_monotone = false;
    }

    // All-in policy check.
    const double headroom =
        resource_cost(net, max_allocation(net, inst.current_rates));
    d.spent_first_stage = resource_cost(net, sol.U.front());
    d.all_in_applicable = headroom > inst.gamma_bar;
    if (d.all_in_applicable)
        d.all_in_gap = std::abs(d.spent_first_stage - inst.gamma_bar);
    return d;
}

BuiltOcp build_gamma_m_program(const SpreadingNetwork& net, double epsilon2) {
    net.require_valid();
    if (!(epsilon2 > 0.0))
        throw DomainError("gamma_m: epsilon2 must be positive");

    BuiltOcp b;
    OcpLayout& lay = b.layout;
    lay.n = net.n;
    lay.L = 1;
    lay.umax = allocation_between(net, unmodified_rates(net), floor_rates(net));
    lay.slot_active_index.assign(net.slot_count(), -1);
    for (int s = 0; s < net.slot_count(); ++s)
        if (lay.umax.u[s] > OcpLayout::pin_tol) {
            lay.slot_active_index[s] = static_cast<int>(lay.active_slots.size());
            lay.active_slots.push_back(s);
        }

    ConvexProgram& p = b.program;
    lay.var_r = -1;
    lay.u_base = 0;
    for (std::size_t a = 0; a < lay.active_slots.size(); ++a) {
        const int s = lay.active_slots[a];
        auto [ri, rj] = net.slot_rc(s);
        const int v = p.add_var("U[" + std::to_string(ri) + "][" +
                                    std::to_string(rj) + "]",
                                0.0, lay.umax.u[s]);
        p.objective[v] = net.slot_weight(s);
    }

    for (int j = 0; j < net.n; ++j) {
        LseConstraint c;
        c.name = "cut[" + std::to_string(j) + "]";
        for (int k = net.col_ptr[j]; k < net.col_ptr[j + 1]; ++k) {
            const int s = net.col_edge[k];
            const Edge& e = net.edges[s];
            LseTerm t;
            t.offset = std::log(net.cost[e.i] * e.beta_upper /
                                (net.cost[j] * net.delta_cap[j]));
            if (int uv = lay.slot_active_index[s]; uv >= 0)
                t.lin.push_back({uv, -1.0});
            c.terms.push_back(std::move(t));
        }
        {
            LseTerm t;
            t.offset = std::log((net.delta_cap[j] - net.delta_lower[j]) /
                                net.delta_cap[j]);
            if (int uv = lay.slot_active_index[net.edge_count() + j]; uv >= 0)
                t.lin.push_back({uv, -1.0});
            c.terms.push_back(std::move(t));
        }
        {
            LseTerm t;
            t.offset = std::log(epsilon2);
            c.terms.push_back(std::move(t));
        }
        p.lse_constraints.push_back(std::move(c));
    }

    // Strictly feasible start: back off from the box corner where the cut
    // condition is most slack. Failure at the corner itself means the
    // admissible set is empty within the margin.
    std::vector<double> corner(p.m);
    for (std::size_t a = 0; a < lay.active_slots.size(); ++a)
        corner[a] = lay.umax.u[lay.active_slots[a]];
    auto feasible_at = [&](const std::vector<double>& z) {
        for (const auto& c : p.lse_constraints)
            if (!(eval_lse(c, z) < 0.0))
                return false;
        return true;
    };
    if (!feasible_at(corner))
        throw DomainError(
            "gamma_m: Assumption 2 violated (admissible set empty within the "
            "epsilon2 margin)");
    std::vector<double> start(p.m);
    bool found = false;
    for (double tau = 1e-2; tau >= 1e-11; tau *= 0.1) {
        for (int v = 0; v < p.m; ++v)
            start[v] = (1.0 - tau) * corner[v];
        if (feasible_at(start)) {
            found = true;
            break;
        }
    }
    if (!found)
        throw NumericError(
            "gamma_m: admissible interior too thin for a strictly feasible "
            "start");
    p.initial_point = std::move(start);
    return b;
}

double compute_gamma_m(const SpreadingNetwork& net, double epsilon2) {
    BuiltOcp b = build_gamma_m_program(net, epsilon2);
    // Zero allocation feasible means the unmodified rates are already
    // admissible with margin; zero resource is then exactly optimal.
    std::vector<double> zero(b.program.m, 0.0);
    bool zero_ok = true;
    for (const auto& c : b.program.lse_constraints)
        if (!(eval_lse(c, zero) < 0.0)) {
            zero_ok = false;
            break;
        }
    if (zero_ok)
        return 0.0;

    Solution sol = solve(b.program);
    if (sol.status == SolveStatus::Infeasible)
        throw DomainError("gamma_m: Assumption 2 violated (program infeasible)");
    if (sol.status != SolveStatus::Optimal)
        throw SolverError(std::string("gamma_m solve failed: ") +
                          to_string(sol.status) + " " + sol.message);
    return sol.objective_value;
}

} // namespace spmpc
