#pragma once

#include <vector>

#include "spmpc/dynamics.hpp"
#include "spmpc/network.hpp"
#include "spmpc/resource.hpp"
#include "spmpc/solver.hpp"

namespace spmpc {

/// One receding-horizon problem: minimize the regularized risk bound
/// p(0)x + epsilon*sum(p(0)) over priority vectors, rate schedules and
/// allocations, subject to the Bellman inequality, monotone rates within
/// bounds and the per-step budget.
struct OcpInstance {
    const SpreadingNetwork* net = nullptr;
    RateState current_rates; // rates implemented at the previous step
    StateVector x;           // detected outbreak
    int L = 1;
    double gamma_bar = 0.0;
    double epsilon = -1.0; // < 0 picks the default 1e-6 * min cost
};

double default_epsilon(const SpreadingNetwork& net);

/// Variable layout of the compiled program. Variables are
///   r | y(l,i) for l=0..L-1 | U(l,slot) for active slots,
/// where y(L,i) aliases y(L-1,i) and slots whose remaining headroom is
/// below pin_tol carry no variables (their rates are fixed).
struct OcpLayout {
    int n = 0, L = 0;
    int var_r = 0;
    int u_base = 0;
    std::vector<int> active_slots;      // slot ids with headroom
    std::vector<int> slot_active_index; // slot -> dense index or -1
    AllocationMatrix umax;              // cumulative cap per slot
    double epsilon = 0.0;
    static constexpr double pin_tol = 1e-12;

    int y_index(int l, int i) const {
        if (l >= L)
            l = L - 1;
        return 1 + l * n + i;
    }
    int u_index(int l, int active) const {
        return u_base + l * static_cast<int>(active_slots.size()) + active;
    }
    /// U variable of (l, slot), or -1 when the slot is pinned.
    int u_var(int l, int slot) const {
        const int a = slot_active_index[slot];
        return a < 0 ? -1 : u_index(l, a);
    }
};

struct BuiltOcp {
    ConvexProgram program;
    OcpLayout layout;
};

/// Compile the relaxed OCP into its log-sum-exp form; the returned program
/// carries a strictly feasible initial point (zero-allocation based).
/// Throws DomainError when Assumption 1 fails for the instance.
BuiltOcp build_relaxed_ocp(const OcpInstance& inst);

/// Strictly feasible start: near-zero allocations, priorities from the
/// constant-rate fixed point inflated by 1e-3, epigraph variable with
/// matching slack.
std::vector<double> initial_point(const OcpInstance& inst,
                                  const OcpLayout& layout);

struct OcpSolution {
    PrioritySequence p;                 // p(0..L), p(L) = p(L-1)
    std::vector<AllocationMatrix> U;    // per stage, 0..L-1
    std::vector<RateState> rates;       // reconstructed schedule
    double objective = 0.0;             // regularized bound p(0)x + eps*sum p(0)
    Solution solver_report;
};

/// Decode a solved program: p = exp(y), rates folded from the allocations,
/// objective cross-checked against exp(r) to 1e-6 relative.
OcpSolution extract_solution(const OcpInstance& inst, const BuiltOcp& built,
                             const Solution& sol);

struct OcpDiagnostics {
    /// max_{l,j} |p_j(l) - c_j - alpha (p(l+1) A(l))_j|
    double bellman_residual = 0.0;
    /// Largest index with A*(floor_index - 1) strictly above the floor
    /// somewhere (by strict_slack).
    int floor_index = 0;
    bool rates_monotone = true;      // A*(l-1) >= A*(l), strict somewhere,
    bool priorities_monotone = true; // for l < floor_index
    bool all_in_applicable = false;  // headroom cost exceeded the budget
    double all_in_gap = 0.0;         // |spent - budget| when applicable
    double spent_first_stage = 0.0;
    static constexpr double strict_slack = 1e-7;
};

OcpDiagnostics diagnose(const OcpInstance& inst, const OcpSolution& sol);

/// Compile the minimum-resource-to-admissibility program: minimize the
/// weighted allocation from the unmodified rates subject to the per-node
/// weighted cut condition holding with margin epsilon2.
BuiltOcp build_gamma_m_program(const SpreadingNetwork& net, double epsilon2);

/// Optimal objective of the above. Zero when the unmodified rates are
/// already admissible with margin; throws DomainError when the admissible
/// set is empty within the epsilon2 margin (Assumption 2 fails).
double compute_gamma_m(const SpreadingNetwork& net, double epsilon2 = 1e-8);

} // namespace spmpc
