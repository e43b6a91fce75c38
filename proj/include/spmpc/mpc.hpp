#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "spmpc/ocp.hpp"

namespace spmpc {

struct MpcConfig {
    int L = 1;
    double gamma_bar = 0.0;
    int steps = 0;
    double tail_tol = 1e-8;
    double epsilon = -1.0;  // OCP regularizer, < 0 picks the default
    double epsilon2 = 1e-8; // admissibility margin for the K-estimate
    SolverSettings solver;
    double warm_mu0 = 1e-4;   // barrier start when warm data is available
    double alloc_eps = 1e-9;  // threshold for allocation sparsity counts
    bool check_shift_feasibility = true;
    std::string dump_dir; // program dumps on solver failure, when set
};

struct MpcStepLog {
    int k = 0;
    double risk = 0.0;
    double risk_bound = 0.0;
    double truncation_bound = 0.0;
    double gamma_spent = 0.0;
    int nnz_alloc = 0;
    int solver_iters = 0;
    bool shift_feasible = true;
    double shift_violation = 0.0;
    /// (1/alpha) [C - (1-alpha) p*(0|k)] x(k); lower-bounds the next
    /// risk-bound decrease once the rates are admissible.
    double decrease_certificate = 0.0;
};

struct MpcRunLog {
    std::vector<MpcStepLog> steps;
    std::vector<StateVector> states;           // x(k), steps + 1 entries
    std::vector<RateState> rate_history;       // rates after each step
    std::vector<AllocationMatrix> allocations; // first-stage U per step
    std::vector<OcpDiagnostics> diagnostics;   // per-step solution checks
    double gamma_m = -1.0; // < 0 when Assumption 2 failed
    int k_estimate = -1;
    int k_empirical = -1;
    std::string assumption2_note;
};

/// Time-shifted previous optimum: the feasible candidate of the next step.
struct ShiftCandidate {
    PrioritySequence p;
    std::vector<AllocationMatrix> U;
    std::vector<RateState> rates;
};

ShiftCandidate warm_start_shift(const SpreadingNetwork& net,
                                const OcpSolution& prev);

struct FeasibilityReport {
    bool feasible = true;
    double worst_violation = 0.0;
    std::string what;
};

/// Direct substitution of a candidate into the constraints of the relaxed
/// problem at the given instance: nonnegativity, the Bellman inequality,
/// rate monotonicity and bounds, and the per-step budget.
FeasibilityReport check_candidate(const OcpInstance& inst,
                                  const ShiftCandidate& cand,
                                  double tol = 1e-9);

struct MpcStepResult {
    RateState new_rates;
    OcpSolution sol;
    OcpDiagnostics diag;
    MpcStepLog log;
};

/// One receding-horizon step: build and solve the relaxed problem at
/// (rates, x), apply the first allocation. warm may be null.
MpcStepResult mpc_step(const SpreadingNetwork& net, const RateState& rates,
                       const StateVector& x, const MpcConfig& cfg,
                       const ShiftCandidate* warm = nullptr, int k = 0);

/// Closed loop: alternate mpc_step with the nonlinear plant for cfg.steps
/// steps, verifying the budget, monotonicity and bound invariants online.
MpcRunLog mpc_run(const SpreadingNetwork& net, const RateState& rates0,
                  const StateVector& x0, const MpcConfig& cfg);

/// ceil(Gamma_M / gamma_bar); 0 when the unmodified rates are already
/// admissible. Throws DomainError when Assumption 2 fails.
int k_estimate(const SpreadingNetwork& net, double gamma_bar,
               double epsilon2 = 1e-8);

/// Run log CSV, columns k,risk,risk_bound,gamma_spent,nnz_alloc,solver_iters.
void write_run_log_csv(std::ostream& out, const MpcRunLog& log);

} // namespace spmpc
