#pragma once

#include <iosfwd>
#include <vector>

#include "spmpc/network.hpp"

namespace spmpc {

/// Per-node infection probabilities, in [0, 1].
using StateVector = std::vector<double>;

/// Throws DomainError when any entry leaves [0,1] by more than tol.
void check_state(const StateVector& x, double tol = 1e-12);

/// One step of the nonlinear mean-field model, x+ = [A - B(x)] x.
/// Results are clamped to [0,1] only against sub-1e-12 floating point
/// drift; anything larger raises.
StateVector step_nonlinear(const SystemMatrices& a, const StateVector& x);

/// One step of the linear envelope, xhat+ = A xhat (xhat may exceed 1).
std::vector<double> step_linear(const SystemMatrices& a,
                                const std::vector<double>& xhat);

/// Nonnegative priority vectors p(0..L), p(L) = p(L-1); p(0) x bounds the
/// discounted risk of the trajectory started at x.
struct PrioritySequence {
    std::vector<std::vector<double>> p;

    int horizon() const { return static_cast<int>(p.size()) - 1; }
    const std::vector<double>& front() const { return p.front(); }
};

/// Fixed point p = C + alpha p A, i.e. C (I - alpha A)^{-1}; requires
/// alpha rho(A) < 1.
std::vector<double> terminal_priority(const SpreadingNetwork& net,
                                      const RateState& rates);

/// Backward Bellman recursion p(l) = C + alpha p(l+1) A(l) from the
/// terminal fixed point under the last schedule entry; the result
/// satisfies the priority inequality with equality.
PrioritySequence propagate_priorities(const SpreadingNetwork& net,
                                      const std::vector<RateState>& schedule);

/// Risk upper bound p(0) . x.
double evaluate_risk_bound(const PrioritySequence& p, const StateVector& x);

/// Decrease certificate C - (1 - alpha) C (I - alpha A)^{-1}; all entries
/// positive certify the per-step risk-bound decrease once rates are
/// admissible.
std::vector<double> stability_certificate(const SpreadingNetwork& net,
                                          const RateState& rates);

struct RiskValue {
    double risk = 0.0;             // truncated discounted impact sum
    double truncation_bound = 0.0; // certified bound on the dropped tail
    int steps = 0;                 // simulated horizon
};

/// Discounted risk sum_k alpha^k C x(k) under the given rate schedule
/// (frozen at its last entry past the end). Truncates once the certified
/// tail bound alpha^K p_term xhat(K) drops below tail_tol, where xhat is
/// the linear envelope and p_term the terminal priority. Requires
/// alpha rho(A_terminal) < 1.
RiskValue evaluate_risk(const SpreadingNetwork& net,
                        const std::vector<RateState>& schedule,
                        const StateVector& x0, double tail_tol = 1e-8,
                        int max_steps = 2000000);

/// Trajectory dump, columns step,node,x.
void write_trajectory_csv(std::ostream& out,
                          const std::vector<StateVector>& traj);

/// Risk series dump, columns step,risk,risk_bound,truncation_bound.
struct RiskSeriesRow {
    int step;
    double risk;
    double risk_bound;
    double truncation_bound;
};
void write_risk_series_csv(std::ostream& out,
                           const std::vector<RiskSeriesRow>& rows);

} // namespace spmpc
