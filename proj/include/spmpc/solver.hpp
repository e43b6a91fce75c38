#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace spmpc {

/// One linear entry coef * z[var] of an affine functional.
struct LinTerm {
    int var;
    double coef;
};

/// exp(offset + sum of linear entries); one summand of a log-sum-exp
/// constraint. A term with an empty lin list is a constant.
struct LseTerm {
    std::vector<LinTerm> lin;
    double offset = 0.0;
};

/// log sum_t exp(term_t(z)) <= 0.
struct LseConstraint {
    std::vector<LseTerm> terms;
    std::string name;
};

/// sum coef * z[var] + offset <= 0.
struct LinConstraint {
    std::vector<LinTerm> lin;
    double offset = 0.0;
    std::string name;
};

/// Convex program with linear objective, affine inequalities, box bounds
/// and log-sum-exp inequality constraints. The solver requires a strictly
/// feasible initial_point; builders construct one problem-specifically.
struct ConvexProgram {
    int m = 0;
    std::vector<double> objective;
    std::vector<LseConstraint> lse_constraints;
    std::vector<LinConstraint> linear_constraints;
    std::vector<double> lower, upper; // +-inf when absent
    std::vector<double> initial_point;
    std::vector<std::string> var_names;

    int add_var(std::string name,
                double lo = -std::numeric_limits<double>::infinity(),
                double hi = std::numeric_limits<double>::infinity());

    /// Structural checks (indices in range, every lse constraint has at
    /// least one term); throws DomainError on violation.
    void require_well_formed() const;
};

enum class SolveStatus { Optimal, Infeasible, MaxIter, NumericalFailure };

const char* to_string(SolveStatus s);

struct KktResiduals {
    double primal_feas = 0.0;     // max constraint/bound violation
    double stationarity = 0.0;    // inf-norm of the Lagrangian gradient
    double complementarity = 0.0; // total gap sum lambda_i * (-g_i)
};

struct Solution {
    std::vector<double> z;
    double objective_value = 0.0;
    SolveStatus status = SolveStatus::NumericalFailure;
    KktResiduals kkt;
    int newton_iters = 0;
    int barrier_stages = 0;
    double mu_final = 0.0;
    std::string message;
    // Multipliers at the final barrier point, in constraint order.
    std::vector<double> lse_multipliers;
    std::vector<double> lin_multipliers;
    std::vector<double> lower_multipliers, upper_multipliers;
};

struct SolverSettings {
    double tol_feas = 1e-8;
    double tol_opt = 1e-6;
    int max_newton = 500;    // total Newton steps across all stages
    double mu0 = 1.0;        // initial barrier parameter
    double mu_factor = 0.1;  // stage schedule mu <- mu * mu_factor
    double mu_min = 1e-12;   // final stage
    /// Constraints whose gradient support exceeds this use a rank-one
    /// correction in the Newton solve instead of a dense clique.
    int clique_cutoff = 64;
};

/// Log-barrier interior point over the smooth log-sum-exp formulation.
/// Deterministic for identical inputs and settings. status=Optimal
/// guarantees constraint violation <= tol_feas and a Lagrangian gradient
/// within tol_opt; the reported complementarity bounds the remaining
/// suboptimality.
Solution solve(const ConvexProgram& p, const SolverSettings& s = {});
Solution solve(const ConvexProgram& p, double tol_feas, double tol_opt);

/// Residual report at an arbitrary point. Uses the solution's tracked
/// multipliers when given one; the point-only overload fits the best
/// scalar multiple of the central-path multipliers, so interior
/// non-stationary points report a positive stationarity residual.
KktResiduals kkt_residuals(const ConvexProgram& p, std::span<const double> z);
KktResiduals kkt_residuals(const ConvexProgram& p, const Solution& sol);

/// Max-shifted evaluation, safe against under/overflow.
double eval_lse(const LseConstraint& c, std::span<const double> z);
double eval_lin(const LinConstraint& c, std::span<const double> z);

/// Self-describing JSON dump of a program instance for cross-checking
/// against external solvers.
void dump_program_json(const ConvexProgram& p, std::ostream& out);

} // namespace spmpc
