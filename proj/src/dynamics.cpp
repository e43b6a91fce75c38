#include "spmpc/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "spmpc/errors.hpp"

namespace spmpc {

void check_state(const StateVector& x, double tol) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!(x[i] >= -tol && x[i] <= 1.0 + tol)) {
            std::ostringstream os;
            os << "state[" << i << "] = " << x[i] << " outside [0, 1]";
            throw DomainError(os.str());
        }
}

StateVector step_nonlinear(const SystemMatrices& a, const StateVector& x) {
    check_state(x);
    StateVector out(x.size());
    kernels::sis_step(a.diag, a.offdiag, x, out);
    for (double& v : out) {
        if (v < 0.0) {
            if (v < -1e-12)
                throw NumericError("nonlinear step produced a state below 0");
            v = 0.0;
        } else if (v > 1.0) {
            if (v > 1.0 + 1e-12)
                throw NumericError("nonlinear step produced a state above 1");
            v = 1.0;
        }
    }
    return out;
}

std::vector<double> step_linear(const SystemMatrices& a,
                                const std::vector<double>& xhat) {
    if (static_cast<int>(xhat.size()) != a.size())
        throw DomainError("step_linear: dimension mismatch");
    std::vector<double> out(xhat.size());
    kernels::lin_step(a.diag, a.offdiag, xhat, out);
    return out;
}

namespace {

// Solve p (I - alpha A) = C, i.e. (I - alpha A)^T p^T = C^T, by sparse LU.
std::vector<double> discounted_row_solve(const SpreadingNetwork& net,
                                         const SystemMatrices& a) {
    const int n = net.n;
    // Gate on the spectral radius so divergence surfaces as a domain error
    // rather than a garbage solve; the power-iteration estimate is an
    // upper bound, so the gate is conservative.
    const double rho = spectral_radius(a, 1e-8);
    if (net.alpha * rho >= 1.0) {
        std::ostringstream os;
        os << "alpha*rho(A) = " << net.alpha * rho
           << " >= 1: the discounted series diverges";
        throw DomainError(os.str());
    }

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(a.offdiag.nnz() + n);
    for (int i = 0; i < n; ++i)
        trip.emplace_back(i, i, 1.0 - net.alpha * a.diag[i]);
    for (int i = 0; i < n; ++i)
        for (int k = a.offdiag.ptr[i]; k < a.offdiag.ptr[i + 1]; ++k)
            trip.emplace_back(a.offdiag.idx[k], i,
                              -net.alpha * a.offdiag.val[k]);
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(trip.begin(), trip.end());

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(m);
    if (lu.info() != Eigen::Success)
        throw NumericError("terminal priority solve: LU factorization failed");
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i)
        rhs[i] = net.cost[i];
    Eigen::VectorXd p = lu.solve(rhs);
    if (lu.info() != Eigen::Success)
        throw NumericError("terminal priority solve failed");
    return {p.data(), p.data() + n};
}

} // namespace

std::vector<double> terminal_priority(const SpreadingNetwork& net,
                                      const RateState& rates) {
    return discounted_row_solve(net, build_system_matrix(net, rates));
}

PrioritySequence propagate_priorities(const SpreadingNetwork& net,
                                      const std::vector<RateState>& schedule) {
    if (schedule.empty())
        throw DomainError("propagate_priorities: empty schedule");
    const int L = static_cast<int>(schedule.size());
    PrioritySequence seq;
    seq.p.assign(L + 1, {});
    seq.p[L] = terminal_priority(net, schedule[L - 1]);
    seq.p[L - 1] = seq.p[L]; // fixed point: p(L-1) = C + alpha p(L-1) A(L-1)
    for (int l = L - 2; l >= 0; --l) {
        const SystemMatrices a = build_system_matrix(net, schedule[l]);
        // p(l) = C + alpha p(l+1) A(l); the row-vector product is a
        // matvec with the transposed off-diagonal part.
        std::vector<double> prod(net.n);
        kernels::spmv(a.offdiag_t, seq.p[l + 1], prod);
        seq.p[l].resize(net.n);
        for (int j = 0; j < net.n; ++j)
            seq.p[l][j] =
                net.cost[j] + net.alpha * (prod[j] + a.diag[j] * seq.p[l + 1][j]);
    }
    return seq;
}

double evaluate_risk_bound(const PrioritySequence& p, const StateVector& x) {
    const auto& p0 = p.front();
    if (p0.size() != x.size())
        throw DomainError("evaluate_risk_bound: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        s += p0[i] * x[i];
    return s;
}

std::vector<double> stability_certificate(const SpreadingNetwork& net,
                                          const RateState& rates) {
    std::vector<double> p = terminal_priority(net, rates);
    std::vector<double> cert(net.n);
    for (int i = 0; i < net.n; ++i)
        cert[i] = net.cost[i] - (1.0 - net.alpha) * p[i];
    return cert;
}

RiskValue evaluate_risk(const SpreadingNetwork& net,
                        const std::vector<RateState>& schedule,
                        const StateVector& x0, double tail_tol, int max_steps) {
    if (schedule.empty())
        throw DomainError("evaluate_risk: empty schedule");
    check_state(x0);
    const int L = static_cast<int>(schedule.size());

    std::vector<SystemMatrices> mats;
    mats.reserve(L);
    for (const RateState& r : schedule)
        mats.push_back(build_system_matrix(net, r));
    // Terminal priority also gates alpha*rho(A_terminal) < 1.
    const std::vector<double> p_term = terminal_priority(net, schedule[L - 1]);

    StateVector x = x0;
    std::vector<double> xhat(x0.begin(), x0.end());
    RiskValue out;
    double discount = 1.0;
    for (int k = 0;; ++k) {
        // Certified tail: alpha^k R(x(k)) <= alpha^k p_term xhat(k), valid
        // once the schedule is constant at its terminal rates (k >= L-1).
        double tail = 0.0;
        for (int i = 0; i < net.n; ++i)
            tail += p_term[i] * xhat[i];
        tail *= discount;
        if ((k >= L - 1 && tail < tail_tol) || k >= max_steps) {
            out.truncation_bound = tail;
            out.steps = k;
            if (k >= max_steps && tail >= tail_tol)
                throw NumericError(
                    "evaluate_risk: tail bound did not pass tail_tol within "
                    "the step cap");
            return out;
        }
        double stage = 0.0;
        for (int i = 0; i < net.n; ++i)
            stage += net.cost[i] * x[i];
        out.risk += discount * stage;
        const SystemMatrices& a = mats[std::min(k, L - 1)];
        x = step_nonlinear(a, x);
        std::vector<double> next(net.n);
        kernels::lin_step(a.diag, a.offdiag, xhat, next);
        xhat.swap(next);
        discount *= net.alpha;
    }
}

void write_trajectory_csv(std::ostream& out,
                          const std::vector<StateVector>& traj) {
    out << "step,node,x\n";
    char buf[64];
    for (std::size_t k = 0; k < traj.size(); ++k)
        for (std::size_t i = 0; i < traj[k].size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g\n", k, i,
                          traj[k][i]);
            out << buf;
        }
}

void write_risk_series_csv(std::ostream& out,
                           const std::vector<RiskSeriesRow>& rows) {
    out << "step,risk,risk_bound,truncation_bound\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", r.step,
                      r.risk, r.risk_bound, r.truncation_bound);
        out << buf;
    }
}

} // namespace spmpc
