#include "spmpc/solver.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <nlohmann/json.hpp>

#include "spmpc/errors.hpp"
#include "spmpc/kernels.hpp"

namespace spmpc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

int ConvexProgram::add_var(std::string name, double lo, double hi) {
    objective.push_back(0.0);
    lower.push_back(lo);
    upper.push_back(hi);
    var_names.push_back(std::move(name));
    return m++;
}

void ConvexProgram::require_well_formed() const {
    if (m < 0 || static_cast<int>(objective.size()) != m ||
        static_cast<int>(lower.size()) != m ||
        static_cast<int>(upper.size()) != m)
        throw DomainError("program: inconsistent variable arrays");
    auto check_var = [this](int v, const std::string& where) {
        if (v < 0 || v >= m)
            throw DomainError("program: variable index out of range in " +
                              where);
    };
    for (const auto& c : lse_constraints) {
        if (c.terms.empty())
            throw DomainError("program: lse constraint '" + c.name +
                              "' has no terms");
        for (const auto& t : c.terms)
            for (const auto& e : t.lin)
                check_var(e.var, "lse constraint '" + c.name + "'");
    }
    for (const auto& c : linear_constraints)
        for (const auto& e : c.lin)
            check_var(e.var, "linear constraint '" + c.name + "'");
    for (int v = 0; v < m; ++v)
        if (!(lower[v] < upper[v]))
            throw DomainError("program: empty box for variable " +
                              std::to_string(v));
}

double eval_lse(const LseConstraint& c, std::span<const double> z) {
    double mx = -kInf;
    for (const auto& t : c.terms) {
        double u = t.offset;
        for (const auto& e : t.lin)
            u += e.coef * z[e.var];
        mx = std::max(mx, u);
    }
    double s = 0.0;
    for (const auto& t : c.terms) {
        double u = t.offset;
        for (const auto& e : t.lin)
            u += e.coef * z[e.var];
        s += std::exp(u - mx);
    }
    return mx + std::log(s);
}

double eval_lin(const LinConstraint& c, std::span<const double> z) {
    double s = c.offset;
    for (const auto& e : c.lin)
        s += e.coef * z[e.var];
    return s;
}

const char* to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::MaxIter: return "max_iter";
    case SolveStatus::NumericalFailure: return "numerical_failure";
    }
    return "unknown";
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

// Program flattened into array form for the kernels and for deterministic
// per-variable gradient gathers.
struct Flat {
    kernels::LseBatch batch;
    std::vector<int> term_cons;             // term -> constraint
    std::vector<int> lse_vptr, lse_vent;    // var -> lse entry list
    std::vector<int> lin_ptr, lin_var;      // flattened linear constraints
    std::vector<double> lin_coef, lin_off;
    std::vector<int> lin_vptr, lin_vent;    // var -> lin entry list
    std::vector<int> lin_ent_cons;          // lin entry -> constraint
    std::vector<std::vector<int>> lse_support; // sorted unique vars
    std::vector<char> lse_big, lin_big;
    int n_lse = 0, n_lin = 0;
    int total_constraints = 0; // lse + lin + finite bounds
};

Flat flatten(const ConvexProgram& p, int cutoff) {
    Flat f;
    f.n_lse = static_cast<int>(p.lse_constraints.size());
    f.n_lin = static_cast<int>(p.linear_constraints.size());

    f.batch.cons_ptr.push_back(0);
    for (int c = 0; c < f.n_lse; ++c) {
        const auto& lc = p.lse_constraints[c];
        std::vector<int> sup;
        for (const auto& t : lc.terms) {
            f.batch.term_off.push_back(t.offset);
            f.batch.term_ptr.push_back(
                static_cast<int>(f.batch.entry_var.size()));
            f.term_cons.push_back(c);
            for (const auto& e : t.lin) {
                f.batch.entry_var.push_back(e.var);
                f.batch.entry_coef.push_back(e.coef);
                sup.push_back(e.var);
            }
        }
        f.batch.cons_ptr.push_back(static_cast<int>(f.batch.term_off.size()));
        std::sort(sup.begin(), sup.end());
        sup.erase(std::unique(sup.begin(), sup.end()), sup.end());
        f.lse_big.push_back(static_cast<int>(sup.size()) > cutoff ? 1 : 0);
        f.lse_support.push_back(std::move(sup));
    }
    f.batch.term_ptr.push_back(static_cast<int>(f.batch.entry_var.size()));

    f.lin_ptr.push_back(0);
    for (int c = 0; c < f.n_lin; ++c) {
        const auto& lc = p.linear_constraints[c];
        for (const auto& e : lc.lin) {
            f.lin_var.push_back(e.var);
            f.lin_coef.push_back(e.coef);
            f.lin_ent_cons.push_back(c);
        }
        f.lin_off.push_back(lc.offset);
        f.lin_ptr.push_back(static_cast<int>(f.lin_var.size()));
        f.lin_big.push_back(
            static_cast<int>(lc.lin.size()) > cutoff ? 1 : 0);
    }

    auto build_vinc = [m = p.m](const std::vector<int>& vars,
                                std::vector<int>& ptr, std::vector<int>& ent) {
        ptr.assign(m + 1, 0);
        for (int v : vars)
            ++ptr[v + 1];
        for (int v = 0; v < m; ++v)
            ptr[v + 1] += ptr[v];
        ent.resize(vars.size());
        std::vector<int> fill(ptr.begin(), ptr.end() - 1);
        for (std::size_t e = 0; e < vars.size(); ++e)
            ent[fill[vars[e]]++] = static_cast<int>(e);
    };
    build_vinc(f.batch.entry_var, f.lse_vptr, f.lse_vent);
    build_vinc(f.lin_var, f.lin_vptr, f.lin_vent);

    f.total_constraints = f.n_lse + f.n_lin;
    for (int v = 0; v < p.m; ++v) {
        if (p.lower[v] > -kInf)
            ++f.total_constraints;
        if (p.upper[v] < kInf)
            ++f.total_constraints;
    }
    return f;
}

// entry -> owning term, for gradient gathers.
std::vector<int> entry_terms(const Flat& f) {
    std::vector<int> et(f.batch.entry_var.size());
    for (int t = 0; t < f.batch.n_terms(); ++t)
        for (int e = f.batch.term_ptr[t]; e < f.batch.term_ptr[t + 1]; ++e)
            et[e] = t;
    return et;
}

struct Violation {
    double amount = 0.0;
    std::string what;
};

// Worst violation at z; amount <= 0 means strictly feasible everywhere.
Violation worst_violation(const ConvexProgram& p, const Flat& f,
                          std::span<const double> z,
                          std::span<const double> g_lse,
                          std::span<const double> g_lin) {
    Violation v{-kInf, ""};
    auto consider = [&v](double g, const std::string& what) {
        if (g > v.amount)
            v = {g, what};
    };
    for (int c = 0; c < f.n_lse; ++c)
        consider(g_lse[c], "lse '" + p.lse_constraints[c].name + "'");
    for (int c = 0; c < f.n_lin; ++c)
        consider(g_lin[c], "linear '" + p.linear_constraints[c].name + "'");
    for (int i = 0; i < p.m; ++i) {
        if (p.lower[i] > -kInf)
            consider(p.lower[i] - z[i],
                     "lower bound of " + p.var_names[i]);
        if (p.upper[i] < kInf)
            consider(z[i] - p.upper[i],
                     "upper bound of " + p.var_names[i]);
    }
    return v;
}

// Fixed Hessian sparsity: triplet slots owned by one constraint each, plus
// bound and ridge diagonals. Values are refilled every Newton iteration;
// the CSC pattern and the LDLT symbolic factorization are computed once.
struct NewtonSystem {
    int m = 0;
    std::vector<int> row, col;       // fixed slot coordinates, lower triangle
    std::vector<double> val;         // per-iteration values
    std::vector<std::pair<int, int>> lse_range; // slot range per lse cons
    std::vector<std::pair<int, int>> lin_range;
    int diag_begin = 0;              // m slots: bound curvature + ridge
    std::vector<int> slot_pos;       // slot -> index into H value array
    SpMat H;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt;
    std::vector<int> wb_lse, wb_lin; // big constraints handled rank-one

    void add_slot(int r, int c) {
        if (r < c)
            std::swap(r, c);
        row.push_back(r);
        col.push_back(c);
    }

    void build_structure(const ConvexProgram& p, const Flat& f) {
        m = p.m;
        for (int c = 0; c < f.n_lse; ++c) {
            const int begin = static_cast<int>(row.size());
            if (!f.lse_big[c]) {
                const auto& sup = f.lse_support[c];
                for (std::size_t a = 0; a < sup.size(); ++a)
                    for (std::size_t b = 0; b <= a; ++b)
                        add_slot(sup[a], sup[b]);
            } else {
                wb_lse.push_back(c);
                for (int t = f.batch.cons_ptr[c]; t < f.batch.cons_ptr[c + 1];
                     ++t)
                    for (int e1 = f.batch.term_ptr[t];
                         e1 < f.batch.term_ptr[t + 1]; ++e1)
                        for (int e2 = f.batch.term_ptr[t]; e2 <= e1; ++e2)
                            add_slot(f.batch.entry_var[e1],
                                     f.batch.entry_var[e2]);
            }
            lse_range.emplace_back(begin, static_cast<int>(row.size()));
        }
        for (int c = 0; c < f.n_lin; ++c) {
            const int begin = static_cast<int>(row.size());
            if (!f.lin_big[c]) {
                for (int e1 = f.lin_ptr[c]; e1 < f.lin_ptr[c + 1]; ++e1)
                    for (int e2 = f.lin_ptr[c]; e2 <= e1; ++e2)
                        add_slot(f.lin_var[e1], f.lin_var[e2]);
            } else {
                wb_lin.push_back(c);
            }
            lin_range.emplace_back(begin, static_cast<int>(row.size()));
        }
        diag_begin = static_cast<int>(row.size());
        for (int v = 0; v < m; ++v)
            add_slot(v, v);
        val.assign(row.size(), 0.0);

        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(row.size());
        for (std::size_t s = 0; s < row.size(); ++s)
            trips.emplace_back(row[s], col[s], 1.0);
        H.resize(m, m);
        H.setFromTriplets(trips.begin(), trips.end());
        H.makeCompressed();

        // slot -> compressed position, via binary search inside the column
        slot_pos.resize(row.size());
        const int* outer = H.outerIndexPtr();
        const int* inner = H.innerIndexPtr();
        for (std::size_t s = 0; s < row.size(); ++s) {
            const int c = col[s];
            const int* b = inner + outer[c];
            const int* e = inner + outer[c + 1];
            const int* it = std::lower_bound(b, e, row[s]);
            assert(it != e && *it == row[s]);
            slot_pos[s] = static_cast<int>(outer[c] + (it - b));
        }
        ldlt.analyzePattern(H);
    }

    bool refactor() {
        double* hv = H.valuePtr();
        std::fill(hv, hv + H.nonZeros(), 0.0);
        for (std::size_t s = 0; s < val.size(); ++s)
            hv[slot_pos[s]] += val[s];
        ldlt.factorize(H);
        return ldlt.info() == Eigen::Success;
    }
};

struct BarrierEval {
    std::vector<double> g_lse, sigma, g_lin;
    double barrier = 0.0; // sum of -log terms
    bool feasible = true;
};

void eval_point(const ConvexProgram& p, const Flat& f,
                std::span<const double> z, BarrierEval& ev, bool want_sigma) {
    ev.g_lse.resize(f.n_lse);
    ev.g_lin.resize(f.n_lin);
    if (want_sigma)
        ev.sigma.resize(f.batch.n_terms());
    kernels::lse_eval(f.batch, z, ev.g_lse,
                      want_sigma ? std::span<double>(ev.sigma)
                                 : std::span<double>());
    for (int c = 0; c < f.n_lin; ++c) {
        double s = f.lin_off[c];
        for (int e = f.lin_ptr[c]; e < f.lin_ptr[c + 1]; ++e)
            s += f.lin_coef[e] * z[f.lin_var[e]];
        ev.g_lin[c] = s;
    }
    ev.feasible = true;
    ev.barrier = 0.0;
    for (double g : ev.g_lse) {
        if (!(g < 0.0)) {
            ev.feasible = false;
            return;
        }
        ev.barrier -= std::log(-g);
    }
    for (double g : ev.g_lin) {
        if (!(g < 0.0)) {
            ev.feasible = false;
            return;
        }
        ev.barrier -= std::log(-g);
    }
    for (int v = 0; v < p.m; ++v) {
        if (p.lower[v] > -kInf) {
            const double d = z[v] - p.lower[v];
            if (!(d > 0.0)) {
                ev.feasible = false;
                return;
            }
            ev.barrier -= std::log(d);
        }
        if (p.upper[v] < kInf) {
            const double d = p.upper[v] - z[v];
            if (!(d > 0.0)) {
                ev.feasible = false;
                return;
            }
            ev.barrier -= std::log(d);
        }
    }
}

double objective_of(const ConvexProgram& p, std::span<const double> z) {
    double s = 0.0;
    for (int v = 0; v < p.m; ++v)
        s += p.objective[v] * z[v];
    return s;
}

} // namespace

Solution solve(const ConvexProgram& p, const SolverSettings& st) {
    p.require_well_formed();
    if (static_cast<int>(p.initial_point.size()) != p.m)
        throw DomainError(
            "solver: a strictly feasible initial point of size m is required");

    Solution sol;
    sol.z = p.initial_point;
    const Flat f = flatten(p, st.clique_cutoff);
    const std::vector<int> ent_term = entry_terms(f);

    BarrierEval ev;
    eval_point(p, f, sol.z, ev, true);
    if (!ev.feasible) {
        const Violation v =
            worst_violation(p, f, sol.z, ev.g_lse, ev.g_lin);
        sol.status = SolveStatus::Infeasible;
        std::ostringstream os;
        os << "initial point violates " << v.what << " by " << v.amount;
        sol.message = os.str();
        sol.objective_value = objective_of(p, sol.z);
        sol.kkt.primal_feas = std::max(0.0, v.amount);
        return sol;
    }

    NewtonSystem ns;
    ns.build_structure(p, f);

    std::vector<double> inv_ng(f.n_lse), inv_ng_lin(f.n_lin);
    std::vector<double> grad(p.m), ztry(p.m);
    std::vector<Eigen::VectorXd> wb_vec;
    std::vector<double> wb_weight;
    BarrierEval ev_try;

    double mu = std::max(st.mu0, st.mu_min);
    const double mu_min = st.mu_min;
    bool converged_final = false;
    bool numerical_failure = false;
    std::string fail_msg;

    auto inner_tol = [&](double m_) {
        return std::max(0.5 * st.tol_opt, 0.1 * m_);
    };

    // compute grad of c'z + mu * barrier at current ev
    auto compute_grad = [&]() {
        for (int c = 0; c < f.n_lse; ++c)
            inv_ng[c] = 1.0 / (-ev.g_lse[c]);
        for (int c = 0; c < f.n_lin; ++c)
            inv_ng_lin[c] = 1.0 / (-ev.g_lin[c]);
        const auto& z = sol.z;
#ifdef SPMPC_HAVE_OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int v = 0; v < p.m; ++v) {
            double gsum = p.objective[v];
            for (int k = f.lse_vptr[v]; k < f.lse_vptr[v + 1]; ++k) {
                const int e = f.lse_vent[k];
                const int t = ent_term[e];
                gsum += mu * inv_ng[f.term_cons[t]] * ev.sigma[t] *
                        f.batch.entry_coef[e];
            }
            for (int k = f.lin_vptr[v]; k < f.lin_vptr[v + 1]; ++k) {
                const int e = f.lin_vent[k];
                gsum += mu * inv_ng_lin[f.lin_ent_cons[e]] * f.lin_coef[e];
            }
            if (p.lower[v] > -kInf)
                gsum -= mu / (z[v] - p.lower[v]);
            if (p.upper[v] < kInf)
                gsum += mu / (p.upper[v] - z[v]);
            grad[v] = gsum;
        }
    };

    auto assemble_hessian = [&](double ridge) {
        const auto& z = sol.z;
#ifdef SPMPC_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 16)
#endif
        for (int c = 0; c < f.n_lse; ++c) {
            const double w1 = mu * inv_ng[c]; // mu / (-g)
            const double g = ev.g_lse[c];
            const double theta = mu * (1.0 + g) / (g * g);
            auto [s0, s1] = ns.lse_range[c];
            if (!f.lse_big[c]) {
                const auto& sup = f.lse_support[c];
                const int nsup = static_cast<int>(sup.size());
                std::vector<double> su(nsup, 0.0);
                std::vector<double> hloc(
                    static_cast<std::size_t>(nsup) * nsup, 0.0);
                std::vector<int> gidx;
                for (int t = f.batch.cons_ptr[c]; t < f.batch.cons_ptr[c + 1];
                     ++t) {
                    const double sg = ev.sigma[t];
                    gidx.clear();
                    for (int e = f.batch.term_ptr[t];
                         e < f.batch.term_ptr[t + 1]; ++e) {
                        const int li = static_cast<int>(
                            std::lower_bound(sup.begin(), sup.end(),
                                             f.batch.entry_var[e]) -
                            sup.begin());
                        gidx.push_back(li);
                    }
                    int a = 0;
                    for (int e1 = f.batch.term_ptr[t];
                         e1 < f.batch.term_ptr[t + 1]; ++e1, ++a) {
                        const double c1 = f.batch.entry_coef[e1];
                        su[gidx[a]] += sg * c1;
                        int b = 0;
                        for (int e2 = f.batch.term_ptr[t];
                             e2 < f.batch.term_ptr[t + 1]; ++e2, ++b)
                            hloc[gidx[a] * nsup + gidx[b]] +=
                                sg * c1 * f.batch.entry_coef[e2];
                    }
                }
                // hloc = sum sigma a a', su = sum sigma a  (times mu/(-g)
                // and the rank-one theta correction below)
                int s = s0;
                for (int a = 0; a < nsup; ++a)
                    for (int b = 0; b <= a; ++b, ++s)
                        ns.val[s] =
                            w1 * hloc[a * nsup + b] + theta * su[a] * su[b];
                assert(s == s1);
                (void)s1;
            } else {
                int s = s0;
                for (int t = f.batch.cons_ptr[c]; t < f.batch.cons_ptr[c + 1];
                     ++t) {
                    const double sg = ev.sigma[t];
                    for (int e1 = f.batch.term_ptr[t];
                         e1 < f.batch.term_ptr[t + 1]; ++e1)
                        for (int e2 = f.batch.term_ptr[t]; e2 <= e1;
                             ++e2, ++s)
                            ns.val[s] = w1 * sg * f.batch.entry_coef[e1] *
                                        f.batch.entry_coef[e2];
                }
                assert(s == s1);
                (void)s1;
            }
        }
        for (int c = 0; c < f.n_lin; ++c) {
            if (f.lin_big[c])
                continue;
            auto [s0, s1] = ns.lin_range[c];
            const double w = mu * inv_ng_lin[c] * inv_ng_lin[c]; // mu / g^2
            int s = s0;
            for (int e1 = f.lin_ptr[c]; e1 < f.lin_ptr[c + 1]; ++e1)
                for (int e2 = f.lin_ptr[c]; e2 <= e1; ++e2, ++s)
                    ns.val[s] = w * f.lin_coef[e1] * f.lin_coef[e2];
            assert(s == s1);
            (void)s1;
        }
#ifdef SPMPC_HAVE_OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int v = 0; v < p.m; ++v) {
            double d = ridge;
            if (p.lower[v] > -kInf) {
                const double dv = z[v] - p.lower[v];
                d += mu / (dv * dv);
            }
            if (p.upper[v] < kInf) {
                const double dv = p.upper[v] - z[v];
                d += mu / (dv * dv);
            }
            ns.val[ns.diag_begin + v] = d;
        }

        // Rank-one corrections for large-support constraints.
        wb_vec.clear();
        wb_weight.clear();
        for (int c : ns.wb_lse) {
            const double g = ev.g_lse[c];
            const double theta = mu * (1.0 + g) / (g * g);
            if (std::abs(theta) < 1e-300)
                continue;
            Eigen::VectorXd v = Eigen::VectorXd::Zero(p.m);
            for (int t = f.batch.cons_ptr[c]; t < f.batch.cons_ptr[c + 1]; ++t)
                for (int e = f.batch.term_ptr[t]; e < f.batch.term_ptr[t + 1];
                     ++e)
                    v[f.batch.entry_var[e]] +=
                        ev.sigma[t] * f.batch.entry_coef[e];
            wb_vec.push_back(std::move(v));
            wb_weight.push_back(theta);
        }
        for (int c : ns.wb_lin) {
            const double w = mu * inv_ng_lin[c] * inv_ng_lin[c];
            Eigen::VectorXd v = Eigen::VectorXd::Zero(p.m);
            for (int e = f.lin_ptr[c]; e < f.lin_ptr[c + 1]; ++e)
                v[f.lin_var[e]] += f.lin_coef[e];
            wb_vec.push_back(std::move(v));
            wb_weight.push_back(w);
        }
    };

    // Solve (H + sum w v v') dz = -grad via the factorized sparse part and
    // a small dense Woodbury system for the rank-one corrections.
    auto newton_direction = [&](Eigen::VectorXd& dz) -> bool {
        Eigen::VectorXd rhs(p.m);
        for (int v = 0; v < p.m; ++v)
            rhs[v] = -grad[v];
        Eigen::VectorXd x0 = ns.ldlt.solve(rhs);
        if (!x0.allFinite())
            return false;
        const int k = static_cast<int>(wb_vec.size());
        if (k == 0) {
            dz = x0;
            return true;
        }
        Eigen::MatrixXd X(p.m, k);
        for (int i = 0; i < k; ++i) {
            X.col(i) = ns.ldlt.solve(wb_vec[i]);
            if (!X.col(i).allFinite())
                return false;
        }
        Eigen::MatrixXd M(k, k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
                M(i, j) = (i == j ? 1.0 / wb_weight[i] : 0.0) +
                          wb_vec[i].dot(X.col(j));
        Eigen::VectorXd rhs_s(k);
        for (int i = 0; i < k; ++i)
            rhs_s[i] = wb_vec[i].dot(x0);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
        if (!lu.isInvertible())
            return false;
        Eigen::VectorXd y = lu.solve(rhs_s);
        dz = x0 - X * y;
        return dz.allFinite();
    };

    double f_cur = objective_of(p, sol.z) + mu * ev.barrier;
    while (true) {
        // ---- inner Newton loop at the current mu
        bool stage_done = false;
        while (!stage_done) {
            compute_grad();
            double gn = 0.0;
            for (double g : grad)
                gn = std::max(gn, std::abs(g));
            if (gn <= inner_tol(mu)) {
                stage_done = true;
                break;
            }
            if (sol.newton_iters >= st.max_newton)
                break;

            Eigen::VectorXd dz;
            bool ok = false;
            double ridge = 1e-13;
            for (int attempt = 0; attempt < 4 && !ok; ++attempt) {
                assemble_hessian(ridge);
                if (ns.refactor() && newton_direction(dz)) {
                    double dd = 0.0;
                    for (int v = 0; v < p.m; ++v)
                        dd += grad[v] * dz[v];
                    ok = dd < 0.0;
                }
                ridge *= 1e4;
            }
            if (!ok) {
                numerical_failure = true;
                fail_msg = "Newton system not solvable as a descent direction";
                break;
            }

            double dd = 0.0;
            for (int v = 0; v < p.m; ++v)
                dd += grad[v] * dz[v];
            double step = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < 70; ++ls) {
                for (int v = 0; v < p.m; ++v)
                    ztry[v] = sol.z[v] + step * dz[v];
                eval_point(p, f, ztry, ev_try, false);
                if (ev_try.feasible) {
                    const double f_try =
                        objective_of(p, ztry) + mu * ev_try.barrier;
                    if (f_try <= f_cur + 1e-4 * step * dd) {
                        sol.z.swap(ztry);
                        f_cur = f_try;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            ++sol.newton_iters;
            if (!accepted) {
                // Flat to FP precision. Near-converged stages pass; anything
                // else is a genuine numerical failure.
                if (gn <= 10.0 * inner_tol(mu)) {
                    stage_done = true;
                } else {
                    numerical_failure = true;
                    fail_msg = "line search stalled";
                }
                break;
            }
            eval_point(p, f, sol.z, ev, true);
        }
        ++sol.barrier_stages;
        if (numerical_failure || sol.newton_iters >= st.max_newton) {
            if (!stage_done)
                break;
        }
        if (mu <= mu_min * (1.0 + 1e-12)) {
            converged_final = stage_done;
            break;
        }
        mu = std::max(mu * st.mu_factor, mu_min);
        f_cur = objective_of(p, sol.z) + mu * ev.barrier;
    }

    sol.mu_final = mu;
    sol.objective_value = objective_of(p, sol.z);

    // Multipliers and residuals at the final point.
    eval_point(p, f, sol.z, ev, true);
    sol.lse_multipliers.resize(f.n_lse);
    sol.lin_multipliers.resize(f.n_lin);
    sol.lower_multipliers.assign(p.m, 0.0);
    sol.upper_multipliers.assign(p.m, 0.0);
    double comp = 0.0;
    for (int c = 0; c < f.n_lse; ++c) {
        sol.lse_multipliers[c] = mu / (-ev.g_lse[c]);
        comp += mu;
    }
    for (int c = 0; c < f.n_lin; ++c) {
        sol.lin_multipliers[c] = mu / (-ev.g_lin[c]);
        comp += mu;
    }
    for (int v = 0; v < p.m; ++v) {
        if (p.lower[v] > -kInf) {
            sol.lower_multipliers[v] = mu / (sol.z[v] - p.lower[v]);
            comp += mu;
        }
        if (p.upper[v] < kInf) {
            sol.upper_multipliers[v] = mu / (p.upper[v] - sol.z[v]);
            comp += mu;
        }
    }
    sol.kkt.complementarity = comp;
    compute_grad();
    double gn = 0.0;
    for (double g : grad)
        gn = std::max(gn, std::abs(g));
    sol.kkt.stationarity = gn;
    const Violation v = worst_violation(p, f, sol.z, ev.g_lse, ev.g_lin);
    sol.kkt.primal_feas = std::max(0.0, v.amount);

    if (numerical_failure) {
        sol.status = SolveStatus::NumericalFailure;
        sol.message = fail_msg;
    } else if (!converged_final) {
        sol.status = SolveStatus::MaxIter;
        sol.message = "Newton iteration cap reached";
    } else if (sol.kkt.primal_feas <= st.tol_feas &&
               sol.kkt.stationarity <= st.tol_opt) {
        sol.status = SolveStatus::Optimal;
    } else {
        sol.status = SolveStatus::NumericalFailure;
        std::ostringstream os;
        os << "converged point misses tolerances (feas "
           << sol.kkt.primal_feas << ", stat " << sol.kkt.stationarity << ")";
        sol.message = os.str();
    }
    return sol;
}

Solution solve(const ConvexProgram& p, double tol_feas, double tol_opt) {
    SolverSettings st;
    st.tol_feas = tol_feas;
    st.tol_opt = tol_opt;
    return solve(p, st);
}

KktResiduals kkt_residuals(const ConvexProgram& p, std::span<const double> z) {
    p.require_well_formed();
    KktResiduals r;
    // Centrality direction q = sum grad(barrier) restricted to satisfied
    // constraints; the best scalar multiple of it plays the multipliers.
    std::vector<double> q(p.m, 0.0);
    int active = 0;
    for (const auto& c : p.lse_constraints) {
        const double g = eval_lse(c, z);
        r.primal_feas = std::max(r.primal_feas, g);
        if (g < 0.0) {
            ++active;
            // softmax weights
            double mx = -kInf;
            std::vector<double> u(c.terms.size());
            for (std::size_t t = 0; t < c.terms.size(); ++t) {
                u[t] = c.terms[t].offset;
                for (const auto& e : c.terms[t].lin)
                    u[t] += e.coef * z[e.var];
                mx = std::max(mx, u[t]);
            }
            double s = 0.0;
            for (double& ut : u) {
                ut = std::exp(ut - mx);
                s += ut;
            }
            for (std::size_t t = 0; t < c.terms.size(); ++t)
                for (const auto& e : c.terms[t].lin)
                    q[e.var] += (u[t] / s) * e.coef / (-g);
        }
    }
    for (const auto& c : p.linear_constraints) {
        const double g = eval_lin(c, z);
        r.primal_feas = std::max(r.primal_feas, g);
        if (g < 0.0) {
            ++active;
            for (const auto& e : c.lin)
                q[e.var] += e.coef / (-g);
        }
    }
    for (int v = 0; v < p.m; ++v) {
        if (p.lower[v] > -kInf) {
            const double d = z[v] - p.lower[v];
            r.primal_feas = std::max(r.primal_feas, -d);
            if (d > 0.0) {
                ++active;
                q[v] -= 1.0 / d;
            }
        }
        if (p.upper[v] < kInf) {
            const double d = p.upper[v] - z[v];
            r.primal_feas = std::max(r.primal_feas, -d);
            if (d > 0.0) {
                ++active;
                q[v] += 1.0 / d;
            }
        }
    }
    double qq = 0.0, cq = 0.0;
    for (int v = 0; v < p.m; ++v) {
        qq += q[v] * q[v];
        cq += p.objective[v] * q[v];
    }
    const double theta = qq > 0.0 ? std::max(0.0, -cq / qq) : 0.0;
    double st = 0.0;
    for (int v = 0; v < p.m; ++v)
        st = std::max(st, std::abs(p.objective[v] + theta * q[v]));
    r.stationarity = st;
    r.complementarity = theta * active;
    r.primal_feas = std::max(0.0, r.primal_feas);
    return r;
}

KktResiduals kkt_residuals(const ConvexProgram& p, const Solution& sol) {
    p.require_well_formed();
    KktResiduals r;
    std::vector<double> lagr(p.objective.begin(), p.objective.end());
    double comp = 0.0;
    for (std::size_t c = 0; c < p.lse_constraints.size(); ++c) {
        const auto& lc = p.lse_constraints[c];
        const double g = eval_lse(lc, sol.z);
        r.primal_feas = std::max(r.primal_feas, g);
        const double lam = sol.lse_multipliers[c];
        comp += lam * (-g);
        double mx = -kInf;
        std::vector<double> u(lc.terms.size());
        for (std::size_t t = 0; t < lc.terms.size(); ++t) {
            u[t] = lc.terms[t].offset;
            for (const auto& e : lc.terms[t].lin)
                u[t] += e.coef * sol.z[e.var];
            mx = std::max(mx, u[t]);
        }
        double s = 0.0;
        for (double& ut : u) {
            ut = std::exp(ut - mx);
            s += ut;
        }
        for (std::size_t t = 0; t < lc.terms.size(); ++t)
            for (const auto& e : lc.terms[t].lin)
                lagr[e.var] += lam * (u[t] / s) * e.coef;
    }
    for (std::size_t c = 0; c < p.linear_constraints.size(); ++c) {
        const double g = eval_lin(p.linear_constraints[c], sol.z);
        r.primal_feas = std::max(r.primal_feas, g);
        const double lam = sol.lin_multipliers[c];
        comp += lam * (-g);
        for (const auto& e : p.linear_constraints[c].lin)
            lagr[e.var] += lam * e.coef;
    }
    for (int v = 0; v < p.m; ++v) {
        if (p.lower[v] > -kInf) {
            r.primal_feas = std::max(r.primal_feas, p.lower[v] - sol.z[v]);
            lagr[v] -= sol.lower_multipliers[v];
            comp += sol.lower_multipliers[v] * (sol.z[v] - p.lower[v]);
        }
        if (p.upper[v] < kInf) {
            r.primal_feas = std::max(r.primal_feas, sol.z[v] - p.upper[v]);
            lagr[v] += sol.upper_multipliers[v];
            comp += sol.upper_multipliers[v] * (p.upper[v] - sol.z[v]);
        }
    }
    for (double g : lagr)
        r.stationarity = std::max(r.stationarity, std::abs(g));
    r.complementarity = comp;
    r.primal_feas = std::max(0.0, r.primal_feas);
    return r;
}

void dump_program_json(const ConvexProgram& p, std::ostream& out) {
    nlohmann::json doc;
    doc["m"] = p.m;
    doc["objective"] = p.objective;
    doc["var_names"] = p.var_names;
    auto bound = [](double b) -> nlohmann::json {
        if (b == kInf)
            return "+inf";
        if (b == -kInf)
            return "-inf";
        return b;
    };
    doc["lower"] = nlohmann::json::array();
    doc["upper"] = nlohmann::json::array();
    for (int v = 0; v < p.m; ++v) {
        doc["lower"].push_back(bound(p.lower[v]));
        doc["upper"].push_back(bound(p.upper[v]));
    }
    doc["lse_constraints"] = nlohmann::json::array();
    for (const auto& c : p.lse_constraints) {
        nlohmann::json jc;
        jc["name"] = c.name;
        jc["terms"] = nlohmann::json::array();
        for (const auto& t : c.terms) {
            nlohmann::json jt;
            jt["offset"] = t.offset;
            jt["lin"] = nlohmann::json::array();
            for (const auto& e : t.lin)
                jt["lin"].push_back({{"var", e.var}, {"coef", e.coef}});
            jc["terms"].push_back(jt);
        }
        doc["lse_constraints"].push_back(jc);
    }
    doc["linear_constraints"] = nlohmann::json::array();
    for (const auto& c : p.linear_constraints) {
        nlohmann::json jc;
        jc["name"] = c.name;
        jc["offset"] = c.offset;
        jc["lin"] = nlohmann::json::array();
        for (const auto& e : c.lin)
            jc["lin"].push_back({{"var", e.var}, {"coef", e.coef}});
        doc["linear_constraints"].push_back(jc);
    }
    if (!p.initial_point.empty())
        doc["initial_point"] = p.initial_point;
    out << doc.dump(2) << "\n";
}

} // namespace spmpc
