#include "spmpc/kernels.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

// Serial reference implementations. These are the semantics the OpenMP
// versions are tested against.

namespace spmpc::kernels::detail {

void spmv_serial(const Csr& a, std::span<const double> x, std::span<double> y) {
    assert(static_cast<int>(x.size()) == a.cols);
    assert(static_cast<int>(y.size()) == a.rows);
    for (int r = 0; r < a.rows; ++r) {
        double s = 0.0;
        for (int k = a.ptr[r]; k < a.ptr[r + 1]; ++k)
            s += a.val[k] * x[a.idx[k]];
        y[r] = s;
    }
}

void sis_step_serial(std::span<const double> diag, const Csr& offdiag,
                     std::span<const double> x, std::span<double> out) {
    for (int r = 0; r < offdiag.rows; ++r) {
        double s = 0.0;
        for (int k = offdiag.ptr[r]; k < offdiag.ptr[r + 1]; ++k)
            s += offdiag.val[k] * x[offdiag.idx[k]];
        out[r] = diag[r] * x[r] + (1.0 - x[r]) * s;
    }
}

void lin_step_serial(std::span<const double> diag, const Csr& offdiag,
                     std::span<const double> x, std::span<double> out) {
    for (int r = 0; r < offdiag.rows; ++r) {
        double s = 0.0;
        for (int k = offdiag.ptr[r]; k < offdiag.ptr[r + 1]; ++k)
            s += offdiag.val[k] * x[offdiag.idx[k]];
        out[r] = diag[r] * x[r] + s;
    }
}

double lse_one(const LseBatch& b, int c, std::span<const double> z,
               std::span<double> sigma) {
    const int t0 = b.cons_ptr[c];
    const int t1 = b.cons_ptr[c + 1];
    double m = -std::numeric_limits<double>::infinity();
    for (int t = t0; t < t1; ++t) {
        double u = b.term_off[t];
        for (int e = b.term_ptr[t]; e < b.term_ptr[t + 1]; ++e)
            u += b.entry_coef[e] * z[b.entry_var[e]];
        if (!sigma.empty())
            sigma[t] = u; // stash the exponent, turned into a weight below
        m = std::max(m, u);
    }
    double s = 0.0;
    if (sigma.empty()) {
        for (int t = t0; t < t1; ++t) {
            double u = b.term_off[t];
            for (int e = b.term_ptr[t]; e < b.term_ptr[t + 1]; ++e)
                u += b.entry_coef[e] * z[b.entry_var[e]];
            s += std::exp(u - m);
        }
    } else {
        for (int t = t0; t < t1; ++t) {
            sigma[t] = std::exp(sigma[t] - m);
            s += sigma[t];
        }
        for (int t = t0; t < t1; ++t)
            sigma[t] /= s;
    }
    return m + std::log(s);
}

void lse_eval_serial(const LseBatch& b, std::span<const double> z,
                     std::span<double> g, std::span<double> sigma) {
    for (int c = 0; c < b.n_cons(); ++c)
        g[c] = lse_one(b, c, z, sigma);
}

} // namespace spmpc::kernels::detail
