#include "spmpc/kernels.hpp"

#include <cassert>

#ifdef SPMPC_HAVE_OPENMP
#include <omp.h>
#endif

// OpenMP kernels plus the backend dispatcher. Each output element is owned
// by exactly one iteration, so results match the serial reference bitwise
// for any thread count.

namespace spmpc::kernels {

namespace detail {
void spmv_serial(const Csr&, std::span<const double>, std::span<double>);
void sis_step_serial(std::span<const double>, const Csr&,
                     std::span<const double>, std::span<double>);
void lin_step_serial(std::span<const double>, const Csr&,
                     std::span<const double>, std::span<double>);
void lse_eval_serial(const LseBatch&, std::span<const double>,
                     std::span<double>, std::span<double>);
double lse_one(const LseBatch&, int, std::span<const double>,
               std::span<double>);
} // namespace detail

Backend& backend() {
#ifdef SPMPC_HAVE_OPENMP
    static Backend be = Backend::OpenMP;
#else
    static Backend be = Backend::Serial;
#endif
    return be;
}

bool openmp_available() {
#ifdef SPMPC_HAVE_OPENMP
    return true;
#else
    return false;
#endif
}

int thread_count() {
#ifdef SPMPC_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void spmv(const Csr& a, std::span<const double> x, std::span<double> y,
          Backend be) {
    if (be == Backend::Serial) {
        detail::spmv_serial(a, x, y);
        return;
    }
#ifdef SPMPC_HAVE_OPENMP
#pragma omp parallel for schedule(static)
    for (int r = 0; r < a.rows; ++r) {
        double s = 0.0;
        for (int k = a.ptr[r]; k < a.ptr[r + 1]; ++k)
            s += a.val[k] * x[a.idx[k]];
        y[r] = s;
    }
#else
    detail::spmv_serial(a, x, y);
#endif
}

void sis_step(std::span<const double> diag, const Csr& offdiag,
              std::span<const double> x, std::span<double> out, Backend be) {
    if (be == Backend::Serial) {
        detail::sis_step_serial(diag, offdiag, x, out);
        return;
    }
#ifdef SPMPC_HAVE_OPENMP
#pragma omp parallel for schedule(static)
    for (int r = 0; r < offdiag.rows; ++r) {
        double s = 0.0;
        for (int k = offdiag.ptr[r]; k < offdiag.ptr[r + 1]; ++k)
            s += offdiag.val[k] * x[offdiag.idx[k]];
        out[r] = diag[r] * x[r] + (1.0 - x[r]) * s;
    }
#else
    detail::sis_step_serial(diag, offdiag, x, out);
#endif
}

void lin_step(std::span<const double> diag, const Csr& offdiag,
              std::span<const double> x, std::span<double> out, Backend be) {
    if (be == Backend::Serial) {
        detail::lin_step_serial(diag, offdiag, x, out);
        return;
    }
#ifdef SPMPC_HAVE_OPENMP
#pragma omp parallel for schedule(static)
    for (int r = 0; r < offdiag.rows; ++r) {
        double s = 0.0;
        for (int k = offdiag.ptr[r]; k < offdiag.ptr[r + 1]; ++k)
            s += offdiag.val[k] * x[offdiag.idx[k]];
        out[r] = diag[r] * x[r] + s;
    }
#else
    detail::lin_step_serial(diag, offdiag, x, out);
#endif
}

void lse_eval(const LseBatch& b, std::span<const double> z,
              std::span<double> g, std::span<double> sigma, Backend be) {
    assert(static_cast<int>(g.size()) == b.n_cons());
    assert(sigma.empty() || static_cast<int>(sigma.size()) == b.n_terms());
    if (be == Backend::Serial) {
        detail::lse_eval_serial(b, z, g, sigma);
        return;
    }
#ifdef SPMPC_HAVE_OPENMP
    const int nc = b.n_cons();
#pragma omp parallel for schedule(static)
    for (int c = 0; c < nc; ++c)
        g[c] = detail::lse_one(b, c, z, sigma);
#else
    detail::lse_eval_serial(b, z, g, sigma);
#endif
}

void spmv(const Csr& a, std::span<const double> x, std::span<double> y) {
    spmv(a, x, y, backend());
}
void sis_step(std::span<const double> diag, const Csr& offdiag,
              std::span<const double> x, std::span<double> out) {
    sis_step(diag, offdiag, x, out, backend());
}
void lin_step(std::span<const double> diag, const Csr& offdiag,
              std::span<const double> x, std::span<double> out) {
    lin_step(diag, offdiag, x, out, backend());
}
void lse_eval(const LseBatch& b, std::span<const double> z,
              std::span<double> g, std::span<double> sigma) {
    lse_eval(b, z, g, sigma, backend());
}

} // namespace spmpc::kernels
