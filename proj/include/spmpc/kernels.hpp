#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Data-parallel inner loops shared by the simulator and the optimizer.
// Every kernel exists in two implementations: a serial reference and an
// OpenMP version. The two must agree bitwise for kernels without
// reductions (spmv, sis_step, lse_eval) because each output element is
// computed independently; tests compare them on random inputs and the
// bench target times both.

namespace spmpc::kernels {

enum class Backend { Serial, OpenMP };

/// Process-wide default backend. OpenMP when compiled with it, serial
/// otherwise.
Backend& backend();

/// True when the library was built with OpenMP support.
bool openmp_available();

/// Number of threads the OpenMP backend would use.
int thread_count();

/// Compressed sparse row matrix. The system matrices store their diagonal
/// separately, so instances here are usually the off-diagonal part.
struct Csr {
    int rows = 0;
    int cols = 0;
    std::vector<int> ptr;    // size rows + 1
    std::vector<int> idx;    // column index per entry
    std::vector<double> val; // value per entry

    std::size_t nnz() const { return val.size(); }
};

/// y = a * x.
void spmv(const Csr& a, std::span<const double> x, std::span<double> y,
          Backend be);
void spmv(const Csr& a, std::span<const double> x, std::span<double> y);

/// One step of the mean-field SIS map with split diagonal:
/// out_i = diag_i * x_i + (1 - x_i) * (offdiag * x)_i.
void sis_step(std::span<const double> diag, const Csr& offdiag,
              std::span<const double> x, std::span<double> out, Backend be);
void sis_step(std::span<const double> diag, const Csr& offdiag,
              std::span<const double> x, std::span<double> out);

/// Linear envelope step: out = diag .* x + offdiag * x.
void lin_step(std::span<const double> diag, const Csr& offdiag,
              std::span<const double> x, std::span<double> out, Backend be);
void lin_step(std::span<const double> diag, const Csr& offdiag,
              std::span<const double> x, std::span<double> out);

/// Flattened batch of log-sum-exp expressions
///   g_c(z) = log sum_t exp(offset_t + sum_e coef_e * z[var_e]),
/// stored CSR-style on two levels: constraints -> terms -> linear entries.
struct LseBatch {
    std::vector<int> cons_ptr;     // size n_cons + 1, ranges into terms
    std::vector<double> term_off;  // per term
    std::vector<int> term_ptr;     // size n_terms + 1, ranges into entries
    std::vector<int> entry_var;    // per entry
    std::vector<double> entry_coef;

    int n_cons() const { return static_cast<int>(cons_ptr.size()) - 1; }
    int n_terms() const { return static_cast<int>(term_off.size()); }
};

/// Evaluate every constraint of the batch at z using the max-shifted form
/// (safe for term exponents down to -700 and below). Writes g per
/// constraint and, when sigma is non-empty, the softmax weight per term.
void lse_eval(const LseBatch& b, std::span<const double> z,
              std::span<double> g, std::span<double> sigma, Backend be);
void lse_eval(const LseBatch& b, std::span<const double> z,
              std::span<double> g, std::span<double> sigma);

} // namespace spmpc::kernels
