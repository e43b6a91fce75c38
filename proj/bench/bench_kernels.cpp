// Timing comparison of the serial reference kernels against the OpenMP
// versions, on a grid-shaped sparse system and a solver-shaped log-sum-exp
// batch. Prints one line per (kernel, backend) pair.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "spmpc/kernels.hpp"

using namespace spmpc;
using Clock = std::chrono::steady_clock;

namespace {

kernels::Csr grid_offdiag(int rows, int cols, std::mt19937_64& rng) {
    const int n = rows * cols;
    kernels::Csr a;
    a.rows = a.cols = n;
    a.ptr.assign(n + 1, 0);
    auto val = [&rng]() {
        return 0.02 + 0.01 * (static_cast<double>(rng() >> 40) / (1 << 24));
    };
    std::vector<std::vector<std::pair<int, double>>> rowsv(n);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0)
                        continue;
                    const int r2 = r + dr, c2 = c + dc;
                    if (r2 < 0 || r2 >= rows || c2 < 0 || c2 >= cols)
                        continue;
                    rowsv[r * cols + c].push_back({r2 * cols + c2, val()});
                }
    for (int i = 0; i < n; ++i) {
        a.ptr[i + 1] = a.ptr[i] + static_cast<int>(rowsv[i].size());
        for (auto [j, v] : rowsv[i]) {
            a.idx.push_back(j);
            a.val.push_back(v);
        }
    }
    return a;
}

kernels::LseBatch bellman_shaped_batch(int n_cons, int terms_per,
                                       int vars_per_term, int n_vars,
                                       std::mt19937_64& rng) {
    kernels::LseBatch b;
    b.cons_ptr.push_back(0);
    for (int c = 0; c < n_cons; ++c) {
        for (int t = 0; t < terms_per; ++t) {
            b.term_off.push_back(-1.0 -
                                 0.1 * static_cast<double>(rng() % 100));
            b.term_ptr.push_back(static_cast<int>(b.entry_var.size()));
            for (int e = 0; e < vars_per_term; ++e) {
                b.entry_var.push_back(static_cast<int>(rng() % n_vars));
                b.entry_coef.push_back(e == 0 ? 1.0 : -1.0);
            }
        }
        b.cons_ptr.push_back(static_cast<int>(b.term_off.size()));
    }
    b.term_ptr.push_back(static_cast<int>(b.entry_var.size()));
    return b;
}

template <typename F>
double time_ms(int reps, F&& body) {
    body(); // warm-up
    const auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r)
        body();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* kernel, double serial_ms, double omp_ms) {
    std::printf("%-10s serial %9.3f ms   openmp %9.3f ms   speedup %.2fx\n",
                kernel, serial_ms, omp_ms, serial_ms / omp_ms);
}

} // namespace

int main() {
    std::mt19937_64 rng(42);
    const int rows = 600, cols = 600; // n = 360k, ~2.9M nnz
    const int n = rows * cols;
    std::printf("threads available: %d (openmp %s)\n",
                kernels::thread_count(),
                kernels::openmp_available() ? "on" : "off");

    const kernels::Csr a = grid_offdiag(rows, cols, rng);
    std::vector<double> diag(n, 0.95), x(n), y(n);
    for (int i = 0; i < n; ++i)
        x[i] = 0.5 + 0.4 * std::sin(0.01 * i);

    report("spmv",
           time_ms(10, [&] { kernels::spmv(a, x, y,
                                           kernels::Backend::Serial); }),
           time_ms(10, [&] { kernels::spmv(a, x, y,
                                           kernels::Backend::OpenMP); }));
    report("sis_step",
           time_ms(10, [&] {
               kernels::sis_step(diag, a, x, y, kernels::Backend::Serial);
           }),
           time_ms(10, [&] {
               kernels::sis_step(diag, a, x, y, kernels::Backend::OpenMP);
           }));

    const kernels::LseBatch b = bellman_shaped_batch(200000, 10, 4, n, rng);
    std::vector<double> g(b.n_cons()), sigma(b.n_terms());
    report("lse_eval",
           time_ms(5, [&] {
               kernels::lse_eval(b, x, g, sigma, kernels::Backend::Serial);
           }),
           time_ms(5, [&] {
               kernels::lse_eval(b, x, g, sigma, kernels::Backend::OpenMP);
           }));
    return 0;
}
