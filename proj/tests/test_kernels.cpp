#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "spmpc/kernels.hpp"

#include "test_helpers.hpp"

using namespace spmpc;
using spmpc::testing::uniform;

namespace {

kernels::Csr random_csr(std::mt19937_64& rng, int n, double fill) {
    kernels::Csr a;
    a.rows = a.cols = n;
    a.ptr.push_back(0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
            if (i != j && uniform(rng, 0.0, 1.0) < fill) {
                a.idx.push_back(j);
                a.val.push_back(uniform(rng, 0.0, 0.3));
            }
        a.ptr.push_back(static_cast<int>(a.idx.size()));
    }
    return a;
}

} // namespace

TEST_CASE("serial and openmp kernels agree bitwise") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = spmpc::testing::uniform_int(rng, 1, 200);
        const kernels::Csr a = random_csr(rng, n, 3.0 / n);
        std::vector<double> diag(n), x(n);
        for (int i = 0; i < n; ++i) {
            diag[i] = uniform(rng, 0.0, 1.0);
            x[i] = uniform(rng, 0.0, 1.0);
        }
        std::vector<double> y1(n), y2(n);

        kernels::spmv(a, x, y1, kernels::Backend::Serial);
        kernels::spmv(a, x, y2, kernels::Backend::OpenMP);
        for (int i = 0; i < n; ++i)
            CHECK(y1[i] == y2[i]);

        kernels::sis_step(diag, a, x, y1, kernels::Backend::Serial);
        kernels::sis_step(diag, a, x, y2, kernels::Backend::OpenMP);
        for (int i = 0; i < n; ++i)
            CHECK(y1[i] == y2[i]);

        kernels::lin_step(diag, a, x, y1, kernels::Backend::Serial);
        kernels::lin_step(diag, a, x, y2, kernels::Backend::OpenMP);
        for (int i = 0; i < n; ++i)
            CHECK(y1[i] == y2[i]);
    }
}

TEST_CASE("lse batch matches direct evaluation and both backends agree") {
    std::mt19937_64 rng(11);
    kernels::LseBatch b;
    b.cons_ptr.push_back(0);
    const int n_vars = 30;
    std::vector<double> z(n_vars);
    for (double& v : z)
        v = uniform(rng, -2.0, 2.0);
    for (int c = 0; c < 50; ++c) {
        const int terms = spmpc::testing::uniform_int(rng, 1, 6);
        for (int t = 0; t < terms; ++t) {
            b.term_off.push_back(uniform(rng, -3.0, 0.5));
            b.term_ptr.push_back(static_cast<int>(b.entry_var.size()));
            const int ents = spmpc::testing::uniform_int(rng, 0, 4);
            for (int e = 0; e < ents; ++e) {
                b.entry_var.push_back(
                    spmpc::testing::uniform_int(rng, 0, n_vars - 1));
                b.entry_coef.push_back(uniform(rng, -1.5, 1.5));
            }
        }
        b.cons_ptr.push_back(static_cast<int>(b.term_off.size()));
    }
    b.term_ptr.push_back(static_cast<int>(b.entry_var.size()));

    std::vector<double> g1(b.n_cons()), g2(b.n_cons());
    std::vector<double> s1(b.n_terms()), s2(b.n_terms());
    kernels::lse_eval(b, z, g1, s1, kernels::Backend::Serial);
    kernels::lse_eval(b, z, g2, s2, kernels::Backend::OpenMP);
    for (int c = 0; c < b.n_cons(); ++c)
        CHECK(g1[c] == g2[c]);
    for (int t = 0; t < b.n_terms(); ++t)
        CHECK(s1[t] == s2[t]);

    // direct naive evaluation
    for (int c = 0; c < b.n_cons(); ++c) {
        double s = 0.0;
        for (int t = b.cons_ptr[c]; t < b.cons_ptr[c + 1]; ++t) {
            double u = b.term_off[t];
            for (int e = b.term_ptr[t]; e < b.term_ptr[t + 1]; ++e)
                u += b.entry_coef[e] * z[b.entry_var[e]];
            s += std::exp(u);
        }
        CHECK(g1[c] == doctest::Approx(std::log(s)).epsilon(1e-12));
    }

    // softmax weights sum to one per constraint
    for (int c = 0; c < b.n_cons(); ++c) {
        double s = 0.0;
        for (int t = b.cons_ptr[c]; t < b.cons_ptr[c + 1]; ++t)
            s += s1[t];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("lse evaluation is safe deep in the exponent underflow range") {
    kernels::LseBatch b;
    b.cons_ptr = {0, 2};
    b.term_off = {-700.0, -705.0};
    b.term_ptr = {0, 0, 0};
    std::vector<double> z;
    std::vector<double> g(1), sigma(2);
    kernels::lse_eval(b, z, g, sigma, kernels::Backend::Serial);
    // exact: log(e^-700 + e^-705) = -700 + log(1 + e^-5)
    CHECK(g[0] ==
          doctest::Approx(-700.0 + std::log1p(std::exp(-5.0))).epsilon(1e-14));
    CHECK(g[0] < 0.0);
    CHECK(sigma[0] > 0.99);
    CHECK(sigma[0] + sigma[1] == doctest::Approx(1.0));

    // huge positive exponents must not overflow either
    b.term_off = {700.0, 705.0};
    kernels::lse_eval(b, z, g, sigma, kernels::Backend::Serial);
    CHECK(g[0] == doctest::Approx(705.0 + std::log1p(std::exp(-5.0))));
    CHECK(std::isfinite(g[0]));
}
