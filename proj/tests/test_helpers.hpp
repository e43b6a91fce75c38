#pragma once

// Shared fixtures: hand-built micro networks and a seeded random-instance
// generator used by the property tests and the acceptance suite.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "spmpc/dynamics.hpp"
#include "spmpc/network.hpp"

namespace spmpc::testing {

// Uniform double in [lo, hi) from the raw engine; avoids the
// implementation-defined std distributions so frozen values stay frozen.
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    const double u =
        static_cast<double>(rng() >> 11) / 9007199254740992.0; // 2^53
    return lo + u * (hi - lo);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) { // inclusive
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(
                                             hi - lo + 1));
}

/// Isolated node: delta in [0.5, 0.9], cap 1, cost 1, h = 1, given alpha.
/// A = [1 - delta].
inline SpreadingNetwork scalar_network(double alpha = 0.5,
                                       double delta_lower = 0.5) {
    SpreadingNetwork net;
    net.n = 1;
    net.h = 1.0;
    net.alpha = alpha;
    net.delta_lower = {delta_lower};
    net.delta_upper = {0.9};
    net.delta_cap = {1.0};
    net.cost = {1.0};
    net.node_weight = {1.0};
    net.finalize();
    net.require_valid();
    return net;
}

/// Two nodes, one edge (2,1) in paper terms: node 0 infects node 1 with
/// beta up to 0.4 (floor 0.05), delta unmodified 0.5, h = 1, alpha 0.5.
/// A_upper = [[0.5, 0], [0.4, 0.5]].
inline SpreadingNetwork two_node_network(double beta = 0.4,
                                         double alpha = 0.5) {
    SpreadingNetwork net;
    net.n = 2;
    net.h = 1.0;
    net.alpha = alpha;
    net.delta_lower = {0.5, 0.5};
    net.delta_upper = {0.9, 0.9};
    net.delta_cap = {1.0, 1.0};
    net.cost = {1.0, 1.0};
    net.node_weight = {1.0, 1.0};
    net.edges.push_back({1, 0, 0.05, beta, 1.0});
    net.finalize();
    net.require_valid();
    return net;
}

struct RandomNetOptions {
    int n_min = 2, n_max = 20;
    double edge_prob = -1.0; // < 0: 2/n
    bool enforce_assumption1 = true;
    double h = 0.5;
};

/// Random instance satisfying the validation invariants; when requested,
/// alpha = 1/(0.05 + rho(A_upper)) so Assumption 1 holds by construction.
inline SpreadingNetwork random_network(std::mt19937_64& rng,
                                       RandomNetOptions o = {}) {
    SpreadingNetwork net;
    net.n = uniform_int(rng, o.n_min, o.n_max);
    net.h = o.h;
    net.alpha = 1.0;
    const double p =
        o.edge_prob > 0.0 ? o.edge_prob : 2.0 / static_cast<double>(net.n);
    for (int i = 0; i < net.n; ++i) {
        const double dl = uniform(rng, 0.2, 0.7);
        net.delta_lower.push_back(dl);
        net.delta_upper.push_back(
            uniform(rng, dl, std::min(1.2, 0.95 / o.h)));
        net.delta_cap.push_back(
            std::min(net.delta_upper.back() + uniform(rng, 0.05, 0.3),
                     1.0 / o.h));
        if (net.delta_upper.back() >= net.delta_cap.back())
            net.delta_upper.back() = 0.5 * (net.delta_lower.back() +
                                            net.delta_cap.back());
        net.cost.push_back(uniform(rng, 0.2, 2.0));
        net.node_weight.push_back(uniform(rng, 0.5, 2.0));
    }
    // random sparse edges, then rescale so each column sum obeys the
    // step-size condition with margin
    std::vector<double> colsum(net.n, 0.0);
    for (int i = 0; i < net.n; ++i)
        for (int j = 0; j < net.n; ++j) {
            if (i == j || uniform(rng, 0.0, 1.0) > p)
                continue;
            Edge e;
            e.i = i;
            e.j = j;
            e.beta_upper = uniform(rng, 0.05, 0.5);
            e.beta_lower = e.beta_upper * uniform(rng, 0.05, 0.5);
            e.weight = uniform(rng, 0.5, 2.0);
            colsum[j] += e.beta_upper;
            net.edges.push_back(e);
        }
    for (int j = 0; j < net.n; ++j) {
        const double lim = 0.9 / o.h;
        if (colsum[j] > lim) {
            const double scale = lim / colsum[j];
            for (Edge& e : net.edges)
                if (e.j == j) {
                    e.beta_upper *= scale;
                    e.beta_lower *= scale;
                }
        }
    }
    net.finalize();
    if (o.enforce_assumption1) {
        const double rho =
            spectral_radius(build_system_matrix(net, unmodified_rates(net)));
        net.alpha = 1.0 / (0.05 + rho);
        if (net.alpha > 1.0)
            net.alpha = 1.0;
    } else {
        net.alpha = uniform(rng, 0.3, 1.0);
    }
    net.require_valid();
    return net;
}

/// Random rates within the network's bounds.
inline RateState random_rates(std::mt19937_64& rng,
                              const SpreadingNetwork& net) {
    RateState r;
    for (const Edge& e : net.edges)
        r.beta.push_back(uniform(rng, e.beta_lower, e.beta_upper));
    for (int i = 0; i < net.n; ++i)
        r.delta.push_back(uniform(rng, net.delta_lower[i], net.delta_upper[i]));
    return r;
}

inline StateVector random_state(std::mt19937_64& rng, int n) {
    StateVector x(n);
    for (double& v : x)
        v = uniform(rng, 0.0, 1.0);
    return x;
}

} // namespace spmpc::testing
