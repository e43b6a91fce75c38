#include "spmpc/resource.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "spmpc/errors.hpp"

namespace spmpc {

double AllocationMatrix::total() const {
    double s = 0.0;
    for (double v : u)
        s += v;
    return s;
}

AllocationMatrix zero_allocation(const SpreadingNetwork& net) {
    return {std::vector<double>(net.slot_count(), 0.0)};
}

AllocationMatrix allocation_between(const SpreadingNetwork& net,
                                    const RateState& rates1,
                                    const RateState& rates2) {
    const int ne = net.edge_count();
    AllocationMatrix out = zero_allocation(net);
    for (int s = 0; s < ne; ++s) {
        if (rates2.beta[s] > rates1.beta[s] * (1.0 + 1e-12)) {
            std::ostringstream os;
            os << "allocation_between: beta increases on edge (" << net.edges[s].i
               << ", " << net.edges[s].j << "): " << rates1.beta[s] << " -> "
               << rates2.beta[s];
            throw DomainError(os.str());
        }
        out.u[s] = std::log(rates1.beta[s] / rates2.beta[s]);
        if (out.u[s] < 0.0)
            out.u[s] = 0.0; // round-off from equal rates
    }
    for (int i = 0; i < net.n; ++i) {
        const double cap = net.delta_cap[i];
        if (rates2.delta[i] < rates1.delta[i] - 1e-12 * std::max(1.0, rates1.delta[i])) {
            std::ostringstream os;
            os << "allocation_between: delta decreases on node " << i << ": "
               << rates1.delta[i] << " -> " << rates2.delta[i];
            throw DomainError(os.str());
        }
        if (rates2.delta[i] >= cap) {
            std::ostringstream os;
            os << "allocation_between: delta reaches the saturation rate on node "
               << i << " (infinite resource)";
            throw DomainError(os.str());
        }
        out.u[ne + i] = std::log((cap - rates1.delta[i]) / (cap - rates2.delta[i]));
        if (out.u[ne + i] < 0.0)
            out.u[ne + i] = 0.0;
    }
    return out;
}

double resource_cost(const SpreadingNetwork& net, const AllocationMatrix& u) {
    double g = 0.0;
    for (int s = 0; s < net.slot_count(); ++s)
        g += net.slot_weight(s) * u.u[s];
    return g;
}

ApplyResult apply_allocation(const SpreadingNetwork& net,
                             const RateState& rates1,
                             const AllocationMatrix& u) {
    if (static_cast<int>(u.u.size()) != net.slot_count())
        throw DomainError("allocation has wrong slot count");
    const int ne = net.edge_count();
    ApplyResult res;
    res.rates.beta.resize(ne);
    res.rates.delta.resize(net.n);

    auto note = [&res](int slot, double viol) {
        if (viol > res.worst_violation) {
            res.bounds_violated = true;
            res.worst_slot = slot;
            res.worst_violation = viol;
        }
    };

    for (int s = 0; s < ne; ++s) {
        res.rates.beta[s] = rates1.beta[s] * std::exp(-u.u[s]);
        const double lo = net.edges[s].beta_lower;
        if (res.rates.beta[s] < lo)
            note(s, lo - res.rates.beta[s]);
    }
    for (int i = 0; i < net.n; ++i) {
        const double cap = net.delta_cap[i];
        const double e = std::exp(-u.u[ne + i]);
        res.rates.delta[i] = (1.0 - e) * cap + e * rates1.delta[i];
        if (res.rates.delta[i] > net.delta_upper[i])
            note(ne + i, res.rates.delta[i] - net.delta_upper[i]);
    }
    return res;
}

AllocationMatrix max_allocation(const SpreadingNetwork& net,
                                const RateState& rates) {
    check_rates_in_bounds(net, rates);
    return allocation_between(net, rates, floor_rates(net));
}

void dump_allocation_csv(const SpreadingNetwork& net, const AllocationMatrix& u,
                         std::ostream& out, double eps) {
    out << "i,j,U,WU\n";
    char buf[96];
    for (int s = 0; s < net.slot_count(); ++s) {
        if (u.u[s] <= eps)
            continue;
        auto [i, j] = net.slot_rc(s);
        std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g\n", i, j, u.u[s],
                      net.slot_weight(s) * u.u[s]);
        out << buf;
    }
}

} // namespace spmpc
