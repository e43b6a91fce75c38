#pragma once

#include <iosfwd>
#include <vector>

#include "spmpc/network.hpp"

namespace spmpc {

/// Resource allocation in nats, indexed by network slot: entries below
/// edge_count() reduce the matching edge's beta, the remaining n entries
/// raise the node's delta toward its saturation rate.
struct AllocationMatrix {
    std::vector<double> u;

    double total() const;
};

AllocationMatrix zero_allocation(const SpreadingNetwork& net);

/// Resource needed for the rate transition rates1 -> rates2:
/// log(beta1/beta2) per edge, log((cap - delta1)/(cap - delta2)) per node.
/// Requires beta1 >= beta2 and delta1 <= delta2 < cap; equal states cost
/// zero everywhere.
AllocationMatrix allocation_between(const SpreadingNetwork& net,
                                    const RateState& rates1,
                                    const RateState& rates2);

/// Weighted total cost sum_s W_s * U_s.
double resource_cost(const SpreadingNetwork& net, const AllocationMatrix& u);

struct ApplyResult {
    RateState rates;
    /// True when the updated rates left [beta_lower, beta_upper] x
    /// [delta_lower, delta_upper]; reported rather than clamped, feasibility
    /// is the optimizer's job.
    bool bounds_violated = false;
    int worst_slot = -1;
    double worst_violation = 0.0;
};

/// Rate update beta' = beta * exp(-U), delta' = cap - (cap - delta) *
/// exp(-U); exact inverse of allocation_between.
ApplyResult apply_allocation(const SpreadingNetwork& net,
                             const RateState& rates1,
                             const AllocationMatrix& u);

/// Remaining per-slot headroom before the rate bounds bind:
/// allocation_between(rates, floor_rates).
AllocationMatrix max_allocation(const SpreadingNetwork& net,
                                const RateState& rates);

/// Sparse triplet dump (i, j, U, W*U), one row per slot above eps.
void dump_allocation_csv(const SpreadingNetwork& net, const AllocationMatrix& u,
                         std::ostream& out, double eps = 0.0);

} // namespace spmpc
