#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spmpc/kernels.hpp"

namespace spmpc {

/// Directed contact edge: node j can infect node i at rate beta_ij.
struct Edge {
    int i = 0;
    int j = 0;
    double beta_lower = 0.0;
    double beta_upper = 0.0;
    double weight = 1.0; // resource cost per nat spent on this edge
};

/// Static problem instance: contact graph, rate bounds, impact costs,
/// resource weights and the discretization/discount parameters.
///
/// Allocation slots: slot s < edges.size() addresses edge s, slot
/// edges.size() + i addresses the diagonal (recovery) of node i. Rate
/// states and allocation matrices are vectors over these slots / nodes.
struct SpreadingNetwork {
    int n = 0;
    double h = 0.0;    // discretization step
    double alpha = 1.0; // discount factor in (0, 1]

    std::vector<Edge> edges;
    std::vector<double> delta_lower; // unmodified recovery rate per node
    std::vector<double> delta_upper; // largest reachable recovery rate
    std::vector<double> delta_cap;   // saturation rate, strictly above delta_upper
    std::vector<double> cost;        // impact weight c_i > 0
    std::vector<double> node_weight; // resource cost per nat on the diagonal

    // Derived indexing, built by finalize(): edges grouped by row i (who
    // gets infected) and by column j (who infects).
    std::vector<int> row_ptr, row_edge;
    std::vector<int> col_ptr, col_edge;

    int edge_count() const { return static_cast<int>(edges.size()); }
    int slot_count() const { return edge_count() + n; }
    bool is_diag_slot(int s) const { return s >= edge_count(); }
    double slot_weight(int s) const {
        return is_diag_slot(s) ? node_weight[s - edge_count()] : edges[s].weight;
    }
    /// (row, col) of slot s in the system matrix.
    std::pair<int, int> slot_rc(int s) const {
        if (is_diag_slot(s)) {
            int i = s - edge_count();
            return {i, i};
        }
        return {edges[s].i, edges[s].j};
    }

    /// Build the row/column edge indexes. Must be called after the edge
    /// list changes; load_network and the scenario builder call it.
    void finalize();

    /// All violated invariants, one message each; empty means valid.
    /// Covers bound ordering, positivity, and the step-size conditions
    /// h*delta_upper <= 1, h*delta_cap <= 1, h*sum_i beta_upper_ij < 1.
    std::vector<std::string> validate() const;

    /// Throws DomainError listing every violation.
    void require_valid() const;
};

/// Current spreading/recovery rates, within the bounds of the owning
/// network. beta is indexed by edge (not slot), delta by node.
struct RateState {
    std::vector<double> beta;
    std::vector<double> delta;
};

/// Unmodified rates (beta_upper, delta_lower).
RateState unmodified_rates(const SpreadingNetwork& net);
/// Floor rates (beta_lower, delta_upper) where all allocation headroom is
/// exhausted.
RateState floor_rates(const SpreadingNetwork& net);

/// Throws DomainError naming the first violating entry; tol absorbs
/// floating point drift from rate reconstruction.
void check_rates_in_bounds(const SpreadingNetwork& net, const RateState& r,
                           double tol = 1e-9);

/// System matrix A of the discrete-time model, split into its diagonal
/// (1 - h*delta_j) and the off-diagonal part (h*beta_ij on edges). The
/// transpose of the off-diagonal part is kept for row-vector products.
struct SystemMatrices {
    std::vector<double> diag;
    kernels::Csr offdiag;
    kernels::Csr offdiag_t;

    int size() const { return static_cast<int>(diag.size()); }
};

SystemMatrices build_system_matrix(const SpreadingNetwork& net,
                                   const RateState& rates);

/// Dense constructor for tests and small fixtures; a[i][j] row-major.
SystemMatrices system_from_dense(const std::vector<std::vector<double>>& a);

/// Spectral radius of a nonnegative matrix by shifted power iteration
/// (all-ones start, Collatz-Wielandt ratio bounds). The returned estimate
/// is the final upper ratio, so Assumption-1 margins computed from it are
/// conservative. Throws NumericError with iterate diagnostics when the cap
/// is hit.
double spectral_radius(const SystemMatrices& a, double tol = 1e-10,
                       int max_iter = 10000);

/// 1 - alpha * rho(A_upper); positive iff Assumption 1 holds. Negative
/// margins are a valid report, not an error.
double check_assumption1(const SpreadingNetwork& net);

/// Per-node admissibility margins m_j = c_j delta_j - sum_i c_i beta_ij.
/// Rates lie in the admissible set iff every margin is positive (and the
/// rate bounds hold).
std::vector<double> admissibility_margins(const SpreadingNetwork& net,
                                          const RateState& rates);

/// Instance file IO. JSON schema:
/// {n, h, alpha, nodes:[{delta_lower, delta_upper, delta_cap, cost}],
///  edges:[{i, j, beta_lower, beta_upper, weight}], node_weights:[w_ii]},
/// 0-based indices.
SpreadingNetwork load_network(const std::filesystem::path& path);
/// Parse and index without invariant validation, for diagnostic tooling.
SpreadingNetwork load_network_unvalidated(const std::filesystem::path& path);
void save_network(const SpreadingNetwork& net,
                  const std::filesystem::path& path);

} // namespace spmpc
