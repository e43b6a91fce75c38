#include "spmpc/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spmpc/errors.hpp"

namespace spmpc {

using nlohmann::json;

void SpreadingNetwork::finalize() {
    const int ne = edge_count();
    row_ptr.assign(n + 1, 0);
    col_ptr.assign(n + 1, 0);
    for (const Edge& e : edges) {
        ++row_ptr[e.i + 1];
        ++col_ptr[e.j + 1];
    }
    for (int v = 0; v < n; ++v) {
        row_ptr[v + 1] += row_ptr[v];
        col_ptr[v + 1] += col_ptr[v];
    }
    row_edge.assign(ne, 0);
    col_edge.assign(ne, 0);
    std::vector<int> rfill(row_ptr.begin(), row_ptr.end() - 1);
    std::vector<int> cfill(col_ptr.begin(), col_ptr.end() - 1);
    for (int s = 0; s < ne; ++s) {
        row_edge[rfill[edges[s].i]++] = s;
        col_edge[cfill[edges[s].j]++] = s;
    }
}

std::vector<std::string> SpreadingNetwork::validate() const {
    std::vector<std::string> bad;
    auto fail = [&bad](const std::string& m) { bad.push_back(m); };
    if (n <= 0)
        fail("node count must be positive");
    if (h <= 0.0)
        fail("discretization step h must be positive");
    if (!(alpha > 0.0 && alpha <= 1.0))
        fail("alpha must lie in (0, 1]");
    if (static_cast<int>(delta_lower.size()) != n ||
        static_cast<int>(delta_upper.size()) != n ||
        static_cast<int>(delta_cap.size()) != n ||
        static_cast<int>(cost.size()) != n ||
        static_cast<int>(node_weight.size()) != n) {
        fail("node array sizes do not match n");
        return bad;
    }
    for (int i = 0; i < n; ++i) {
        if (!(delta_lower[i] > 0.0 && delta_lower[i] <= delta_upper[i] &&
              delta_upper[i] < delta_cap[i]))
            fail("node " + std::to_string(i) +
                 ": need 0 < delta_lower <= delta_upper < delta_cap");
        if (!(cost[i] > 0.0))
            fail("node " + std::to_string(i) + ": cost must be positive");
        if (!(node_weight[i] > 0.0))
            fail("node " + std::to_string(i) + ": node weight must be positive");
        if (h * delta_upper[i] > 1.0)
            fail("node " + std::to_string(i) + ": h*delta_upper exceeds 1");
        if (h * delta_cap[i] > 1.0)
            fail("node " + std::to_string(i) + ": h*delta_cap exceeds 1");
    }
    std::vector<double> colsum(n, 0.0);
    for (std::size_t s = 0; s < edges.size(); ++s) {
        const Edge& e = edges[s];
        if (e.i < 0 || e.i >= n || e.j < 0 || e.j >= n || e.i == e.j) {
            fail("edge " + std::to_string(s) + ": bad endpoints");
            continue;
        }
        if (!(e.beta_lower > 0.0 && e.beta_lower <= e.beta_upper))
            fail("edge " + std::to_string(s) +
                 ": need 0 < beta_lower <= beta_upper");
        if (!(e.weight > 0.0))
            fail("edge " + std::to_string(s) + ": weight must be positive");
        colsum[e.j] += e.beta_upper;
    }
    int worst = -1;
    double worst_sum = 0.0;
    for (int j = 0; j < n; ++j) {
        if (h * colsum[j] >= 1.0 && colsum[j] > worst_sum) {
            worst = j;
            worst_sum = colsum[j];
        }
    }
    if (worst >= 0) {
        std::ostringstream os;
        os << "step-size condition violated: h*sum_i beta_upper[i][" << worst
           << "] = " << h * worst_sum << " >= 1";
        fail(os.str());
    }
    return bad;
}

void SpreadingNetwork::require_valid() const {
    auto bad = validate();
    if (bad.empty())
        return;
    std::string msg = "invalid network instance:";
    for (const auto& m : bad)
        msg += "\n  - " + m;
    throw DomainError(msg);
}

RateState unmodified_rates(const SpreadingNetwork& net) {
    RateState r;
    r.beta.reserve(net.edges.size());
    for (const Edge& e : net.edges)
        r.beta.push_back(e.beta_upper);
    r.delta = net.delta_lower;
    return r;
}

RateState floor_rates(const SpreadingNetwork& net) {
    RateState r;
    r.beta.reserve(net.edges.size());
    for (const Edge& e : net.edges)
        r.beta.push_back(e.beta_lower);
    r.delta = net.delta_upper;
    return r;
}

void check_rates_in_bounds(const SpreadingNetwork& net, const RateState& r,
                           double tol) {
    if (static_cast<int>(r.beta.size()) != net.edge_count() ||
        static_cast<int>(r.delta.size()) != net.n)
        throw DomainError("rate state has wrong dimensions");
    for (int s = 0; s < net.edge_count(); ++s) {
        const Edge& e = net.edges[s];
        if (r.beta[s] < e.beta_lower - tol || r.beta[s] > e.beta_upper + tol) {
            std::ostringstream os;
            os << "beta[" << e.i << "][" << e.j << "] = " << r.beta[s]
               << " outside [" << e.beta_lower << ", " << e.beta_upper << "]";
            throw DomainError(os.str());
        }
    }
    for (int i = 0; i < net.n; ++i) {
        if (r.delta[i] < net.delta_lower[i] - tol ||
            r.delta[i] > net.delta_upper[i] + tol) {
            std::ostringstream os;
            os << "delta[" << i << "] = " << r.delta[i] << " outside ["
               << net.delta_lower[i] << ", " << net.delta_upper[i] << "]";
            throw DomainError(os.str());
        }
    }
}

SystemMatrices build_system_matrix(const SpreadingNetwork& net,
                                   const RateState& rates) {
    check_rates_in_bounds(net, rates);
    SystemMatrices m;
    m.diag.resize(net.n);
    for (int i = 0; i < net.n; ++i)
        m.diag[i] = 1.0 - net.h * rates.delta[i];

    auto fill = [&](kernels::Csr& c, const std::vector<int>& ptr,
                    const std::vector<int>& order, bool by_row) {
        c.rows = c.cols = net.n;
        c.ptr.assign(ptr.begin(), ptr.end());
        c.idx.resize(order.size());
        c.val.resize(order.size());
        for (std::size_t k = 0; k < order.size(); ++k) {
            const Edge& e = net.edges[order[k]];
            c.idx[k] = by_row ? e.j : e.i;
            c.val[k] = net.h * rates.beta[order[k]];
        }
    };
    fill(m.offdiag, net.row_ptr, net.row_edge, true);
    fill(m.offdiag_t, net.col_ptr, net.col_edge, false);
    return m;
}

SystemMatrices system_from_dense(const std::vector<std::vector<double>>& a) {
    const int n = static_cast<int>(a.size());
    SystemMatrices m;
    m.diag.resize(n);
    m.offdiag.rows = m.offdiag.cols = n;
    m.offdiag_t.rows = m.offdiag_t.cols = n;
    m.offdiag.ptr.assign(n + 1, 0);
    m.offdiag_t.ptr.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) {
        m.diag[i] = a[i][i];
        for (int j = 0; j < n; ++j)
            if (i != j && a[i][j] != 0.0) {
                ++m.offdiag.ptr[i + 1];
                ++m.offdiag_t.ptr[j + 1];
            }
    }
    for (int v = 0; v < n; ++v) {
        m.offdiag.ptr[v + 1] += m.offdiag.ptr[v];
        m.offdiag_t.ptr[v + 1] += m.offdiag_t.ptr[v];
    }
    m.offdiag.idx.resize(m.offdiag.ptr[n]);
    m.offdiag.val.resize(m.offdiag.ptr[n]);
    m.offdiag_t.idx.resize(m.offdiag.ptr[n]);
    m.offdiag_t.val.resize(m.offdiag.ptr[n]);
    std::vector<int> rfill(m.offdiag.ptr.begin(), m.offdiag.ptr.end() - 1);
    std::vector<int> cfill(m.offdiag_t.ptr.begin(), m.offdiag_t.ptr.end() - 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && a[i][j] != 0.0) {
                m.offdiag.idx[rfill[i]] = j;
                m.offdiag.val[rfill[i]++] = a[i][j];
                m.offdiag_t.idx[cfill[j]] = i;
                m.offdiag_t.val[cfill[j]++] = a[i][j];
            }
    return m;
}

double spectral_radius(const SystemMatrices& a, double tol, int max_iter) {
    const int n = a.size();
    if (n == 0)
        return 0.0;
    for (double d : a.diag)
        if (d < 0.0)
            throw DomainError("spectral_radius requires a nonnegative matrix");
    for (double v : a.offdiag.val)
        if (v < 0.0)
            throw DomainError("spectral_radius requires a nonnegative matrix");

    // Shift by the identity: rho(A + I) = rho(A) + 1 for nonnegative A,
    // and the positive diagonal keeps iterates strictly positive and
    // damps period-2 oscillation of imprimitive matrices.
    auto apply_shifted = [&](const std::vector<double>& in,
                             std::vector<double>& out) {
        kernels::spmv(a.offdiag, in, out);
        for (int i = 0; i < n; ++i)
            out[i] += (a.diag[i] + 1.0) * in[i];
    };

    std::vector<double> x(n, 1.0), y(n);
    apply_shifted(x, y);
    double lam = 1.0;
    for (int it = 0; it < max_iter; ++it) {
        // Collatz-Wielandt ratios: for strictly positive x the maximum is
        // always an upper bound on rho(A + I), so the Assumption-1 margin
        // derived from the return value is conservative.
        double hi = 0.0, lo = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            const double ratio = y[i] / x[i];
            hi = std::max(hi, ratio);
            lo = std::min(lo, ratio);
        }
        lam = hi;
        // Certified interval for irreducible matrices; the residual test
        // covers reducible and defective cases where the interval stalls.
        if (hi - lo <= tol * hi)
            return hi - 1.0;
        double norm = 0.0;
        for (int i = 0; i < n; ++i)
            norm = std::max(norm, y[i]);
        for (int i = 0; i < n; ++i)
            x[i] = y[i] / norm;
        apply_shifted(x, y);
        double resid = 0.0;
        for (int i = 0; i < n; ++i)
            resid = std::max(resid, std::abs(y[i] - hi * x[i]));
        if (resid <= tol * hi)
            return hi - 1.0;
    }
    std::ostringstream os;
    os << "power iteration did not converge in " << max_iter
       << " iterations (last estimate " << lam - 1.0 << ", tol " << tol << ")";
    throw NumericError(os.str());
}

double check_assumption1(const SpreadingNetwork& net) {
    SystemMatrices upper = build_system_matrix(net, unmodified_rates(net));
    return 1.0 - net.alpha * spectral_radius(upper);
}

std::vector<double> admissibility_margins(const SpreadingNetwork& net,
                                          const RateState& rates) {
    check_rates_in_bounds(net, rates);
    std::vector<double> m(net.n);
    for (int j = 0; j < net.n; ++j) {
        double in = 0.0;
        for (int k = net.col_ptr[j]; k < net.col_ptr[j + 1]; ++k) {
            const int s = net.col_edge[k];
            in += net.cost[net.edges[s].i] * rates.beta[s];
        }
        m[j] = net.cost[j] * rates.delta[j] - in;
    }
    return m;
}

SpreadingNetwork load_network(const std::filesystem::path& path) {
    SpreadingNetwork net = load_network_unvalidated(path);
    net.require_valid();
    return net;
}

SpreadingNetwork load_network_unvalidated(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw DomainError("cannot open network file: " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DomainError("network file " + path.string() + ": " + e.what());
    }
    SpreadingNetwork net;
    try {
        net.n = doc.at("n").get<int>();
        net.h = doc.at("h").get<double>();
        net.alpha = doc.at("alpha").get<double>();
        for (const auto& nd : doc.at("nodes")) {
            net.delta_lower.push_back(nd.at("delta_lower").get<double>());
            net.delta_upper.push_back(nd.at("delta_upper").get<double>());
            net.delta_cap.push_back(nd.at("delta_cap").get<double>());
            net.cost.push_back(nd.at("cost").get<double>());
        }
        for (const auto& ed : doc.at("edges")) {
            Edge e;
            e.i = ed.at("i").get<int>();
            e.j = ed.at("j").get<int>();
            e.beta_lower = ed.at("beta_lower").get<double>();
            e.beta_upper = ed.at("beta_upper").get<double>();
            e.weight = ed.at("weight").get<double>();
            net.edges.push_back(e);
        }
        net.node_weight = doc.at("node_weights").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw DomainError("network file " + path.string() + ": " + e.what());
    }
    net.finalize();
    return net;
}

void save_network(const SpreadingNetwork& net,
                  const std::filesystem::path& path) {
    json doc;
    doc["n"] = net.n;
    doc["h"] = net.h;
    doc["alpha"] = net.alpha;
    doc["nodes"] = json::array();
    for (int i = 0; i < net.n; ++i)
        doc["nodes"].push_back({{"delta_lower", net.delta_lower[i]},
                                {"delta_upper", net.delta_upper[i]},
                                {"delta_cap", net.delta_cap[i]},
                                {"cost", net.cost[i]}});
    doc["edges"] = json::array();
    for (const Edge& e : net.edges)
        doc["edges"].push_back({{"i", e.i},
                                {"j", e.j},
                                {"beta_lower", e.beta_lower},
                                {"beta_upper", e.beta_upper},
                                {"weight", e.weight}});
    doc["node_weights"] = net.node_weight;
    std::ofstream out(path);
    if (!out)
        throw DomainError("cannot write network file: " + path.string());
    out << doc.dump(2) << "\n";
}

} // namespace spmpc
