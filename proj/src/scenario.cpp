#include "spmpc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spmpc/errors.hpp"

namespace spmpc {

using nlohmann::json;

char cell_to_char(CellType t) {
    switch (t) {
    case CellType::Desert: return 'D';
    case CellType::Grassland: return 'G';
    case CellType::Eucalyptus: return 'E';
    case CellType::Water: return 'W';
    case CellType::City: return 'C';
    }
    return '?';
}

CellType cell_from_char(char c) {
    switch (c) {
    case 'D': return CellType::Desert;
    case 'G': return CellType::Grassland;
    case 'E': return CellType::Eucalyptus;
    case 'W': return CellType::Water;
    case 'C': return CellType::City;
    default:
        throw DomainError(std::string("unknown cell type character '") + c +
                          "'");
    }
}

void Landscape::require_valid() const {
    if (rows <= 0 || cols <= 0)
        throw DomainError("landscape: dimensions must be positive");
    if (static_cast<int>(cells.size()) != rows * cols)
        throw DomainError("landscape: cell array size mismatch");
    for (auto [r, c] : seed_cells) {
        if (r < 0 || r >= rows || c < 0 || c >= cols)
            throw DomainError("landscape: seed cell outside the grid");
        if (at(r, c) == CellType::Water)
            throw DomainError("landscape: seed cell is water");
    }
    if (seed_fraction < 0.0 || seed_fraction > 1.0)
        throw DomainError("landscape: seed fraction must lie in [0, 1]");
}

double WildfireParams::beta_veg(CellType t) const {
    switch (t) {
    case CellType::Desert: return beta_veg_desert;
    case CellType::Grassland: return beta_veg_grassland;
    case CellType::Eucalyptus: return beta_veg_eucalyptus;
    case CellType::City: return beta_veg_city;
    case CellType::Water: return 0.0;
    }
    return 0.0;
}

double wind_factor(const WildfireParams& p, const Wind& w,
                   double bearing_deg) {
    if (w.speed < 0.0)
        throw DomainError("wind speed must be nonnegative");
    const double theta =
        (bearing_deg - w.bearing_deg) * std::numbers::pi / 180.0;
    return std::exp(w.speed * p.wind_c1 +
                    w.speed * p.wind_c2 * (std::cos(theta) - 1.0));
}

double edge_bearing_deg(int r1, int c1, int r2, int c2) {
    const double east = static_cast<double>(c1 - c2);
    const double north = static_cast<double>(r2 - r1);
    double deg = std::atan2(east, north) * 180.0 / std::numbers::pi;
    if (deg < 0.0)
        deg += 360.0;
    return deg;
}

SpreadingNetwork build_wildfire_network(const Landscape& scape,
                                        const WildfireParams& params) {
    scape.require_valid();
    SpreadingNetwork net;
    net.n = scape.cell_count();
    net.h = params.h;
    net.alpha = params.alpha > 0.0 ? params.alpha : 1.0;

    net.delta_lower.assign(net.n, params.delta);
    net.delta_upper.assign(net.n, params.delta_upper);
    net.delta_cap.assign(net.n, params.delta_cap);
    net.node_weight.assign(net.n, 1.0);
    net.cost.resize(net.n);
    for (int r = 0; r < scape.rows; ++r)
        for (int c = 0; c < scape.cols; ++c)
            net.cost[scape.node(r, c)] = scape.at(r, c) == CellType::City
                                             ? params.cost_city
                                             : params.cost_other;

    for (int r = 0; r < scape.rows; ++r)
        for (int c = 0; c < scape.cols; ++c) {
            if (scape.at(r, c) == CellType::Water)
                continue;
            const int i = scape.node(r, c);
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0)
                        continue;
                    const int r2 = r + dr, c2 = c + dc;
                    if (r2 < 0 || r2 >= scape.rows || c2 < 0 ||
                        c2 >= scape.cols)
                        continue;
                    if (scape.at(r2, c2) == CellType::Water)
                        continue;
                    // edge (i, j): cell (r2, c2) spreads into (r, c)
                    Edge e;
                    e.i = i;
                    e.j = scape.node(r2, c2);
                    double beta = params.beta_baseline *
                                  params.beta_veg(scape.at(r, c)) *
                                  wind_factor(params, scape.wind,
                                              edge_bearing_deg(r, c, r2, c2));
                    if (dr != 0 && dc != 0)
                        beta *= params.diagonal_factor;
                    e.beta_upper = beta;
                    e.beta_lower = params.beta_lower_fraction * beta;
                    e.weight = 1.0;
                    net.edges.push_back(e);
                }
        }

    net.finalize();
    net.require_valid();
    if (params.alpha <= 0.0) {
        // Experiment setup: alpha = 1/(0.05 + rho(A_upper)).
        const double rho =
            spectral_radius(build_system_matrix(net, unmodified_rates(net)));
        net.alpha = 1.0 / (0.05 + rho);
    }
    return net;
}

StateVector seed_outbreak(const Landscape& scape, std::uint64_t seed) {
    scape.require_valid();
    StateVector x(scape.cell_count(), 0.0);
    if (!scape.seed_cells.empty()) {
        for (auto [r, c] : scape.seed_cells)
            x[scape.node(r, c)] = 1.0;
        return x;
    }
    if (scape.seed_fraction <= 0.0)
        return x;

    std::vector<int> burnable;
    for (int r = 0; r < scape.rows; ++r)
        for (int c = 0; c < scape.cols; ++c)
            if (scape.at(r, c) != CellType::Water)
                burnable.push_back(scape.node(r, c));
    const int want = static_cast<int>(
        std::ceil(scape.seed_fraction * scape.cell_count()));
    const int count = std::min<int>(want, static_cast<int>(burnable.size()));

    // Partial Fisher-Yates with an explicit modulo draw; std::uniform_int
    // is implementation-defined, which would break byte-identical reruns
    // across toolchains.
    std::mt19937_64 rng(seed);
    for (int k = 0; k < count; ++k) {
        const std::uint64_t span = burnable.size() - k;
        const std::uint64_t pick = k + rng() % span;
        std::swap(burnable[k], burnable[pick]);
        x[burnable[k]] = 1.0;
    }
    return x;
}

Landscape load_landscape(const std::filesystem::path& path,
                         WildfireParams* params_out) {
    std::ifstream in(path);
    if (!in)
        throw DomainError("cannot open landscape file: " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DomainError("landscape file " + path.string() + ": " + e.what());
    }

    Landscape scape;
    try {
        scape.rows = doc.at("rows").get<int>();
        scape.cols = doc.at("cols").get<int>();
        const auto& rows = doc.at("cells");
        for (const auto& row : rows) {
            const std::string s = row.get<std::string>();
            if (static_cast<int>(s.size()) != scape.cols)
                throw DomainError("landscape: row length mismatch");
            for (char ch : s)
                scape.cells.push_back(cell_from_char(ch));
        }
        if (doc.contains("wind")) {
            scape.wind.speed = doc["wind"].value("speed", 0.0);
            scape.wind.bearing_deg = doc["wind"].value("bearing_deg", 0.0);
        }
        if (doc.contains("seeds"))
            for (const auto& s : doc["seeds"])
                scape.seed_cells.emplace_back(s.at(0).get<int>(),
                                              s.at(1).get<int>());
        scape.seed_fraction = doc.value("seed_fraction", 0.0);

        if (params_out != nullptr && doc.contains("params")) {
            const auto& pj = doc["params"];
            WildfireParams& p = *params_out;
            p.beta_baseline = pj.value("beta_baseline", p.beta_baseline);
            p.beta_veg_desert = pj.value("beta_veg_desert", p.beta_veg_desert);
            p.beta_veg_grassland =
                pj.value("beta_veg_grassland", p.beta_veg_grassland);
            p.beta_veg_eucalyptus =
                pj.value("beta_veg_eucalyptus", p.beta_veg_eucalyptus);
            p.beta_veg_city = pj.value("beta_veg_city", p.beta_veg_city);
            p.delta = pj.value("delta", p.delta);
            p.cost_city = pj.value("cost_city", p.cost_city);
            p.cost_other = pj.value("cost_other", p.cost_other);
            p.wind_c1 = pj.value("wind_c1", p.wind_c1);
            p.wind_c2 = pj.value("wind_c2", p.wind_c2);
            p.diagonal_factor = pj.value("diagonal_factor", p.diagonal_factor);
            p.h = pj.value("h", p.h);
            p.beta_lower_fraction =
                pj.value("beta_lower_fraction", p.beta_lower_fraction);
            p.delta_upper = pj.value("delta_upper", p.delta_upper);
            p.delta_cap = pj.value("delta_cap", p.delta_cap);
            p.alpha = pj.value("alpha", p.alpha);
            p.gamma_bar = pj.value("gamma_bar", p.gamma_bar);
            p.L = pj.value("L", p.L);
        }
    } catch (const json::exception& e) {
        throw DomainError("landscape file " + path.string() + ": " + e.what());
    }
    scape.require_valid();
    return scape;
}

void save_landscape(const Landscape& scape, const WildfireParams& params,
                    const std::filesystem::path& path) {
    json doc;
    doc["rows"] = scape.rows;
    doc["cols"] = scape.cols;
    doc["cells"] = json::array();
    for (int r = 0; r < scape.rows; ++r) {
        std::string row;
        for (int c = 0; c < scape.cols; ++c)
            row.push_back(cell_to_char(scape.at(r, c)));
        doc["cells"].push_back(row);
    }
    doc["wind"] = {{"speed", scape.wind.speed},
                   {"bearing_deg", scape.wind.bearing_deg}};
    if (!scape.seed_cells.empty()) {
        doc["seeds"] = json::array();
        for (auto [r, c] : scape.seed_cells)
            doc["seeds"].push_back({r, c});
    }
    if (scape.seed_fraction > 0.0)
        doc["seed_fraction"] = scape.seed_fraction;
    doc["params"] = {{"beta_baseline", params.beta_baseline},
                     {"beta_veg_desert", params.beta_veg_desert},
                     {"beta_veg_grassland", params.beta_veg_grassland},
                     {"beta_veg_eucalyptus", params.beta_veg_eucalyptus},
                     {"beta_veg_city", params.beta_veg_city},
                     {"delta", params.delta},
                     {"cost_city", params.cost_city},
                     {"cost_other", params.cost_other},
                     {"wind_c1", params.wind_c1},
                     {"wind_c2", params.wind_c2},
                     {"diagonal_factor", params.diagonal_factor},
                     {"h", params.h},
                     {"beta_lower_fraction", params.beta_lower_fraction},
                     {"delta_upper", params.delta_upper},
                     {"delta_cap", params.delta_cap},
                     {"alpha", params.alpha},
                     {"gamma_bar", params.gamma_bar},
                     {"L", params.L}};
    std::ofstream out(path);
    if (!out)
        throw DomainError("cannot write landscape file: " + path.string());
    out << doc.dump(2) << "\n";
}

Landscape demo_landscape(int rows, int cols, std::uint64_t seed) {
    if (rows < 4 || cols < 4)
        throw DomainError("demo landscape needs at least a 4x4 grid");
    Landscape scape;
    scape.rows = rows;
    scape.cols = cols;
    scape.cells.assign(rows * cols, CellType::Grassland);
    std::mt19937_64 rng(seed);
    auto jitter = [&rng]() {
        return (static_cast<double>(rng() >> 11) / 9007199254740992.0 - 0.5);
    };

    auto blob = [&](double cr, double cc, double rad_r, double rad_c,
                    CellType t) {
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                const double dr = (r - cr) / rad_r;
                const double dc = (c - cc) / rad_c;
                if (dr * dr + dc * dc < 1.0 + 0.25 * jitter())
                    scape.cells[r * cols + c] = t;
            }
    };

    // forest in the upper-left, desert margin lower-right, a lake, a city
    blob(rows * 0.30, cols * 0.25, rows * 0.28, cols * 0.30,
         CellType::Eucalyptus);
    blob(rows * 0.85, cols * 0.80, rows * 0.30, cols * 0.35, CellType::Desert);
    blob(rows * 0.25, cols * 0.78, rows * 0.14, cols * 0.16, CellType::Water);
    const int city_r = static_cast<int>(rows * 0.70);
    const int city_c = static_cast<int>(cols * 0.30);
    for (int r = city_r; r < std::min(rows, city_r + std::max(2, rows / 8));
         ++r)
        for (int c = city_c;
             c < std::min(cols, city_c + std::max(2, cols / 8)); ++c)
            scape.cells[r * cols + c] = CellType::City;

    // outbreak in the forest edge
    const int sr = static_cast<int>(rows * 0.15);
    const int sc = static_cast<int>(cols * 0.15);
    if (scape.at(sr, sc) != CellType::Water)
        scape.seed_cells.emplace_back(sr, sc);
    else
        scape.seed_cells.emplace_back(0, 0);

    scape.wind.speed = 4.0;
    scape.wind.bearing_deg = 225.0; // northeasterly wind blows toward SW
    scape.require_valid();
    return scape;
}

void write_landscape_raster_csv(std::ostream& out, const Landscape& scape) {
    for (int r = 0; r < scape.rows; ++r) {
        for (int c = 0; c < scape.cols; ++c) {
            if (c > 0)
                out << ',';
            out << cell_to_char(scape.at(r, c));
        }
        out << '\n';
    }
}

} // namespace spmpc
