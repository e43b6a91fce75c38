#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <utility>
#include <vector>

#include "spmpc/dynamics.hpp"
#include "spmpc/network.hpp"

namespace spmpc {

enum class CellType { Desert, Grassland, Eucalyptus, Water, City };

char cell_to_char(CellType t);
CellType cell_from_char(char c);

/// Wind as speed (m/s) and the compass bearing it blows toward
/// (0 = north, 90 = east).
struct Wind {
    double speed = 0.0;
    double bearing_deg = 0.0;
};

struct Landscape {
    int rows = 0, cols = 0;
    std::vector<CellType> cells; // row-major
    Wind wind;
    std::vector<std::pair<int, int>> seed_cells;
    double seed_fraction = 0.0; // used when seed_cells is empty

    CellType at(int r, int c) const { return cells[r * cols + c]; }
    int node(int r, int c) const { return r * cols + c; }
    int cell_count() const { return rows * cols; }

    /// Dimension/seed sanity; throws DomainError.
    void require_valid() const;
};

/// Fire-spread parameterization of the grid instance. Vegetation factors
/// apply to the destination cell (fire spreads into fuel); wind and
/// diagonal coefficients come from the cellular-automata wildfire
/// literature and are configuration, not asserted constants.
struct WildfireParams {
    double beta_baseline = 0.5;
    double beta_veg_desert = 0.1;
    double beta_veg_grassland = 1.0;
    double beta_veg_eucalyptus = 1.4;
    double beta_veg_city = 1.0;
    double delta = 0.5; // unmodified recovery rate, all nodes
    double cost_city = 1.0;
    double cost_other = 0.001;
    double wind_c1 = 0.045;
    double wind_c2 = 0.131;
    double diagonal_factor = 0.83;
    double h = 0.1;
    double beta_lower_fraction = 0.01; // beta floor as a fraction of beta_upper
    double delta_upper = 0.9;          // highest reachable recovery rate
    double delta_cap = 1.0;            // saturation rate
    double alpha = 0.0;                // <= 0: use 1/(0.05 + rho(A_upper))
    double gamma_bar = 10.0;
    int L = 1;

    double beta_veg(CellType t) const;
};

/// exp(V c1 + V c2 (cos theta - 1)) where theta is the angle between the
/// wind bearing and the spread bearing; 1 when the air is still.
double wind_factor(const WildfireParams& p, const Wind& w,
                   double edge_bearing_deg);

/// Compass bearing of the spread direction from cell j=(r2,c2) into cell
/// i=(r1,c1).
double edge_bearing_deg(int r1, int c1, int r2, int c2);

/// One node per cell (water cells stay as isolated nodes so grid indexing
/// is stable), 8-neighborhood edges with no water endpoints, rates
/// beta_baseline * beta_veg(destination) * beta_wind, diagonal edges
/// additionally scaled. Throws on step-size violations.
SpreadingNetwork build_wildfire_network(const Landscape& scape,
                                        const WildfireParams& params);

/// Initial outbreak from the landscape's seed spec. Explicit cells must
/// not be water; fraction mode picks ceil(fraction * n) non-water nodes by
/// a seeded deterministic draw.
StateVector seed_outbreak(const Landscape& scape, std::uint64_t seed);

/// Landscape file: {rows, cols, cells:[row strings of D/G/E/W/C],
/// wind:{speed, bearing_deg}, seeds:[[r,c]] | seed_fraction,
/// params:{field overrides}}.
Landscape load_landscape(const std::filesystem::path& path,
                         WildfireParams* params_out = nullptr);
void save_landscape(const Landscape& scape, const WildfireParams& params,
                    const std::filesystem::path& path);

/// Procedural fictional landscape: grassland with a eucalyptus forest, a
/// desert margin, a lake and a city block; deterministic in (rows, cols,
/// seed).
Landscape demo_landscape(int rows, int cols, std::uint64_t seed);

/// Cell-type raster as a CSV grid (one letter per cell).
void write_landscape_raster_csv(std::ostream& out, const Landscape& scape);

} // namespace spmpc
