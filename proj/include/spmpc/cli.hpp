#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "spmpc/mpc.hpp"
#include "spmpc/scenario.hpp"

namespace spmpc {

inline constexpr const char* kToolVersion = "spmpc 0.1.0";

/// Options shared by the subcommands; a --config JSON file may override
/// the defaults, explicit flags override the file. Every run writes a
/// manifest with the resolved values beside its outputs.
struct CliOptions {
    std::filesystem::path config_path;
    std::filesystem::path out_dir = ".";
    std::uint64_t seed = 0;
    double tol_feas = 1e-8;
    double tol_opt = 1e-6;
    double tail_tol = 1e-8;
    double epsilon2 = 1e-8;

    /// Apply the config file (when set); flags parsed afterwards win.
    void load_config();
};

/// Exit codes: 0 ok, 1 domain error (bad inputs, failed assumptions),
/// 2 internal error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitInternal = 2;

/// Prints the step-size checks, the Assumption 1 margin and the per-node
/// admissibility margins at the unmodified rates; 0 iff the instance is
/// valid and the margin positive.
int cmd_validate(const std::filesystem::path& network_path, std::ostream& out);

/// Uncontrolled simulation; writes trajectory.csv and risk_series.csv.
int cmd_simulate(const std::filesystem::path& network_path,
                 const std::filesystem::path& state_path, int steps,
                 const CliOptions& opt);

/// Closed-loop run on a landscape scenario; gamma_bar/L <= 0 fall back to
/// the scenario parameters. Writes run_log.csv, per-step allocation
/// triplets, diagnostics.json, a k-estimate sidecar and the manifest.
int cmd_mpc(const std::filesystem::path& scenario_path, double gamma_bar,
            int L, int steps, const CliOptions& opt);

/// Minimum admissibility resource and the K table for the given budgets.
int cmd_gamma_m(const std::filesystem::path& network_path,
                const std::vector<double>& budgets, const CliOptions& opt,
                std::ostream& out);

/// Build instance files from a landscape (or the procedural demo when
/// rows/cols are given): network.json, x0.csv, landscape_raster.csv.
int cmd_scenario_gen(const std::filesystem::path& landscape_path,
                     int demo_rows, int demo_cols, const CliOptions& opt);

/// state CSV helpers (columns node,x)
StateVector read_state_csv(const std::filesystem::path& path, int n);
void write_state_csv(const std::filesystem::path& path, const StateVector& x);

} // namespace spmpc
