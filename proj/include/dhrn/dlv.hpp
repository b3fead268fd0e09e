#pragma once
// Discrete local volatility (DLV) surfaces.
//
// A call grid C^{j,i} over maturities tau_1 < ... < tau_m (tau_0 = 0) and
// relative strikes x_1 < ... < x_n is mapped to local volatilities through
//
//   Delta^{j,i} = (C^{j,i+1} - C^{j,i}) / (x_{i+1} - x_i)
//   Gamma^{j,i} = (Delta^{j,i} - Delta^{j,i-1}) / ((x_{i+1} - x_{i-1}) / 2)
//   Theta^{j,i} = (C^{j,i} - C^{j-1,i}) / (tau_j - tau_{j-1})
//   sigma^{j,i} = sqrt(2 Theta / (x_i^2 Gamma))
//
// with sigma = +inf on a negative butterfly (Gamma < 0), a negative calendar
// spread (Theta < 0), or Gamma = 0 with Theta > 0. Ghost strikes x_0 = 0 and
// x_{n+1} = 1 + 2 x_n carry intrinsic values, as does tau_0. Finite surfaces
// are exactly the arbitrage-free grids. The inverse map solves one implicit
// finite-difference step (a tridiagonal system) per maturity.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace dhrn {

struct DLVGrid {
    std::vector<double> maturities;  // years, tau_1..tau_m
    std::vector<double> strikes;     // x_1..x_n

    std::size_t n_maturities() const { return maturities.size(); }
    std::size_t n_strikes() const { return strikes.size(); }
    double ghost_low() const { return 0.0; }
    double ghost_high() const { return 1.0 + 2.0 * strikes.back(); }

    /// Strictly increasing grids, strikes > 0 bracketing 1, maturities > 0.
    void validate() const;
};

/// Call prices per unit initial spot, values[j * n + i].
struct CallGrid {
    DLVGrid grid;
    std::vector<double> values;

    double operator()(std::size_t j, std::size_t i) const { return values[j * grid.n_strikes() + i]; }
    double& operator()(std::size_t j, std::size_t i) { return values[j * grid.n_strikes() + i]; }
};

struct DLVSurface {
    DLVGrid grid;
    std::vector<double> sigma;  // +inf marks static arbitrage

    double operator()(std::size_t j, std::size_t i) const { return sigma[j * grid.n_strikes() + i]; }
    double& operator()(std::size_t j, std::size_t i) { return sigma[j * grid.n_strikes() + i]; }
    bool finite() const;
};

DLVSurface dlv_from_calls(const CallGrid& grid);

/// Throws std::invalid_argument on infinite/negative vols or a system that is
/// not diagonally dominant (the message names the offending cells).
CallGrid calls_from_dlv(const DLVSurface& surface);

enum class ArbitrageKind { butterfly, calendar, degenerate };
const char* to_string(ArbitrageKind kind);

struct ArbitrageViolation {
    std::size_t maturity_index;
    std::size_t strike_index;
    ArbitrageKind kind;
    double gamma;
    double theta;
};

/// Every cell with Gamma < 0, Theta < 0, or Gamma = 0 with Theta > 0. A cell
/// violating both butterfly and calendar conditions is listed once per kind.
std::vector<ArbitrageViolation> static_arbitrage_report(const CallGrid& grid);

/// CSV: header "maturity,<x_1>,...,<x_n>", then one row per maturity.
/// Infinite entries are written as "inf".
void write_surface_csv(const std::filesystem::path& file, const DLVGrid& grid, const std::vector<double>& values);
std::pair<DLVGrid, std::vector<double>> read_surface_csv(const std::filesystem::path& file);

}  // namespace dhrn
