#include "dhrn/dlv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dhrn {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kDominanceTol = 1e-14;

struct Greeks {
    double gamma;
    double theta;
    double gamma_tol;
    double theta_tol;
};

// Prices with ghost boundaries: row j of size n+2, row -1 is intrinsic.
double boundary_price(const CallGrid& g, std::size_t j_plus_one, std::size_t i_ext) {
    const auto n = g.grid.n_strikes();
    const double x = i_ext == 0 ? 0.0 : (i_ext == n + 1 ? g.grid.ghost_high() : g.grid.strikes[i_ext - 1]);
    if (j_plus_one == 0 || i_ext == 0 || i_ext == n + 1) return std::max(1.0 - x, 0.0);
    return g(j_plus_one - 1, i_ext - 1);
}

double ext_strike(const DLVGrid& grid, std::size_t i_ext) {
    if (i_ext == 0) return 0.0;
    if (i_ext == grid.n_strikes() + 1) return grid.ghost_high();
    return grid.strikes[i_ext - 1];
}

Greeks cell_greeks(const CallGrid& g, std::size_t j, std::size_t i) {
    const auto& grid = g.grid;
    const std::size_t ie = i + 1;
    const double xl = ext_strike(grid, ie - 1), x = ext_strike(grid, ie), xr = ext_strike(grid, ie + 1);
    const double cl = boundary_price(g, j + 1, ie - 1);
    const double c = boundary_price(g, j + 1, ie);
    const double cr = boundary_price(g, j + 1, ie + 1);
    const double c_prev = boundary_price(g, j, ie);
    const double delta_r = (cr - c) / (xr - x);
    const double delta_l = (c - cl) / (x - xl);
    const double half_span = 0.5 * (xr - xl);
    const double dtau = grid.maturities[j] - (j == 0 ? 0.0 : grid.maturities[j - 1]);
    Greeks out;
    out.gamma = (delta_r - delta_l) / half_span;
    out.theta = (c - c_prev) / dtau;
    // Rounding noise floor of each finite difference.
    out.gamma_tol = 4.0 * kEps * (std::abs(cr) / (xr - x) + 2.0 * std::abs(c) / std::min(xr - x, x - xl) + std::abs(cl) / (x - xl)) / half_span;
    out.theta_tol = 4.0 * kEps * (std::abs(c) + std::abs(c_prev)) / dtau;
    return out;
}

// A difference within its rounding-noise floor carries no sign information.
// When Gamma is unresolved but Theta is not, the cell is only degenerate if no
// vol up to kMaxResolvedVol is consistent with the noise floor.
constexpr double kMaxResolvedVol = 5.0;

struct Classification {
    bool butterfly = false;
    bool calendar = false;
    bool degenerate = false;
};

Classification classify(const Greeks& g, double x) {
    Classification c;
    c.butterfly = g.gamma < -g.gamma_tol;
    c.calendar = g.theta < -g.theta_tol;
    if (!c.butterfly && !c.calendar && g.gamma <= g.gamma_tol && g.theta > g.theta_tol)
        c.degenerate = 2.0 * g.theta > kMaxResolvedVol * kMaxResolvedVol * x * x * g.gamma_tol;
    return c;
}

double local_vol(const Greeks& g, double x) {
    const auto c = classify(g, x);
    if (c.butterfly || c.calendar || c.degenerate) return std::numeric_limits<double>::infinity();
    if (g.theta <= 0.0) return 0.0;
    if (g.gamma <= g.gamma_tol) {
        if (g.theta <= g.theta_tol) return 0.0;
        return std::sqrt(2.0 * g.theta / (x * x * std::max(g.gamma, g.gamma_tol)));
    }
    return std::sqrt(2.0 * g.theta / (x * x * g.gamma));
}

}  // namespace

void DLVGrid::validate() const {
    if (maturities.empty() || strikes.empty()) throw std::invalid_argument("DLV grid needs maturities and strikes");
    if (!(maturities.front() > 0.0)) throw std::invalid_argument("maturities must be > 0");
    if (!(strikes.front() > 0.0)) throw std::invalid_argument("strikes must be > 0");
    for (std::size_t j = 1; j < maturities.size(); ++j)
        if (!(maturities[j] > maturities[j - 1])) throw std::invalid_argument("maturities must be strictly increasing");
    for (std::size_t i = 1; i < strikes.size(); ++i)
        if (!(strikes[i] > strikes[i - 1])) throw std::invalid_argument("strikes must be strictly increasing");
    if (!(strikes.front() < 1.0 && strikes.back() > 1.0)) throw std::invalid_argument("strikes must bracket 1");
}

bool DLVSurface::finite() const {
    return std::all_of(sigma.begin(), sigma.end(), [](double s) { return std::isfinite(s); });
}

DLVSurface dlv_from_calls(const CallGrid& grid) {
    grid.grid.validate();
    const auto m = grid.grid.n_maturities();
    const auto n = grid.grid.n_strikes();
    if (grid.values.size() != m * n) throw std::invalid_argument("call grid has wrong size");
    DLVSurface out{grid.grid, std::vector<double>(m * n)};
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto g = cell_greeks(grid, j, i);
            out(j, i) = local_vol(g, grid.grid.strikes[i]);
        }
    }
    return out;
}

CallGrid calls_from_dlv(const DLVSurface& surface) {
    const auto& grid = surface.grid;
    grid.validate();
    const auto m = grid.n_maturities();
    const auto n = grid.n_strikes();
    if (surface.sigma.size() != m * n) throw std::invalid_argument("DLV surface has wrong size");
    std::string bad;
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(surface(j, i)) || surface(j, i) < 0.0)
                bad += " (" + std::to_string(j) + "," + std::to_string(i) + ")";
    if (!bad.empty()) throw std::invalid_argument("DLV surface has non-finite or negative cells:" + bad);

    CallGrid out{grid, std::vector<double>(m * n)};
    std::vector<double> prev(n), lower(n), diag(n), upper(n), rhs(n);
    for (std::size_t i = 0; i < n; ++i) prev[i] = std::max(1.0 - grid.strikes[i], 0.0);
    const double c_left = 1.0;                                       // ghost x_0 = 0
    const double c_right = std::max(1.0 - grid.ghost_high(), 0.0);  // ghost x_{n+1}

    for (std::size_t j = 0; j < m; ++j) {
        const double dtau = grid.maturities[j] - (j == 0 ? 0.0 : grid.maturities[j - 1]);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ie = i + 1;
            const double xl = ext_strike(grid, ie - 1), x = ext_strike(grid, ie), xr = ext_strike(grid, ie + 1);
            const double s = surface(j, i);
            const double alpha = dtau * 0.5 * s * s * x * x / (0.5 * (xr - xl));
            const double wl = alpha / (x - xl);
            const double wr = alpha / (xr - x);
            lower[i] = -wl;
            upper[i] = -wr;
            diag[i] = 1.0 + wl + wr;
            rhs[i] = prev[i];
            if (i == 0) rhs[i] += wl * c_left;
            if (i + 1 == n) rhs[i] += wr * c_right;
            const double off = (i > 0 ? wl : 0.0) + (i + 1 < n ? wr : 0.0);
            if (!(diag[i] - off >= kDominanceTol * diag[i]))
                throw std::invalid_argument("implicit DLV system not diagonally dominant at cell (" + std::to_string(j) +
                                            "," + std::to_string(i) + ")");
        }
        // Thomas algorithm.
        for (std::size_t i = 1; i < n; ++i) {
            const double w = lower[i] / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        prev[n - 1] = rhs[n - 1] / diag[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) prev[i] = (rhs[i] - upper[i] * prev[i + 1]) / diag[i];
        for (std::size_t i = 0; i < n; ++i) out(j, i) = prev[i];
    }
    return out;
}

const char* to_string(ArbitrageKind kind) {
    switch (kind) {
        case ArbitrageKind::butterfly: return "butterfly";
        case ArbitrageKind::calendar: return "calendar";
        case ArbitrageKind::degenerate: return "degenerate";
    }
    return "?";
}

std::vector<ArbitrageViolation> static_arbitrage_report(const CallGrid& grid) {
    grid.grid.validate();
    const auto m = grid.grid.n_maturities();
    const auto n = grid.grid.n_strikes();
    if (grid.values.size() != m * n) throw std::invalid_argument("call grid has wrong size");
    std::vector<ArbitrageViolation> out;
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto g = cell_greeks(grid, j, i);
            const auto kind = classify(g, grid.grid.strikes[i]);
            if (kind.butterfly) out.push_back({j, i, ArbitrageKind::butterfly, g.gamma, g.theta});
            if (kind.calendar) out.push_back({j, i, ArbitrageKind::calendar, g.gamma, g.theta});
            if (kind.degenerate) out.push_back({j, i, ArbitrageKind::degenerate, g.gamma, g.theta});
        }
    }
    return out;
}

void write_surface_csv(const std::filesystem::path& file, const DLVGrid& grid, const std::vector<double>& values) {
    std::FILE* f = std::fopen(file.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + file.string());
    std::fprintf(f, "maturity");
    for (double x : grid.strikes) std::fprintf(f, ",%.17g", x);
    std::fprintf(f, "\n");
    for (std::size_t j = 0; j < grid.n_maturities(); ++j) {
        std::fprintf(f, "%.17g", grid.maturities[j]);
        for (std::size_t i = 0; i < grid.n_strikes(); ++i) {
            const double v = values[j * grid.n_strikes() + i];
            if (std::isinf(v))
                std::fprintf(f, ",inf");
            else
                std::fprintf(f, ",%.17g", v);
        }
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

std::pair<DLVGrid, std::vector<double>> read_surface_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        return cells;
    };
    auto number = [&](const std::string& s) {
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(file.string() + ": bad number '" + s + "'");
        return v;
    };
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument(file.string() + ": empty surface file");
    auto header = split(line);
    if (header.size() < 2) throw std::invalid_argument(file.string() + ": header needs strikes");
    DLVGrid grid;
    for (std::size_t k = 1; k < header.size(); ++k) grid.strikes.push_back(number(header[k]));
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != header.size())
            throw std::invalid_argument(file.string() + ": row has " + std::to_string(cells.size()) + " cells, expected " +
                                        std::to_string(header.size()));
        grid.maturities.push_back(number(cells[0]));
        for (std::size_t k = 1; k < cells.size(); ++k) values.push_back(number(cells[k]));
    }
    grid.validate();
    return {grid, values};
}

}  // namespace dhrn
