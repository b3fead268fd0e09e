#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "dhrn/dlv.hpp"
#include "dhrn/market.hpp"
#include "dlv_fixtures.hpp"

using namespace dhrn;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

bool reported(const std::vector<ArbitrageViolation>& v, std::size_t j, std::size_t i, ArbitrageKind kind) {
    for (const auto& x : v)
        if (x.maturity_index == j && x.strike_index == i && x.kind == kind) return true;
    return false;
}

}  // namespace

TEST_CASE("hand-computed local vol on a tiny grid") {
    // One maturity, strikes {0.9, 1, 1.1}, ghosts at 0 and 3.2.
    CallGrid c{{{0.5}, {0.9, 1.0, 1.1}}, {0.13, 0.06, 0.02}};
    const auto s = dlv_from_calls(c);
    REQUIRE(s.finite());
    const double delta_lo = (0.06 - 0.13) / 0.1, delta_hi = (0.02 - 0.06) / 0.1;
    const double gamma = (delta_hi - delta_lo) / 0.1;
    const double theta = 0.06 / 0.5;
    CHECK(s(0, 1) == doctest::Approx(std::sqrt(2.0 * theta / gamma)).epsilon(1e-14));
    // Intrinsic left ghost: Delta from x_0 = 0 to x_1 is (0.13 - 1) / 0.9.
    const double g0 = (delta_lo - (0.13 - 1.0) / 0.9) / 0.5;
    CHECK(s(0, 0) == doctest::Approx(std::sqrt(2.0 * (0.13 - 0.1) / 0.5 / (0.81 * g0))).epsilon(1e-14));
}

TEST_CASE("round trip on random arbitrage-free grids") {
    Rng rng(2024);
    for (int k = 0; k < 20; ++k) {
        const auto s = testing::random_surface(rng);
        const auto calls = calls_from_dlv(s);
        CHECK(static_arbitrage_report(calls).empty());
        const auto back = dlv_from_calls(calls);
        REQUIRE(back.finite());
        CHECK(max_abs_diff(back.sigma, s.sigma) < 1e-8);
        CHECK(max_abs_diff(calls_from_dlv(back).values, calls.values) <= 1e-10);
    }
}

TEST_CASE("flat surface reprices the at-the-money call") {
    DLVSurface s;
    for (int i = 0; i <= 200; ++i) s.grid.strikes.push_back(0.5 + 0.005 * i);
    for (int j = 1; j <= 30; ++j) s.grid.maturities.push_back(j / 252.0);
    s.sigma.assign(s.grid.n_strikes() * s.grid.n_maturities(), 0.15);
    const auto c = calls_from_dlv(s);
    const double tau = s.grid.maturities.back();
    const double price = c(29, 100);
    CHECK(std::abs(price - bs_call_relative(1.0, 0.15, tau)) < 1e-3);
    CHECK(std::abs(testing::implied_vol(price, 1.0, tau) - 0.15) < 1e-3);
}

TEST_CASE("injected violations are flagged at their cell") {
    Rng rng(7);
    for (int k = 0; k < 20; ++k) {
        const auto s = testing::random_surface(rng);
        const auto calls = calls_from_dlv(s);
        const auto j = rng.below(s.grid.n_maturities());
        const auto i = rng.below(s.grid.n_strikes());

        // Lift (j, i) just above the chord of its neighbours, ghosts included.
        const auto& x = s.grid.strikes;
        const double xl = i == 0 ? s.grid.ghost_low() : x[i - 1];
        const double xr = i + 1 == x.size() ? s.grid.ghost_high() : x[i + 1];
        const double cl = i == 0 ? 1.0 : calls(j, i - 1);
        const double cr = i + 1 == x.size() ? 0.0 : calls(j, i + 1);
        auto bump = calls;
        bump(j, i) = cl + (cr - cl) * (x[i] - xl) / (xr - xl) + 1e-4;
        const auto vb = static_arbitrage_report(bump);
        CHECK(reported(vb, j, i, ArbitrageKind::butterfly));
        CHECK(!dlv_from_calls(bump).finite());
        CHECK(std::isinf(dlv_from_calls(bump)(j, i)));

        if (j == 0) continue;
        auto cal = calls;
        cal(j, i) = calls(j - 1, i) - 1e-4;
        const auto vc = static_arbitrage_report(cal);
        CHECK(reported(vc, j, i, ArbitrageKind::calendar));
        for (const auto& v : vc) {
            CHECK(v.maturity_index >= j);
            CHECK(v.maturity_index <= j + 1);
        }
    }
}

TEST_CASE("invalid grids and surfaces are rejected") {
    CHECK_THROWS_AS((DLVGrid{{0.5}, {1.1, 1.2}}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((DLVGrid{{0.5, 0.4}, {0.9, 1.1}}.validate()), std::invalid_argument);
    DLVSurface bad{{{0.5}, {0.9, 1.1}}, {0.2, kInf}};
    CHECK_THROWS_AS(calls_from_dlv(bad), std::invalid_argument);
    bad.sigma = {0.2, -0.1};
    CHECK_THROWS_AS(calls_from_dlv(bad), std::invalid_argument);
}

TEST_CASE("surface csv round trip keeps infinities") {
    const DLVGrid g{{0.1, 0.2}, {0.9, 1.0, 1.1}};
    const std::vector<double> v{0.2, 0.21, kInf, 0.19, 0.2, 0.22};
    const auto file = std::filesystem::temp_directory_path() / "dhrn_test_surface.csv";
    write_surface_csv(file, g, v);
    const auto [g2, v2] = read_surface_csv(file);
    CHECK(g2.strikes == g.strikes);
    CHECK(g2.maturities == g.maturities);
    CHECK(v2 == v);
    std::filesystem::remove(file);
}

TEST_CASE("black-scholes calls map to vols near the input") {
    DLVGrid coarse{{20.0 / 252, 40.0 / 252, 60.0 / 252}, {0.85, 0.90, 0.95, 1.00, 1.05, 1.10, 1.15}};
    CHECK(dlv_from_calls(testing::bs_grid(coarse, 0.15)).finite());

    DLVGrid fine;
    for (int j = 1; j <= 20; ++j) fine.maturities.push_back(j / 252.0);
    for (int i = 0; i <= 160; ++i) fine.strikes.push_back(0.8 + 0.0025 * i);
    const auto s = dlv_from_calls(testing::bs_grid(fine, 0.15));
    REQUIRE(s.finite());
    // Away from the first steps and the wings the scheme has converged.
    for (std::size_t j = 9; j < fine.n_maturities(); ++j)
        for (std::size_t i = 64; i <= 96; ++i) CHECK(std::abs(s(j, i) / 0.15 - 1.0) < 0.05);
}
