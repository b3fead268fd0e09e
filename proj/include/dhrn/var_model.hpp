#pragma once
// Vector-autoregressive market of log spot returns and log discrete local
// volatilities.
//
// State vector layout: Y[0] is the backward log spot return, Y[1 + j*n + i]
// the log DLV at maturity j and strike i. The process is
//
//   Y_t - mu = A_1 (Y_{t-1} - mu) + ... + A_p (Y_{t-p} - mu) + u_t,   u_t ~ N(0, Sigma_u).

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dhrn/dlv.hpp"
#include "dhrn/market.hpp"

namespace dhrn {

struct VARParams {
    std::vector<Eigen::MatrixXd> coefficients;  // A_1..A_p
    Eigen::VectorXd mean;
    Eigen::MatrixXd innovation_cov;
    std::vector<double> strikes;
    std::vector<int> maturities_steps;
    double step_dt = 1.0 / 252.0;
    /// p rows, oldest first; the last row is the state at the first trading step.
    Eigen::MatrixXd initial_lags;

    std::size_t order() const { return coefficients.size(); }
    std::size_t dimension() const { return 1 + strikes.size() * maturities_steps.size(); }
    DLVGrid grid() const;
    double spectral_radius() const;

    void validate() const;
};

/// Least-squares VAR(p) fit with intercept on the rows of series (T x d).
/// Grid metadata is copied into the result; the initial lags are the last p
/// observations. Throws std::invalid_argument on p = 0, too short a series,
/// or rank-deficient regressors.
VARParams fit_var(const Eigen::MatrixXd& series, std::size_t order, std::vector<double> strikes,
                  std::vector<int> maturities_steps, double step_dt);

struct VARSimulation {
    PathSet paths;
    std::size_t rejected_paths = 0;
};

/// Simulates n_paths paths with n_steps trading steps. Each step quotes the
/// spot plus a call and a put for every (maturity, strike) cell, priced from
/// that step's DLV surface; option marks are realized payoffs, so the state
/// process is run max-maturity steps past the trading horizon. Log DLVs are
/// exposed as aux state. Paths whose surfaces are not convertible are redrawn.
VARSimulation simulate_var(const VARParams& params, std::size_t n_paths, std::size_t n_steps, std::uint64_t seed);

/// Raw state series (n_obs x d) of a single VAR path, for fitting tests.
Eigen::MatrixXd simulate_var_series(const VARParams& params, std::size_t n_obs, std::uint64_t seed);

/// Synthetic stand-in for a fitted equity-index VAR(1) on maturities
/// {20, 40, 60} steps and strikes 0.85..1.15: persistent skewed DLVs, daily
/// return vol 15%, negative spot/vol correlation, spectral radius < 0.98.
VARParams paper_like_var_fixture();

}  // namespace dhrn
