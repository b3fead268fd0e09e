#pragma once
// Path generators for the binomial and Black-Scholes worlds. The VAR local
// volatility market lives in var_model.hpp.
//
// All generators are deterministic functions of (params, seed). Paths are
// produced in fixed blocks of kSimBlock paths, block b drawing from the
// stream Rng(seed, b), so output does not depend on the thread count.

#include <cstdint>
#include <optional>

#include "dhrn/market.hpp"

namespace dhrn {

inline constexpr std::size_t kSimBlock = 1024;

struct BSParams {
    double mu = 0.0;
    double sigma_realized = 0.2;
    std::optional<double> sigma_implied;
    std::size_t n_steps = 30;
    double dt = 1.0 / 252.0;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    /// Tenor of the quoted ATM options; defaults to the remaining horizon and
    /// is capped so every option expires by the end of the path.
    std::optional<int> option_tenor_steps;

    void validate() const;
    double horizon() const { return dt * static_cast<double>(n_steps); }
};

struct BinomialParams {
    double u = 0.1;
    double d = -0.1;
    double p = 0.5;
    double gamma = 0.0;

    void validate() const;
};

/// Spot only, S_t = exp((mu - sigma^2/2) t + sigma W_t). The spot's terminal
/// mark is S_T.
PathSet simulate_bs(const BSParams& params);

/// Spot at sigma_realized plus an ATM call and put quoted at sigma_implied
/// each step; option marks are the realized payoffs (S_{t+tau}/S_t - 1)^+-.
PathSet simulate_bs_with_options(const BSParams& params);

/// One step, one instrument with H_0 = 1 and H_1 - H_0 in {u, d}.
PathSet simulate_binomial(const BinomialParams& params, std::size_t n_paths, std::uint64_t seed);

/// Exact two-point enumeration of the binomial world: path 0 is the up
/// state, path 1 the down state, with probabilities (p, 1-p).
struct WeightedPathSet {
    PathSet paths;
    std::vector<double> weights;
};
WeightedPathSet binomial_tree(const BinomialParams& params);

CostSpec binomial_cost(const BinomialParams& params);

}  // namespace dhrn
