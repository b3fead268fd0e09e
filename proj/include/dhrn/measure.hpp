#pragma once
// Measure change q* proportional to exp(-G(a*)) and its diagnostics, plus
// closed-form oracles for the binomial and Black-Scholes worlds.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dhrn/simulators.hpp"

namespace dhrn {

struct MeasureWeights {
    std::vector<double> q;        // sums to 1
    double log_normalizer = 0.0;  // log E_P[exp(-G)]
    std::vector<double> gains;    // G(a*) per path
    std::string config_digest;

    double ess() const;
    std::size_t size() const { return q.size(); }
};

/// q_i = b_i exp(-G_i) / sum_j b_j exp(-G_j) with base probabilities b
/// (uniform when empty). Throws std::invalid_argument when a gain is NaN or
/// +inf, or -inf on a path with positive base weight.
MeasureWeights measure_weights(std::span<const double> gains, std::string config_digest = {},
                               std::span<const double> base = {});

/// sum_i q_i log(q_i / b_i), with b uniform (1/N) when empty.
double relative_entropy(std::span<const double> q, std::span<const double> base = {});

double effective_sample_size(std::span<const double> q);

/// dQ*/dP = exp(-(mu/sigma) W_T - mu^2 T / (2 sigma^2)) with W_T recovered
/// from the terminal spot S_T/S_0 of a Black-Scholes path.
double bs_memm_density(double terminal_spot_ratio, double mu, double sigma, double horizon);

/// (1/lambda) log(1 + eps) with eps = loss_tilde / loss_star - 1.
double epsilon_bound(double loss_tilde, double loss_star, double lambda);

struct BinomialOracle {
    double a_star = 0.0;
    double g = 0.0;                 // U_lambda(G(a*))
    double q_up = 0.0, q_down = 0.0;  // exact two-point weights
    bool classical_arbitrage = false;  // a* and g unbounded
    bool in_band = false;
};

BinomialOracle binomial_oracle(const BinomialParams& params, double lambda);

/// Quantiles of q at the given probability levels (linear interpolation
/// between order statistics).
std::vector<double> weight_quantiles(std::span<const double> q, std::span<const double> levels);

}  // namespace dhrn
