#pragma once
// Entropic training loss and its gradient.
//
//   L(theta) = (1/lambda) log( sum_p w_p exp(-lambda (Z_p + G_p(theta))) / sum_p w_p ) = -U_lambda(Z + G)
//
// with lambda = 0 meaning the risk-neutral loss -E_w[Z + G]. The gradient is
// accumulated by hand through the gains, the cost kinks and the network.

#include <cstddef>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "dhrn/market.hpp"
#include "dhrn/policy_net.hpp"

namespace dhrn {

/// Subgradient of |x| used at cost kinks: sign(x), and 0 at x = 0.
double subgradient_abs(double x);

struct LossInputs {
    const PathSet* paths = nullptr;
    const CostSpec* cost = nullptr;
    double lambda = 1.0;
    std::span<const double> weights;  // per path of *paths; empty means uniform
    std::span<const double> payoff;   // Z per path of *paths; empty means 0
};

struct LossResult {
    double loss = 0.0;
    Eigen::VectorXd grad;
    /// Paths whose exponent sits more than 60 below the largest one; their
    /// weight in the loss underflows to zero.
    std::size_t underflow = 0;
};

/// Paths are processed in fixed shards of kLossShard and combined by a
/// pairwise tree, so the result does not depend on the thread count.
inline constexpr std::size_t kLossShard = 64;

/// Throws std::runtime_error naming the first path with a non-finite gain.
LossResult loss_and_grad(const PolicyNet& net, const LossInputs& in, std::span<const std::size_t> batch);

/// Loss of precomputed terminal values X = Z + G under weights w (empty: uniform).
double entropy_loss(std::span<const double> x, double lambda, std::span<const double> weights = {});

}  // namespace dhrn
