#pragma once
// Entropic utility U_lambda(X) = -(1/lambda) log E[exp(-lambda X)] on weighted
// samples, with U_0 = E[X] and U_inf = ess inf X.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

namespace dhrn {

/// weights may be empty (uniform) or nonnegative with a positive sum; they
/// are normalized internally. lambda = +inf gives the minimum over samples
/// with positive weight.
double entropy_utility(std::span<const double> x, double lambda, std::span<const double> weights = {});

using SampleStatistic = std::function<double(std::span<const double> x, std::span<const double> weights)>;

/// Bootstrap standard error of stat: paths are resampled uniformly with
/// replacement and keep their weights. Deterministic in seed.
double bootstrap_se(std::span<const double> x, std::span<const double> weights, const SampleStatistic& stat,
                    std::size_t n_boot = 200, std::uint64_t seed = 7);

double utility_se(std::span<const double> x, double lambda, std::span<const double> weights = {},
                  std::size_t n_boot = 200, std::uint64_t seed = 7);

}  // namespace dhrn
