#include "dhrn/utility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dhrn/entropy_loss.hpp"
#include "dhrn/rng.hpp"

namespace dhrn {

double entropy_utility(std::span<const double> x, double lambda, std::span<const double> weights) {
    if (x.empty()) throw std::invalid_argument("utility of an empty sample");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    if (!weights.empty() && weights.size() != x.size()) throw std::invalid_argument("weights do not match sample");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("weights must be nonnegative");
        total += w;
    }
    if (!weights.empty() && !(total > 0.0)) throw std::invalid_argument("weights must have a positive sum");
    if (std::isinf(lambda)) {
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < x.size(); ++k)
            if (weights.empty() || weights[k] > 0.0) lo = std::min(lo, x[k]);
        return lo;
    }
    return -entropy_loss(x, lambda, weights);
}

double bootstrap_se(std::span<const double> x, std::span<const double> weights, const SampleStatistic& stat,
                    std::size_t n_boot, std::uint64_t seed) {
    const std::size_t n = x.size();
    if (n < 2 || n_boot < 2) return 0.0;
    std::vector<double> xs(n), ws(weights.empty() ? 0 : n), values;
    values.reserve(n_boot);
    for (std::size_t r = 0; r < n_boot; ++r) {
        Rng rng(seed, 0x626f6f7400000000ULL + r);
        double wsum = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const auto j = static_cast<std::size_t>(rng.below(n));
            xs[k] = x[j];
            if (!weights.empty()) {
                ws[k] = weights[j];
                wsum += ws[k];
            }
        }
        if (!weights.empty() && !(wsum > 0.0)) continue;
        const double v = stat(xs, ws);
        if (std::isfinite(v)) values.push_back(v);
    }
    if (values.size() < 2) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double utility_se(std::span<const double> x, double lambda, std::span<const double> weights, std::size_t n_boot,
                  std::uint64_t seed) {
    return bootstrap_se(
        x, weights, [lambda](std::span<const double> xs, std::span<const double> ws) { return entropy_utility(xs, lambda, ws); },
        n_boot, seed);
}

}  // namespace dhrn
