#include "dhrn/black_scholes.hpp"

#include <algorithm>
#include <cmath>

#include "dhrn/rng.hpp"

namespace dhrn {

namespace {

// Time value of the call per unit strike: the out-of-the-money side of
// put-call parity, which avoids cancelling two terms near 1.
double time_value(double m, double sd) {
    const double d1 = std::log(m) / sd + 0.5 * sd;
    const double d2 = d1 - sd;
    const double v = m > 1.0 ? normal_cdf(-d2) - m * normal_cdf(-d1) : m * normal_cdf(d1) - normal_cdf(d2);
    return std::max(v, 0.0);
}

}  // namespace

double bs_call_price(double spot_over_strike, double sigma, double tau) {
    const double m = spot_over_strike;
    const double sd = sigma * std::sqrt(std::max(tau, 0.0));
    if (!(tau > 0.0) || !(sd > 1e-300) || !(m > 0.0)) return std::max(m - 1.0, 0.0);
    return std::max(m - 1.0, 0.0) + time_value(m, sd);
}

double bs_call_relative(double strike, double sigma, double tau) {
    return strike * bs_call_price(1.0 / strike, sigma, tau);
}

double bs_put_relative(double strike, double sigma, double tau) {
    const double m = 1.0 / strike;
    const double sd = sigma * std::sqrt(std::max(tau, 0.0));
    if (!(tau > 0.0) || !(sd > 1e-300)) return std::max(strike - 1.0, 0.0);
    return std::max(strike - 1.0, 0.0) + strike * time_value(m, sd);
}

double bs_call_delta_relative(double strike, double sigma, double tau) {
    const double sd = sigma * std::sqrt(std::max(tau, 0.0));
    if (!(tau > 0.0) || !(sd > 1e-300)) return strike < 1.0 ? 1.0 : (strike > 1.0 ? 0.0 : 0.5);
    return normal_cdf(-std::log(strike) / sd + 0.5 * sd);
}

}  // namespace dhrn
