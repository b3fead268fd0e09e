#pragma once
// Zero-rate Black-Scholes prices.

namespace dhrn {

/// Call price per unit strike: m N(d1) - N(d2) with m = S/K. Returns the
/// intrinsic value (m - 1)^+ when tau <= 0 or the total variance vanishes.
double bs_call_price(double spot_over_strike, double sigma, double tau);

/// Price of the floating call paying (S_T/S_0 - k)^+.
double bs_call_relative(double strike, double sigma, double tau);
/// Price of the floating put paying (k - S_T/S_0)^+, via parity.
double bs_put_relative(double strike, double sigma, double tau);

/// dC/dS for the floating call, i.e. N(d1).
double bs_call_delta_relative(double strike, double sigma, double tau);

}  // namespace dhrn
