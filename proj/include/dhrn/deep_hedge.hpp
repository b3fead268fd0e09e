#pragma once
// Deep hedging g_lambda(Z) = sup_a U_lambda(Z + G(a)) under P or under the
// reweighted measure Q*, indifference prices, and the consistency checks
// between hedging under P and under Q*.

#include <string>
#include <vector>

#include "dhrn/measure.hpp"
#include "dhrn/statarb.hpp"

namespace dhrn {

/// Terminal payoff built from the path's own spot: sum of coefficient *
/// f(S_T / S_0) with f one of cash (1), spot (S_T/S_0), call (S_T/S_0 - k)^+
/// or put (k - S_T/S_0)^+.
struct PayoffTerm {
    enum class Kind { cash, spot, call, put };
    Kind kind = Kind::cash;
    double coefficient = 1.0;
    double strike = 1.0;
};

struct PortfolioPayoff {
    std::vector<PayoffTerm> terms;

    static PortfolioPayoff cash(double amount);
    static PortfolioPayoff call(double strike, double coefficient = 1.0);
    static PortfolioPayoff put(double strike, double coefficient = 1.0);

    PortfolioPayoff operator+(const PortfolioPayoff& other) const;
    PortfolioPayoff operator-(const PortfolioPayoff& other) const;
    PortfolioPayoff scaled(double factor) const;

    /// Throws std::invalid_argument if a value is not finite.
    std::vector<double> evaluate(const PathSet& paths) const;
};

PayoffTerm::Kind payoff_kind_from_string(const std::string& s);

struct HedgeConfig {
    StatArbConfig net;  // training settings; net.train.lambda is overridden per call
};

struct HedgeResult {
    PolicyNet net;
    double g = 0.0;        // max(U(Z + G(a)), U(Z)) on validation
    double g_raw = 0.0;    // U(Z + G(a)) on validation
    double g_se = 0.0;
    std::string measure;   // "P" or "Q*"
    std::string config_digest;
};

HedgeResult deep_hedge(const PortfolioPayoff& z, const PathSet& train, const PathSet& valid, const CostSpec& cost,
                       double lambda, const HedgeConfig& config, std::span<const double> w_train = {},
                       std::span<const double> w_valid = {});

struct IndifferencePrice {
    double price = 0.0;  // g(Z) - g(Z - X)
    double g_z = 0.0;
    double g_z_minus_x = 0.0;
    double se = 0.0;
};

/// pi_lambda(X | Z) = g_lambda(Z) - g_lambda(Z - X), both runs with the same
/// seeds.
IndifferencePrice indifference_price(const PortfolioPayoff& x, const PortfolioPayoff& z, const PathSet& train,
                                     const PathSet& valid, const CostSpec& cost, double lambda,
                                     const HedgeConfig& config, std::span<const double> w_train = {},
                                     std::span<const double> w_valid = {});

/// Trained ingredients shared by the P-versus-Q* checks: the statarb policy
/// a*_1 and its measure, a*_lambda, and hedges of Z under P and under Q*.
struct HedgeStudy {
    double lambda = 1.0;
    bool zero_cost = false;
    StatArbResult statarb;        // lambda = 1, under P
    PolicyNet statarb_lambda;     // a*_lambda
    MeasureWeights q_train, q_valid;
    double g_lambda = 0.0, g_lambda_se = 0.0;  // U_lambda(G(a*_lambda)) on validation
    HedgeResult under_p;          // a'
    HedgeResult under_q;          // a''
    std::vector<double> z_valid;
};

HedgeStudy run_hedge_study(const PortfolioPayoff& z, const PathSet& train, const PathSet& valid, const CostSpec& cost,
                           double lambda, const HedgeConfig& config);

struct DH1Report {
    double lhs = 0.0;  // g*_lambda(Z)
    double rhs = 0.0;  // g_lambda(Z) - g_lambda
    double se = 0.0;
    bool equality_expected = false;
    bool pass = false;
};

/// g*_lambda(Z) <= g_lambda(Z) - g_lambda within confidence * se, and
/// |lhs - rhs| <= confidence * se at zero cost.
DH1Report check_prop_dh1(const HedgeStudy& study, double confidence = 3.0);

struct DH2Report {
    double u_composed = 0.0;  // U*_lambda(Z + G(a' - a*_lambda))
    double u_direct = 0.0;    // U*_lambda(Z + G(a''))
    double se = 0.0;
    bool pass = false;
};

/// Requires zero cost without constraint; throws std::invalid_argument otherwise.
DH2Report check_corollary_dh2(const HedgeStudy& study, const PathSet& valid, const CostSpec& cost,
                              double confidence = 3.0, std::size_t bootstrap = 200);

}  // namespace dhrn
