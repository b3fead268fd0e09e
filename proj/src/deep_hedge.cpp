#include "dhrn/deep_hedge.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dhrn/utility.hpp"

namespace dhrn {

PortfolioPayoff PortfolioPayoff::cash(double amount) { return {{{PayoffTerm::Kind::cash, amount, 0.0}}}; }
PortfolioPayoff PortfolioPayoff::call(double strike, double coefficient) {
    return {{{PayoffTerm::Kind::call, coefficient, strike}}};
}
PortfolioPayoff PortfolioPayoff::put(double strike, double coefficient) {
    return {{{PayoffTerm::Kind::put, coefficient, strike}}};
}

PortfolioPayoff PortfolioPayoff::operator+(const PortfolioPayoff& other) const {
    PortfolioPayoff out = *this;
    out.terms.insert(out.terms.end(), other.terms.begin(), other.terms.end());
    return out;
}

PortfolioPayoff PortfolioPayoff::scaled(double factor) const {
    PortfolioPayoff out = *this;
    for (auto& t : out.terms) t.coefficient *= factor;
    return out;
}

PortfolioPayoff PortfolioPayoff::operator-(const PortfolioPayoff& other) const { return *this + other.scaled(-1.0); }

PayoffTerm::Kind payoff_kind_from_string(const std::string& s) {
    if (s == "cash") return PayoffTerm::Kind::cash;
    if (s == "spot") return PayoffTerm::Kind::spot;
    if (s == "call") return PayoffTerm::Kind::call;
    if (s == "put") return PayoffTerm::Kind::put;
    throw std::invalid_argument("unknown payoff kind '" + s + "'");
}

std::vector<double> PortfolioPayoff::evaluate(const PathSet& paths) const {
    std::vector<double> out(paths.n_paths(), 0.0);
    const std::size_t m = paths.n_steps();
    for (std::size_t p = 0; p < paths.n_paths(); ++p) {
        const double s = paths.spot(p, m) / paths.spot(p, 0);
        double v = 0.0;
        for (const auto& t : terms) {
            switch (t.kind) {
                case PayoffTerm::Kind::cash: v += t.coefficient; break;
                case PayoffTerm::Kind::spot: v += t.coefficient * s; break;
                case PayoffTerm::Kind::call: v += t.coefficient * std::max(s - t.strike, 0.0); break;
                case PayoffTerm::Kind::put: v += t.coefficient * std::max(t.strike - s, 0.0); break;
            }
        }
        if (!std::isfinite(v)) throw std::invalid_argument("payoff is not finite on path " + std::to_string(p));
        out[p] = v;
    }
    return out;
}

namespace {

std::vector<double> plus(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] + b[k];
    return out;
}

}  // namespace

HedgeResult deep_hedge(const PortfolioPayoff& z, const PathSet& train, const PathSet& valid, const CostSpec& cost,
                       double lambda, const HedgeConfig& config, std::span<const double> w_train,
                       std::span<const double> w_valid) {
    if (!(lambda > 0.0) || std::isinf(lambda)) throw std::invalid_argument("deep hedging needs 0 < lambda < inf");
    const auto z_train = z.evaluate(train);
    const auto z_valid = z.evaluate(valid);
    HedgeResult out;
    out.measure = w_train.empty() ? "P" : "Q*";
    out.net = PolicyNet::create(config.net.shape, train, cost.constraint(), config.net.init_seed);
    TrainConfig tc = config.net.train;
    tc.lambda = lambda;
    train_policy(out.net, TrainProblem{&train, &cost, w_train, z_train}, tc);
    const auto x = plus(z_valid, evaluate_gains(out.net, valid, cost));
    out.g_raw = entropy_utility(x, lambda, w_valid);
    const double u_z = entropy_utility(z_valid, lambda, w_valid);
    if (out.g_raw >= u_z) {
        out.g = out.g_raw;
        out.g_se = utility_se(x, lambda, w_valid, config.net.bootstrap);
    } else {
        out.g = u_z;
        out.g_se = utility_se(z_valid, lambda, w_valid, config.net.bootstrap);
    }
    return out;
}

IndifferencePrice indifference_price(const PortfolioPayoff& x, const PortfolioPayoff& z, const PathSet& train,
                                     const PathSet& valid, const CostSpec& cost, double lambda,
                                     const HedgeConfig& config, std::span<const double> w_train,
                                     std::span<const double> w_valid) {
    const auto a = deep_hedge(z, train, valid, cost, lambda, config, w_train, w_valid);
    const auto b = deep_hedge(z - x, train, valid, cost, lambda, config, w_train, w_valid);
    return {a.g - b.g, a.g, b.g, std::hypot(a.g_se, b.g_se)};
}

HedgeStudy run_hedge_study(const PortfolioPayoff& z, const PathSet& train, const PathSet& valid, const CostSpec& cost,
                           double lambda, const HedgeConfig& config) {
    if (!(lambda > 0.0) || std::isinf(lambda)) throw std::invalid_argument("hedge study needs 0 < lambda < inf");
    HedgeStudy s;
    s.lambda = lambda;
    s.zero_cost = cost.is_zero() && !cost.has_constraint();
    StatArbConfig sc = config.net;
    sc.train.lambda = 1.0;
    s.statarb = train_statarb(train, valid, cost, sc);
    s.q_train = measure_weights(evaluate_gains(s.statarb.net, train, cost));
    s.q_valid = measure_weights(evaluate_gains(s.statarb.net, valid, cost));
    if (!cost.has_constraint()) {
        s.statarb_lambda = s.statarb.net.scaled(1.0 / lambda);
    } else {
        sc.train.lambda = lambda;
        s.statarb_lambda = train_statarb(train, valid, cost, sc).net;
    }
    const auto g_star = evaluate_gains(s.statarb_lambda, valid, cost);
    s.g_lambda = entropy_utility(g_star, lambda);
    s.g_lambda_se = utility_se(g_star, lambda, {}, config.net.bootstrap);
    s.under_p = deep_hedge(z, train, valid, cost, lambda, config);
    s.under_q = deep_hedge(z, train, valid, cost, lambda, config, s.q_train.q, s.q_valid.q);
    s.z_valid = z.evaluate(valid);
    return s;
}

DH1Report check_prop_dh1(const HedgeStudy& s, double confidence) {
    DH1Report r;
    r.lhs = s.under_q.g;
    r.rhs = s.under_p.g - s.g_lambda;
    r.se = std::sqrt(s.under_q.g_se * s.under_q.g_se + s.under_p.g_se * s.under_p.g_se + s.g_lambda_se * s.g_lambda_se);
    r.equality_expected = s.zero_cost;
    r.pass = r.equality_expected ? std::abs(r.lhs - r.rhs) <= confidence * r.se : r.lhs <= r.rhs + confidence * r.se;
    return r;
}

DH2Report check_corollary_dh2(const HedgeStudy& s, const PathSet& valid, const CostSpec& cost, double confidence,
                              std::size_t bootstrap) {
    if (!cost.is_zero() || cost.has_constraint())
        throw std::invalid_argument("the P/Q* hedge decomposition needs zero transaction cost");
    const auto composed = s.under_p.net.forward(valid) - s.statarb_lambda.forward(valid);
    const auto x1 = plus(s.z_valid, gains(valid, composed, cost));
    const auto x2 = plus(s.z_valid, evaluate_gains(s.under_q.net, valid, cost));
    DH2Report r;
    r.u_composed = entropy_utility(x1, s.lambda, s.q_valid.q);
    r.u_direct = entropy_utility(x2, s.lambda, s.q_valid.q);
    r.se = std::hypot(utility_se(x1, s.lambda, s.q_valid.q, bootstrap), utility_se(x2, s.lambda, s.q_valid.q, bootstrap));
    r.pass = std::abs(r.u_composed - r.u_direct) <= confidence * r.se;
    return r;
}

}  // namespace dhrn
