#pragma once
// Statistical-arbitrage search g_lambda = sup_a U_lambda(G(a)) and the
// verification of a candidate no-arbitrage measure.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dhrn/market.hpp"
#include "dhrn/policy_net.hpp"
#include "dhrn/trainer.hpp"

namespace dhrn {

struct StatArbConfig {
    TrainConfig train;
    NetShape shape;
    std::size_t bootstrap = 200;
    std::uint64_t init_seed = 11;
};

struct StatArbResult {
    PolicyNet net;
    TrainStats stats;
    double g_train = 0.0;
    double g_valid = 0.0;
    double g_valid_se = 0.0;
};

/// Trains a policy maximizing U_lambda(G(a)) (lambda = config.train.lambda)
/// on train, optionally under path weights, and evaluates it on valid.
StatArbResult train_statarb(const PathSet& train, const PathSet& valid, const CostSpec& cost,
                            const StatArbConfig& config, std::span<const double> w_train = {},
                            std::span<const double> w_valid = {}, const EvalHook& hook = {});

/// True when every spread of upper is >= the matching spread of lower.
bool cost_dominates(const CostSpec& upper, const CostSpec& lower);

struct BandCell {
    std::size_t t = 0;
    std::size_t instrument = 0;
    std::string id;
    double drift = 0.0;    // E_q[H_T - H_t]
    double drift_p = 0.0;  // unweighted mean
    double band_lo = 0.0;  // -gamma_dn
    double band_hi = 0.0;  // +gamma_up
    double se = 0.0;
    double violation = 0.0;  // max(0, drift - band_hi, band_lo - drift)
    /// Largest excess of the regression-fitted conditional drift over the
    /// band, net of its own confidence margin (diagnostic).
    double conditional_excess = 0.0;
    bool pass = true;
};

struct VerifyConfig {
    double confidence = 3.0;       // band margin in standard errors
    bool exact = false;            // weights enumerate the law exactly (tree worlds)
    double exact_tol = 1e-12;      // band slack in exact mode
    double min_ess = 100.0;
    std::size_t regression_window = 5;
    bool retrain = true;
    StatArbConfig retrain_config;
    double g_floor = 1e-4;
};

struct StatArbReport {
    std::vector<BandCell> cells;
    double ess = 0.0;
    bool unreliable = false;
    std::size_t band_failures = 0;
    std::size_t conditional_flags = 0;
    bool retrained = false;
    double retrain_g = 0.0;      // max(0, U_lambda(G(a_retrained))) on valid under q
    double retrain_raw = 0.0;    // U_lambda(G(a_retrained)) before the floor at 0
    double retrain_se = 0.0;
    double retrain_tol = 0.0;    // max(g_floor, confidence * se)
    bool retrain_pass = true;
    std::vector<double> retrain_gains;  // retrained policy on validation paths

    bool band_pass() const { return band_failures == 0; }
    bool pass() const { return band_pass() && retrain_pass && !unreliable; }
};

/// Band test of every (step, instrument) drift under q_valid against the
/// spreads of cost_prime, plus (when config.retrain) a fresh statarb policy
/// trained on (train, q_train) with cost_prime. When training_cost is given,
/// cost_prime must dominate it.
StatArbReport verify_no_statarb(const PathSet& valid, std::span<const double> q_valid, const CostSpec& cost_prime,
                                const VerifyConfig& config, const PathSet* train = nullptr,
                                std::span<const double> q_train = {}, const CostSpec* training_cost = nullptr);

struct LadderPoint {
    double lambda = 0.0;
    double g = 0.0;
    double se = 0.0;
};

/// g_lambda estimates for each lambda (0 and +inf allowed). Policies are
/// trained once at lambda = 1 and rescaled, a*_lambda = a*_1 / lambda, under
/// proportional cost; with a constraint one policy is trained per finite
/// positive lambda. Each g is the best U_lambda on valid over the candidate
/// policies and the zero policy, so the ladder is non-increasing.
std::vector<LadderPoint> g_lambda_ladder(const PathSet& train, const PathSet& valid, const CostSpec& cost,
                                         std::span<const double> lambdas, const StatArbConfig& config,
                                         std::span<const double> w_train = {}, std::span<const double> w_valid = {});

/// Ladder over already evaluated candidate gains (one vector per policy).
std::vector<LadderPoint> g_lambda_ladder_from_gains(const std::vector<std::vector<double>>& candidate_gains,
                                                    std::span<const double> lambdas, std::span<const double> w_valid,
                                                    std::size_t bootstrap);

}  // namespace dhrn
