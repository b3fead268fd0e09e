#pragma once
// Experiment configuration: a JSON document with the sections
//
//   seed, output, threads
//   world         {type: binomial|bs|bs_options|var, model parameters, n_train, n_valid}
//   cost          {gamma, spot_gamma?, box?, quadratic?}
//   training      {architecture, hidden, features, learning_rate, final_learning_rate,
//                  batch_size, epochs, lambda, grad_clip, eval_every, bootstrap}
//   verification  {cost_factor, lambdas, retrain, retrain_epochs, retrain_p, confidence, min_ess}
//   hedge?        {payoff: [terms], price?: [terms], lambda, measure: P|Q*}
//   tolerances?   {a_star, g, weights, rel_entropy, density_ratio, variance_gap}
//
// Unknown keys are rejected. The digest is the SHA-256 of the canonical
// dump of the document without `output` and `threads`, so it identifies the
// experiment rather than where or how fast it ran.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dhrn/deep_hedge.hpp"
#include "dhrn/simulators.hpp"
#include "dhrn/statarb.hpp"

namespace dhrn {

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct WorldConfig {
    std::string type;  // binomial, bs, bs_options, var
    BSParams bs;
    BinomialParams binomial;
    std::size_t n_train = 0;
    std::size_t n_valid = 0;
    std::size_t var_steps = 30;
};

struct CostConfig {
    double gamma = 0.0;                  // every instrument, both sides
    std::optional<double> spot_gamma;    // overrides gamma on persistent instruments
    std::optional<std::vector<double>> box;
    std::optional<QuadraticConstraint> quadratic;
};

struct VerificationConfig {
    double cost_factor = 2.0;
    std::vector<double> lambdas{0.0, 0.5, 1.0, 2.0, kInf};
    bool retrain = true;
    std::size_t retrain_epochs = 0;  // 0: same as training
    bool retrain_p = false;          // also retrain under P for the gains comparison
    double confidence = 3.0;
    double min_ess = 100.0;
};

struct HedgeSection {
    PortfolioPayoff payoff;
    std::optional<PortfolioPayoff> price;
    double lambda = 1.0;
    std::string measure = "Q*";
};

struct Tolerances {
    double a_star = 1e-3;
    double g = 1e-4;
    double weights = 1e-4;
    double rel_entropy = 0.15;    // relative, bs world
    double density_ratio = 0.10;  // final / initial density MSE, bs world
    double variance_gap = 0.70;   // closed fraction, bs_options world
};

struct ExperimentConfig {
    nlohmann::json raw;
    std::string digest;
    std::uint64_t seed = 1;
    std::filesystem::path output = "out";
    std::size_t threads = 1;
    WorldConfig world;
    CostConfig cost;
    StatArbConfig training;
    VerificationConfig verification;
    std::optional<HedgeSection> hedge;
    Tolerances tolerances;
};

/// Throws ConfigError with the offending key path.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& file);

/// Re-parses after overriding seed / output / threads (CLI flags).
ExperimentConfig with_overrides(const ExperimentConfig& cfg, std::optional<std::uint64_t> seed,
                                std::optional<std::filesystem::path> output, std::optional<std::size_t> threads);

/// Training and verification cost specs for the configured world.
CostSpec make_cost(const CostConfig& c, const PathSet& paths, double factor = 1.0);

}  // namespace dhrn
