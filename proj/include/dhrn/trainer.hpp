#pragma once
// Mini-batch Adam training of a policy on the entropic loss.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dhrn/adam.hpp"
#include "dhrn/market.hpp"
#include "dhrn/policy_net.hpp"

namespace dhrn {

struct TrainConfig {
    double learning_rate = 2e-5;
    /// When set, the rate decays geometrically to this value at the last step.
    std::optional<double> final_learning_rate;
    std::size_t batch_size = 256;  // 0 or >= n_paths: full batch
    std::size_t epochs = 100;
    std::uint64_t seed = 1;
    double lambda = 1.0;
    double grad_clip = 0.0;  // global norm, 0 disables
    std::size_t eval_every = 100;

    void validate() const;
};

struct TrainProblem {
    const PathSet* paths = nullptr;
    const CostSpec* cost = nullptr;
    std::span<const double> weights;  // empty: uniform
    std::span<const double> payoff;   // empty: Z = 0
};

struct TrainStats {
    std::size_t steps = 0;
    std::vector<double> epoch_loss;  // mean batch loss per epoch
    std::size_t underflow = 0;       // summed over all steps
};

/// Called with the gradient-step count at step 0, every eval_every steps and
/// after the last step.
using EvalHook = std::function<void(std::size_t step, const PolicyNet& net)>;

/// Trains net in place. Throws std::runtime_error on a non-finite loss or when
/// most of a batch underflows (divergence).
TrainStats train_policy(PolicyNet& net, const TrainProblem& problem, const TrainConfig& config,
                        const EvalHook& hook = {});

/// Terminal gains G(a) of the policy on every path.
std::vector<double> evaluate_gains(const PolicyNet& net, const PathSet& paths, const CostSpec& cost);

}  // namespace dhrn
