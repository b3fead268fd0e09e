#include "dhrn/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dhrn/entropy_loss.hpp"
#include "dhrn/rng.hpp"

namespace dhrn {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (final_learning_rate && !(*final_learning_rate > 0.0)) throw std::invalid_argument("final_learning_rate must be > 0");
    if (epochs == 0) throw std::invalid_argument("epochs must be >= 1");
    if (!(lambda >= 0.0) || std::isinf(lambda)) throw std::invalid_argument("training lambda must be finite and >= 0");
    if (!(grad_clip >= 0.0)) throw std::invalid_argument("grad_clip must be >= 0");
}

TrainStats train_policy(PolicyNet& net, const TrainProblem& problem, const TrainConfig& config, const EvalHook& hook) {
    config.validate();
    const PathSet& paths = *problem.paths;
    net.check_compatible(paths);
    const std::size_t n_paths = paths.n_paths();
    const std::size_t batch = (config.batch_size == 0 || config.batch_size >= n_paths) ? n_paths : config.batch_size;
    const std::size_t per_epoch = n_paths / batch;  // trailing partial batch dropped
    const std::size_t total_steps = per_epoch * config.epochs;

    LossInputs in{problem.paths, problem.cost, config.lambda, problem.weights, problem.payoff};
    AdamConfig adam{config.learning_rate};
    AdamState state;
    TrainStats stats;
    std::vector<std::size_t> order(n_paths);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (hook) hook(0, net);

    const double decay = config.final_learning_rate && total_steps > 1
                             ? std::log(*config.final_learning_rate / config.learning_rate) / static_cast<double>(total_steps - 1)
                             : 0.0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (batch < n_paths) {
            Rng rng(config.seed, 0x5348554600000000ULL + epoch);
            for (std::size_t k = n_paths; k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
        }
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < per_epoch; ++b) {
            const auto idx = std::span<const std::size_t>(order).subspan(b * batch, batch);
            auto res = loss_and_grad(net, in, idx);
            if (!std::isfinite(res.loss)) {
                std::ostringstream os;
                os << "training diverged at step " << stats.steps << ": loss " << res.loss;
                throw std::runtime_error(os.str());
            }
            if (batch > 1 && res.underflow * 2 > batch) {
                std::ostringstream os;
                os << "training diverged at step " << stats.steps << ": " << res.underflow << " of " << batch
                   << " paths underflow the loss";
                throw std::runtime_error(os.str());
            }
            stats.underflow += res.underflow;
            if (config.grad_clip > 0.0) {
                const double norm = res.grad.norm();
                if (norm > config.grad_clip) res.grad *= config.grad_clip / norm;
            }
            const double lr = config.learning_rate * std::exp(decay * static_cast<double>(stats.steps));
            adam_step(net.params(), state, res.grad, adam, lr);
            ++stats.steps;
            loss_sum += res.loss;
            if (hook && config.eval_every > 0 && stats.steps % config.eval_every == 0 && stats.steps != total_steps)
                hook(stats.steps, net);
        }
        stats.epoch_loss.push_back(loss_sum / static_cast<double>(per_epoch));
    }
    if (hook) hook(stats.steps, net);
    return stats;
}

std::vector<double> evaluate_gains(const PolicyNet& net, const PathSet& paths, const CostSpec& cost) {
    return gains(paths, net.forward(paths), cost);
}

}  // namespace dhrn
