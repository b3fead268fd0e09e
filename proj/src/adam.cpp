#include "dhrn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace dhrn {

void adam_step(Eigen::VectorXd& params, AdamState& state, const Eigen::VectorXd& grad, const AdamConfig& config,
               double learning_rate) {
    if (grad.size() != params.size()) throw std::invalid_argument("gradient size does not match parameters");
    if (state.m.size() != params.size()) {
        state.m = Eigen::VectorXd::Zero(params.size());
        state.v = Eigen::VectorXd::Zero(params.size());
        state.step = 0;
    }
    ++state.step;
    state.m = config.beta1 * state.m + (1.0 - config.beta1) * grad;
    state.v = config.beta2 * state.v + (1.0 - config.beta2) * grad.cwiseProduct(grad);
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    params.array() -= learning_rate * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + config.epsilon);
}

}  // namespace dhrn
