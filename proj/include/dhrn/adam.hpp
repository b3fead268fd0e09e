#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace dhrn {

struct AdamConfig {
    double learning_rate = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    std::uint64_t step = 0;
};

/// One Adam update of params in place. The learning rate argument overrides
/// config.learning_rate (for schedules).
void adam_step(Eigen::VectorXd& params, AdamState& state, const Eigen::VectorXd& grad, const AdamConfig& config,
               double learning_rate);

inline void adam_step(Eigen::VectorXd& params, AdamState& state, const Eigen::VectorXd& grad, const AdamConfig& config) {
    adam_step(params, state, grad, config, config.learning_rate);
}

}  // namespace dhrn
