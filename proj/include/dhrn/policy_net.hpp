#pragma once
// Trading policies a_t = a_t(theta | s_t) as small dense networks.
//
// Features per (path, step): t/T, log S_t and optionally the instrument mids
// and aux state, standardized with statistics of the training set. The
// feedforward net sees only the current features; the recurrent net (Elman
// layers) carries hidden state along the path, so a_t depends on s_0..s_t.
//
// Raw outputs o_t are mapped to actions: persistent instruments (spot) are
// parametrized by holdings, a_t = o_t - o_{t-1}; options trade o_t directly.
// A cost constraint is enforced by a smooth projection of the action, so
// every produced action is admissible.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dhrn/market.hpp"

namespace dhrn {

enum class Architecture { feedforward, recurrent };

const char* to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

struct FeatureSpec {
    bool mids = false;
    bool aux = false;
};

struct NetShape {
    Architecture arch = Architecture::feedforward;
    std::vector<int> hidden;  // empty: 2 x 64 feedforward, 2 x 32 recurrent
    FeatureSpec features;
};

class PolicyNet {
public:
    /// Activations of one shard, kept for the backward pass.
    struct Trace {
        std::vector<Eigen::MatrixXd> inputs;                // per step, n_in x B
        std::vector<std::vector<Eigen::MatrixXd>> hidden;   // [step][layer], post-ReLU
        std::vector<Eigen::MatrixXd> raw;                   // per step, n_out x B
        std::vector<Eigen::MatrixXd> pre_projection;        // per step, n_out x B (constrained nets)
    };

    PolicyNet() = default;

    /// He-uniform hidden layers from seed, zero output layer. Feature
    /// statistics come from train.
    static PolicyNet create(const NetShape& shape, const PathSet& train, const Constraint& projection,
                            std::uint64_t seed);

    Architecture architecture() const { return shape_.arch; }
    const NetShape& shape() const { return shape_; }
    const std::vector<int>& hidden() const { return shape_.hidden; }
    std::size_t n_inputs() const { return n_in_; }
    std::size_t n_outputs() const { return n_out_; }
    std::size_t n_steps() const { return n_steps_; }
    std::size_t n_params() const { return static_cast<std::size_t>(params_.size()); }

    Eigen::VectorXd& params() { return params_; }
    const Eigen::VectorXd& params() const { return params_; }
    const std::vector<double>& feature_mean() const { return mean_; }
    const std::vector<double>& feature_scale() const { return scale_; }
    const std::vector<bool>& persistent() const { return persistent_; }
    const Constraint& projection() const { return projection_; }

    /// Throws std::invalid_argument when paths do not match the net's
    /// instrument count, horizon or feature layout.
    void check_compatible(const PathSet& paths) const;

    /// Actions for the given paths, as [paths.size()][n_steps][n]. Pass the
    /// trace to keep activations for backward().
    void actions(const PathSet& paths, std::span<const std::size_t> path_idx, Eigen::MatrixXd* out_actions,
                 Trace* trace) const;

    /// Actions for every path.
    ActionTensor forward(const PathSet& paths) const;

    /// Accumulates d(loss)/d(theta) into grad given d(loss)/d(action), with
    /// d_actions laid out like the actions matrix (n x (B * n_steps), column
    /// b * n_steps + t).
    void backward(const Trace& trace, const Eigen::MatrixXd& d_actions, Eigen::VectorXd& grad) const;

    /// Same net with the raw outputs multiplied by factor. For unconstrained
    /// nets this scales every action, a -> factor * a.
    PolicyNet scaled(double factor) const;

    /// Reassembles a net from stored parts (checkpoint loading).
    static PolicyNet assemble(const NetShape& shape, std::size_t n_in, std::size_t n_out, std::size_t n_steps,
                              std::vector<double> mean, std::vector<double> scale, std::vector<bool> persistent,
                              Constraint projection, Eigen::VectorXd params);

private:
    struct Layer {
        std::size_t in, out;
        std::size_t w, u, b;  // offsets into params (u unused for feedforward)
    };

    void build_layout();
    void features(const PathSet& paths, std::size_t p, std::size_t t, double* out) const;
    void project(const Eigen::MatrixXd& raw, Eigen::MatrixXd& actions) const;
    void project_backward(const Eigen::MatrixXd& raw, Eigen::MatrixXd& d) const;

    NetShape shape_;
    std::size_t n_in_ = 0;
    std::size_t n_out_ = 0;
    std::size_t n_steps_ = 0;
    std::vector<double> mean_;
    std::vector<double> scale_;
    std::vector<bool> persistent_;
    Constraint projection_;
    std::vector<Layer> layers_;  // hidden layers then the output layer
    Eigen::VectorXd params_;
};

}  // namespace dhrn
