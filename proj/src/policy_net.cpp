#include "dhrn/policy_net.hpp"

#include <cmath>
#include <stdexcept>

#include "dhrn/parallel.hpp"
#include "dhrn/rng.hpp"

namespace dhrn {

using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(Architecture a) { return a == Architecture::feedforward ? "feedforward" : "recurrent"; }

Architecture architecture_from_string(const std::string& s) {
    if (s == "feedforward") return Architecture::feedforward;
    if (s == "recurrent") return Architecture::recurrent;
    throw std::invalid_argument("unknown architecture '" + s + "'");
}

namespace {

std::size_t feature_count(const PathSet& paths, const FeatureSpec& spec) {
    return 2 + (spec.mids ? paths.n_instruments() : 0) + (spec.aux ? paths.n_aux() : 0);
}

}  // namespace

void PolicyNet::build_layout() {
    if (shape_.hidden.empty())
        shape_.hidden = shape_.arch == Architecture::feedforward ? std::vector<int>{64, 64} : std::vector<int>{32, 32};
    layers_.clear();
    std::size_t offset = 0;
    std::size_t in = n_in_;
    auto add = [&](std::size_t out, bool recurrent) {
        Layer l{in, out, offset, 0, 0};
        offset += in * out;
        if (recurrent) {
            l.u = offset;
            offset += out * out;
        }
        l.b = offset;
        offset += out;
        layers_.push_back(l);
        in = out;
    };
    for (int h : shape_.hidden) {
        if (h <= 0) throw std::invalid_argument("hidden layer sizes must be positive");
        add(static_cast<std::size_t>(h), shape_.arch == Architecture::recurrent);
    }
    add(n_out_, false);
    if (params_.size() == 0) params_ = VectorXd::Zero(static_cast<Eigen::Index>(offset));
    if (static_cast<std::size_t>(params_.size()) != offset)
        throw std::invalid_argument("parameter vector does not match the architecture");
}

PolicyNet PolicyNet::create(const NetShape& shape, const PathSet& train, const Constraint& projection,
                            std::uint64_t seed) {
    PolicyNet net;
    net.shape_ = shape;
    net.n_in_ = feature_count(train, shape.features);
    net.n_out_ = train.n_instruments();
    net.n_steps_ = train.n_steps();
    net.projection_ = projection;
    for (const auto& inst : train.instruments(0)) net.persistent_.push_back(inst.persistent());
    if (const auto* box = std::get_if<BoxConstraint>(&projection); box && box->bound.size() != net.n_out_)
        throw std::invalid_argument("box projection size does not match instrument count");
    if (const auto* quad = std::get_if<QuadraticConstraint>(&projection); quad && quad->sigma.size() != net.n_out_ * net.n_out_)
        throw std::invalid_argument("quadratic projection size does not match instrument count");

    // Feature standardization from the training set.
    std::vector<double> sum(net.n_in_, 0.0), sum_sq(net.n_in_, 0.0), f(net.n_in_);
    for (std::size_t p = 0; p < train.n_paths(); ++p) {
        for (std::size_t t = 0; t < train.n_steps(); ++t) {
            net.features(train, p, t, f.data());
            for (std::size_t k = 0; k < net.n_in_; ++k) {
                sum[k] += f[k];
                sum_sq[k] += f[k] * f[k];
            }
        }
    }
    const double count = static_cast<double>(train.n_paths() * train.n_steps());
    net.mean_.resize(net.n_in_);
    net.scale_.resize(net.n_in_);
    for (std::size_t k = 0; k < net.n_in_; ++k) {
        net.mean_[k] = sum[k] / count;
        const double var = std::max(0.0, sum_sq[k] / count - net.mean_[k] * net.mean_[k]);
        net.scale_[k] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }

    net.build_layout();
    Rng rng(seed, 0x6e6574);
    for (std::size_t li = 0; li + 1 < net.layers_.size(); ++li) {
        const auto& l = net.layers_[li];
        const double lim = std::sqrt(6.0 / static_cast<double>(l.in));
        for (std::size_t k = 0; k < l.in * l.out; ++k)
            net.params_[static_cast<Eigen::Index>(l.w + k)] = lim * (2.0 * rng.uniform() - 1.0);
        if (net.shape_.arch == Architecture::recurrent) {
            const double lim_u = std::sqrt(1.0 / static_cast<double>(l.out));
            for (std::size_t k = 0; k < l.out * l.out; ++k)
                net.params_[static_cast<Eigen::Index>(l.u + k)] = lim_u * (2.0 * rng.uniform() - 1.0);
        }
    }
    return net;
}

PolicyNet PolicyNet::assemble(const NetShape& shape, std::size_t n_in, std::size_t n_out, std::size_t n_steps,
                              std::vector<double> mean, std::vector<double> scale, std::vector<bool> persistent,
                              Constraint projection, VectorXd params) {
    PolicyNet net;
    net.shape_ = shape;
    net.n_in_ = n_in;
    net.n_out_ = n_out;
    net.n_steps_ = n_steps;
    net.mean_ = std::move(mean);
    net.scale_ = std::move(scale);
    net.persistent_ = std::move(persistent);
    net.projection_ = std::move(projection);
    net.params_ = std::move(params);
    if (net.mean_.size() != n_in || net.scale_.size() != n_in || net.persistent_.size() != n_out)
        throw std::invalid_argument("inconsistent policy descriptor");
    net.build_layout();
    return net;
}

PolicyNet PolicyNet::scaled(double factor) const {
    if (projection_.index() != 0) throw std::invalid_argument("cannot scale the actions of a constrained policy");
    PolicyNet out = *this;
    const auto& lo = layers_.back();
    out.params_.segment(static_cast<Eigen::Index>(lo.w), static_cast<Eigen::Index>(lo.in * lo.out + lo.out)) *= factor;
    return out;
}

void PolicyNet::check_compatible(const PathSet& paths) const {
    if (paths.n_instruments() != n_out_)
        throw std::invalid_argument("policy expects " + std::to_string(n_out_) + " instruments, paths have " +
                                    std::to_string(paths.n_instruments()));
    if (paths.n_steps() != n_steps_)
        throw std::invalid_argument("policy expects " + std::to_string(n_steps_) + " steps, paths have " +
                                    std::to_string(paths.n_steps()));
    if (feature_count(paths, shape_.features) != n_in_)
        throw std::invalid_argument("feature layout of paths does not match the policy");
    for (std::size_t i = 0; i < n_out_; ++i)
        if (paths.instruments(0)[i].persistent() != persistent_[i])
            throw std::invalid_argument("instrument kinds of paths do not match the policy");
}

void PolicyNet::features(const PathSet& paths, std::size_t p, std::size_t t, double* out) const {
    std::size_t k = 0;
    out[k++] = static_cast<double>(t) / static_cast<double>(paths.n_steps());
    out[k++] = std::log(paths.spot(p, t));
    if (shape_.features.mids)
        for (std::size_t i = 0; i < paths.n_instruments(); ++i) out[k++] = paths.mid(p, t, i);
    if (shape_.features.aux)
        for (std::size_t a = 0; a < paths.n_aux(); ++a) out[k++] = paths.aux(p, t, a);
}

void PolicyNet::project(const MatrixXd& raw, MatrixXd& actions) const {
    if (const auto* box = std::get_if<BoxConstraint>(&projection_)) {
        actions.resize(raw.rows(), raw.cols());
        for (Eigen::Index i = 0; i < raw.rows(); ++i) {
            const double b = box->bound[static_cast<std::size_t>(i)];
            if (std::isinf(b))
                actions.row(i) = raw.row(i);
            else
                actions.row(i) = b * (raw.row(i).array() / b).tanh();
        }
    } else if (const auto* quad = std::get_if<QuadraticConstraint>(&projection_)) {
        const auto n = static_cast<Eigen::Index>(n_out_);
        const Map<const MatrixXd> sigma(quad->sigma.data(), n, n);
        const double s = std::sqrt(quad->max_risk);
        actions.resize(raw.rows(), raw.cols());
        for (Eigen::Index c = 0; c < raw.cols(); ++c) {
            const double r = std::sqrt(std::max(0.0, raw.col(c).dot(sigma * raw.col(c))));
            const double f = (r > 1e-300 && s > 0.0) ? s * std::tanh(r / s) / r : (s > 0.0 ? 1.0 : 0.0);
            actions.col(c) = f * raw.col(c);
        }
    } else {
        actions = raw;
    }
}

void PolicyNet::project_backward(const MatrixXd& raw, MatrixXd& d) const {
    if (const auto* box = std::get_if<BoxConstraint>(&projection_)) {
        for (Eigen::Index i = 0; i < raw.rows(); ++i) {
            const double b = box->bound[static_cast<std::size_t>(i)];
            if (std::isinf(b)) continue;
            d.row(i).array() *= 1.0 - (raw.row(i).array() / b).tanh().square();
        }
    } else if (const auto* quad = std::get_if<QuadraticConstraint>(&projection_)) {
        const auto n = static_cast<Eigen::Index>(n_out_);
        const Map<const MatrixXd> sigma(quad->sigma.data(), n, n);
        const double s = std::sqrt(quad->max_risk);
        for (Eigen::Index c = 0; c < raw.cols(); ++c) {
            if (!(s > 0.0)) {
                d.col(c).setZero();
                continue;
            }
            const VectorXd sx = sigma * raw.col(c);
            const double r = std::sqrt(std::max(0.0, raw.col(c).dot(sx)));
            if (r < 1e-8 * s) continue;  // f = 1 + O(r^2)
            const double th = std::tanh(r / s);
            const double f = s * th / r;
            const double df = ((1.0 - th * th) * r - s * th) / (r * r);
            const double xd = raw.col(c).dot(d.col(c));
            d.col(c) = f * d.col(c) + (df * xd / r) * sx;
        }
    }
}

void PolicyNet::actions(const PathSet& paths, std::span<const std::size_t> path_idx, MatrixXd* out_actions,
                        Trace* trace) const {
    const auto b_count = static_cast<Eigen::Index>(path_idx.size());
    const std::size_t m = n_steps_;
    const auto n = static_cast<Eigen::Index>(n_out_);
    const auto n_in = static_cast<Eigen::Index>(n_in_);
    Trace local;
    Trace& tr = trace ? *trace : local;
    tr.inputs.assign(m, MatrixXd(n_in, b_count));
    std::vector<double> f(n_in_);
    for (std::size_t t = 0; t < m; ++t)
        for (Eigen::Index b = 0; b < b_count; ++b) {
            features(paths, path_idx[static_cast<std::size_t>(b)], t, f.data());
            for (Eigen::Index k = 0; k < n_in; ++k)
                tr.inputs[t](k, b) = (f[static_cast<std::size_t>(k)] - mean_[static_cast<std::size_t>(k)]) /
                                     scale_[static_cast<std::size_t>(k)];
        }

    const auto weight = [&](const Layer& l) {
        return Map<const MatrixXd>(params_.data() + l.w, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in));
    };
    const auto bias = [&](const Layer& l) { return Map<const VectorXd>(params_.data() + l.b, static_cast<Eigen::Index>(l.out)); };
    const std::size_t n_hidden = layers_.size() - 1;
    tr.hidden.assign(m, std::vector<MatrixXd>(n_hidden));
    tr.raw.assign(m, MatrixXd());
    for (std::size_t t = 0; t < m; ++t) {
        const MatrixXd* x = &tr.inputs[t];
        for (std::size_t li = 0; li < n_hidden; ++li) {
            const auto& l = layers_[li];
            MatrixXd z = weight(l) * *x;
            if (shape_.arch == Architecture::recurrent && t > 0) {
                const Map<const MatrixXd> u(params_.data() + l.u, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.out));
                z.noalias() += u * tr.hidden[t - 1][li];
            }
            z.colwise() += bias(l);
            tr.hidden[t][li] = z.cwiseMax(0.0);
            x = &tr.hidden[t][li];
        }
        const auto& lo = layers_.back();
        tr.raw[t] = weight(lo) * *x;
        tr.raw[t].colwise() += bias(lo);
    }

    const bool constrained = projection_.index() != 0;
    tr.pre_projection.assign(constrained ? m : 0, MatrixXd());
    if (out_actions) out_actions->resize(n, b_count * static_cast<Eigen::Index>(m));
    MatrixXd step(n, b_count), projected;
    for (std::size_t t = 0; t < m; ++t) {
        step = tr.raw[t];
        if (t > 0)
            for (Eigen::Index i = 0; i < n; ++i)
                if (persistent_[static_cast<std::size_t>(i)]) step.row(i) -= tr.raw[t - 1].row(i);
        const MatrixXd* a = &step;
        if (constrained) {
            tr.pre_projection[t] = step;
            project(step, projected);
            a = &projected;
        }
        if (out_actions)
            for (Eigen::Index b = 0; b < b_count; ++b)
                out_actions->col(b * static_cast<Eigen::Index>(m) + static_cast<Eigen::Index>(t)) = a->col(b);
    }
}

ActionTensor PolicyNet::forward(const PathSet& paths) const {
    check_compatible(paths);
    constexpr std::size_t kShard = 256;
    ActionTensor out(paths.n_paths(), n_steps_, n_out_);
    const std::size_t n_shards = (paths.n_paths() + kShard - 1) / kShard;
    parallel_for(n_shards, [&](std::size_t s) {
        const std::size_t begin = s * kShard;
        const std::size_t end = std::min(paths.n_paths(), begin + kShard);
        std::vector<std::size_t> idx(end - begin);
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = begin + k;
        MatrixXd a;
        actions(paths, idx, &a, nullptr);
        std::copy(a.data(), a.data() + a.size(), out.values.data() + begin * n_steps_ * n_out_);
    });
    return out;
}

void PolicyNet::backward(const Trace& tr, const MatrixXd& d_actions, VectorXd& grad) const {
    const std::size_t m = n_steps_;
    const auto n = static_cast<Eigen::Index>(n_out_);
    const Eigen::Index b_count = tr.inputs.empty() ? 0 : tr.inputs[0].cols();
    if (grad.size() != params_.size()) grad = VectorXd::Zero(params_.size());

    // d(loss)/d(raw output) per step.
    std::vector<MatrixXd> d_raw(m, MatrixXd(n, b_count));
    std::vector<MatrixXd> d_step(m, MatrixXd(n, b_count));
    for (std::size_t t = 0; t < m; ++t) {
        for (Eigen::Index b = 0; b < b_count; ++b)
            d_step[t].col(b) = d_actions.col(b * static_cast<Eigen::Index>(m) + static_cast<Eigen::Index>(t));
        if (projection_.index() != 0) project_backward(tr.pre_projection[t], d_step[t]);
    }
    for (std::size_t t = 0; t < m; ++t) {
        d_raw[t] = d_step[t];
        if (t + 1 < m)
            for (Eigen::Index i = 0; i < n; ++i)
                if (persistent_[static_cast<std::size_t>(i)]) d_raw[t].row(i) -= d_step[t + 1].row(i);
    }

    const auto weight = [&](const Layer& l) {
        return Map<const MatrixXd>(params_.data() + l.w, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in));
    };
    const auto gweight = [&](const Layer& l) {
        return Map<MatrixXd>(grad.data() + l.w, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in));
    };
    const std::size_t n_hidden = layers_.size() - 1;
    const auto& lo = layers_.back();
    std::vector<MatrixXd> carried(n_hidden);
    for (std::size_t li = 0; li < n_hidden; ++li)
        carried[li] = MatrixXd::Zero(static_cast<Eigen::Index>(layers_[li].out), b_count);
    for (std::size_t tt = m; tt-- > 0;) {
        const MatrixXd& top = n_hidden ? tr.hidden[tt][n_hidden - 1] : tr.inputs[tt];
        gweight(lo).noalias() += d_raw[tt] * top.transpose();
        Map<VectorXd>(grad.data() + lo.b, n) += d_raw[tt].rowwise().sum();
        MatrixXd d = weight(lo).transpose() * d_raw[tt];
        for (std::size_t li = n_hidden; li-- > 0;) {
            const auto& l = layers_[li];
            if (shape_.arch == Architecture::recurrent) d += carried[li];
            MatrixXd dz = (tr.hidden[tt][li].array() > 0.0).select(d, 0.0);
            const MatrixXd& input = li == 0 ? tr.inputs[tt] : tr.hidden[tt][li - 1];
            gweight(l).noalias() += dz * input.transpose();
            Map<VectorXd>(grad.data() + l.b, static_cast<Eigen::Index>(l.out)) += dz.rowwise().sum();
            if (shape_.arch == Architecture::recurrent) {
                const auto h = static_cast<Eigen::Index>(l.out);
                const Map<const MatrixXd> u(params_.data() + l.u, h, h);
                if (tt > 0) Map<MatrixXd>(grad.data() + l.u, h, h).noalias() += dz * tr.hidden[tt - 1][li].transpose();
                carried[li] = u.transpose() * dz;
            }
            if (li > 0) d = weight(l).transpose() * dz;
        }
    }
}

}  // namespace dhrn
