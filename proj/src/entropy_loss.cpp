#include "dhrn/entropy_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "dhrn/parallel.hpp"

namespace dhrn {

double subgradient_abs(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

namespace {

constexpr double kUnderflowGap = 60.0;

double log_add_exp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Partial result of one shard with e_p = log w_p - lambda X_p:
// lse = log sum_p exp(e_p) and grad = -sum_p exp(e_p - lse) dX_p/dtheta,
// which is dL/dtheta restricted to the shard.
struct Partial {
    double lse = -kInf;
    double weighted_x = 0.0;  // lambda = 0 only: sum w x
    double weight_sum = 0.0;
    Eigen::VectorXd grad;
};

Partial combine(const Partial& a, const Partial& b) {
    Partial out;
    out.weighted_x = a.weighted_x + b.weighted_x;
    out.weight_sum = a.weight_sum + b.weight_sum;
    out.lse = log_add_exp(a.lse, b.lse);
    if (std::isinf(out.lse) && out.lse < 0) {
        out.grad = a.grad + b.grad;
        return out;
    }
    const double wa = a.lse == -kInf ? 0.0 : std::exp(a.lse - out.lse);
    const double wb = b.lse == -kInf ? 0.0 : std::exp(b.lse - out.lse);
    out.grad = wa * a.grad + wb * b.grad;
    return out;
}

}  // namespace

LossResult loss_and_grad(const PolicyNet& net, const LossInputs& in, std::span<const std::size_t> batch) {
    const PathSet& paths = *in.paths;
    const CostSpec& cost = *in.cost;
    if (batch.empty()) throw std::invalid_argument("empty batch");
    if (!(in.lambda >= 0.0) || std::isinf(in.lambda)) throw std::invalid_argument("loss needs a finite lambda >= 0");
    if (!in.weights.empty() && in.weights.size() != paths.n_paths())
        throw std::invalid_argument("weights do not match the path set");
    if (!in.payoff.empty() && in.payoff.size() != paths.n_paths())
        throw std::invalid_argument("payoff does not match the path set");
    if (cost.n_steps() != paths.n_steps() || cost.n_instruments() != paths.n_instruments())
        throw std::invalid_argument("cost does not match the path set");
    net.check_compatible(paths);

    const std::size_t m = paths.n_steps();
    const std::size_t n = paths.n_instruments();
    const double lambda = in.lambda;
    const bool neutral = lambda == 0.0;
    const std::size_t n_shards = (batch.size() + kLossShard - 1) / kLossShard;
    std::vector<Partial> partial(n_shards);
    std::vector<double> exponent(batch.size());

    parallel_for(n_shards, [&](std::size_t s) {
        const std::size_t begin = s * kLossShard;
        const std::size_t end = std::min(batch.size(), begin + kLossShard);
        const auto idx = batch.subspan(begin, end - begin);
        const auto bc = idx.size();
        PolicyNet::Trace trace;
        Eigen::MatrixXd act;
        net.actions(paths, idx, &act, &trace);

        std::vector<double> x(bc), w(bc);
        for (std::size_t b = 0; b < bc; ++b) {
            const std::size_t p = idx[b];
            double g = in.payoff.empty() ? 0.0 : in.payoff[p];
            for (std::size_t t = 0; t < m; ++t) {
                const double* a = act.data() + (b * m + t) * n;
                for (std::size_t i = 0; i < n; ++i) g += a[i] * (paths.mark(p, t, i) - paths.mid(p, t, i));
                g -= cost(std::span<const double>(a, n), t);
            }
            if (!std::isfinite(g)) {
                std::ostringstream os;
                os << "non-finite loss: terminal value of path " << p << " is " << g;
                throw std::runtime_error(os.str());
            }
            x[b] = g;
            w[b] = in.weights.empty() ? 1.0 : in.weights[p];
        }

        Partial part;
        std::vector<double> coeff(bc);  // d(shard term)/d(X_b)
        if (neutral) {
            for (std::size_t b = 0; b < bc; ++b) {
                part.weighted_x += w[b] * x[b];
                part.weight_sum += w[b];
                coeff[b] = -w[b];
                exponent[begin + b] = 0.0;
            }
        } else {
            double hi = -kInf;
            for (std::size_t b = 0; b < bc; ++b) {
                exponent[begin + b] = w[b] > 0.0 ? std::log(w[b]) - lambda * x[b] : -kInf;
                hi = std::max(hi, exponent[begin + b]);
            }
            double sum = 0.0;
            for (std::size_t b = 0; b < bc; ++b) sum += hi == -kInf ? 0.0 : std::exp(exponent[begin + b] - hi);
            part.lse = hi == -kInf ? -kInf : hi + std::log(sum);
            for (std::size_t b = 0; b < bc; ++b)
                coeff[b] = part.lse == -kInf ? 0.0 : -std::exp(exponent[begin + b] - part.lse);
        }

        // d/d(action) of sum_b coeff_b X_b.
        Eigen::MatrixXd d_act(static_cast<Eigen::Index>(n), act.cols());
        for (std::size_t b = 0; b < bc; ++b) {
            const std::size_t p = idx[b];
            for (std::size_t t = 0; t < m; ++t) {
                const double* a = act.data() + (b * m + t) * n;
                const auto up = cost.gamma_up(t);
                const auto dn = cost.gamma_dn(t);
                double* d = d_act.data() + (b * m + t) * n;
                for (std::size_t i = 0; i < n; ++i) {
                    const double sg = subgradient_abs(a[i]);
                    const double dc = sg > 0.0 ? up[i] : (sg < 0.0 ? -dn[i] : 0.0);
                    d[i] = coeff[b] * (paths.mark(p, t, i) - paths.mid(p, t, i) - dc);
                }
            }
        }
        part.grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.n_params()));
        net.backward(trace, d_act, part.grad);
        partial[s] = std::move(part);
    });

    while (partial.size() > 1) {
        std::vector<Partial> next;
        for (std::size_t k = 0; k + 1 < partial.size(); k += 2) next.push_back(combine(partial[k], partial[k + 1]));
        if (partial.size() % 2) next.push_back(std::move(partial.back()));
        partial = std::move(next);
    }
    Partial& total = partial.front();

    LossResult out;
    double weight_sum = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) weight_sum += in.weights.empty() ? 1.0 : in.weights[batch[b]];
    if (!(weight_sum > 0.0)) throw std::invalid_argument("batch weights sum to zero");
    if (neutral) {
        out.loss = -total.weighted_x / weight_sum;
        out.grad = total.grad / weight_sum;
    } else {
        out.loss = (total.lse - std::log(weight_sum)) / lambda;
        out.grad = total.grad;
        const double hi = *std::max_element(exponent.begin(), exponent.end());
        for (double e : exponent)
            if (e != -kInf && e - hi < -kUnderflowGap) ++out.underflow;
    }
    return out;
}

double entropy_loss(std::span<const double> x, double lambda, std::span<const double> weights) {
    if (x.empty()) throw std::invalid_argument("entropy_loss of an empty sample");
    if (!weights.empty() && weights.size() != x.size()) throw std::invalid_argument("weights do not match sample");
    double wsum = 0.0;
    if (lambda == 0.0) {
        double s = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double w = weights.empty() ? 1.0 : weights[k];
            s += w * x[k];
            wsum += w;
        }
        return -s / wsum;
    }
    double hi = -kInf;
    std::vector<double> e(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double w = weights.empty() ? 1.0 : weights[k];
        wsum += w;
        e[k] = w > 0.0 ? std::log(w) - lambda * x[k] : -kInf;
        hi = std::max(hi, e[k]);
    }
    if (hi == kInf) return kInf;
    double sum = 0.0;
    for (double v : e) sum += v == -kInf ? 0.0 : std::exp(v - hi);
    return (hi + std::log(sum) - std::log(wsum)) / lambda;
}

}  // namespace dhrn
