#include "dhrn/measure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dhrn/utility.hpp"

namespace dhrn {

double MeasureWeights::ess() const { return effective_sample_size(q); }

MeasureWeights measure_weights(std::span<const double> gains, std::string config_digest, std::span<const double> base) {
    if (gains.empty()) throw std::invalid_argument("measure_weights needs at least one path");
    if (!base.empty() && base.size() != gains.size()) throw std::invalid_argument("base weights do not match gains");
    const std::size_t n = gains.size();
    std::vector<double> e(n);
    double hi = -kInf;
    for (std::size_t k = 0; k < n; ++k) {
        if (std::isnan(gains[k]) || gains[k] == kInf)
            throw std::invalid_argument("gain of path " + std::to_string(k) + " is not usable for reweighting");
        const double b = base.empty() ? 1.0 / static_cast<double>(n) : base[k];
        if (!(b >= 0.0)) throw std::invalid_argument("base weights must be nonnegative");
        // A path with G = -inf would carry infinite mass.
        if (gains[k] == -kInf && b > 0.0)
            throw std::invalid_argument("gain of path " + std::to_string(k) + " is -inf");
        e[k] = b > 0.0 ? std::log(b) - gains[k] : -kInf;
        hi = std::max(hi, e[k]);
    }
    if (hi == -kInf) throw std::invalid_argument("all paths have zero base weight");
    MeasureWeights out;
    out.q.resize(n);
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += out.q[k] = e[k] == -kInf ? 0.0 : std::exp(e[k] - hi);
    for (double& v : out.q) v /= sum;
    out.log_normalizer = hi + std::log(sum);
    out.gains.assign(gains.begin(), gains.end());
    out.config_digest = std::move(config_digest);
    return out;
}

double relative_entropy(std::span<const double> q, std::span<const double> base) {
    if (!base.empty() && base.size() != q.size()) throw std::invalid_argument("base weights do not match q");
    const double n = static_cast<double>(q.size());
    double h = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) {
        if (q[k] <= 0.0) continue;
        const double b = base.empty() ? 1.0 / n : base[k];
        h += q[k] * std::log(q[k] / b);
    }
    return h;
}

double effective_sample_size(std::span<const double> q) {
    double s = 0.0, s2 = 0.0;
    for (double v : q) {
        s += v;
        s2 += v * v;
    }
    return s2 > 0.0 ? s * s / s2 : 0.0;
}

double bs_memm_density(double terminal_spot_ratio, double mu, double sigma, double horizon) {
    const double w = (std::log(terminal_spot_ratio) - (mu - 0.5 * sigma * sigma) * horizon) / sigma;
    return std::exp(-(mu / sigma) * w - mu * mu * horizon / (2.0 * sigma * sigma));
}

double epsilon_bound(double loss_tilde, double loss_star, double lambda) {
    if (!(loss_star > 0.0) || !(loss_tilde >= loss_star))
        throw std::invalid_argument("epsilon_bound needs loss_tilde >= loss_star > 0");
    if (!(lambda > 0.0)) throw std::invalid_argument("epsilon_bound needs lambda > 0");
    return std::log1p(loss_tilde / loss_star - 1.0) / lambda;
}

BinomialOracle binomial_oracle(const BinomialParams& params, double lambda) {
    params.validate();
    if (!(lambda > 0.0) || std::isinf(lambda)) throw std::invalid_argument("binomial oracle needs 0 < lambda < inf");
    const double u = params.u, d = params.d, p = params.p, g = params.gamma;
    BinomialOracle out;
    const double drift = u * p + d * (1.0 - p);
    if (d >= g || u <= -g) {
        out.classical_arbitrage = true;
        out.a_star = d >= g ? kInf : -kInf;
        out.g = kInf;
        return out;
    }
    if (std::abs(drift) <= g) {
        out.in_band = true;
        out.a_star = 0.0;
    } else if (drift > g) {
        out.a_star = std::log(p * (u - g) / (-(1.0 - p) * (d - g))) / (lambda * (u - d));
    } else {
        out.a_star = std::log(p * (u + g) / (-(1.0 - p) * (d + g))) / (lambda * (u - d));
    }
    const double a = out.a_star;
    const double cost = a > 0.0 ? g * a : -g * a;
    const double x[2] = {a * u - cost, a * d - cost};
    const double w[2] = {p, 1.0 - p};
    out.g = entropy_utility(x, lambda, w);
    // Measure from exp(-lambda G(a*_lambda)) = exp(-G(a*_1)).
    const auto mw = measure_weights(std::vector<double>{lambda * x[0], lambda * x[1]}, {}, w);
    out.q_up = mw.q[0];
    out.q_down = mw.q[1];
    return out;
}

std::vector<double> weight_quantiles(std::span<const double> q, std::span<const double> levels) {
    if (q.empty()) return std::vector<double>(levels.size(), 0.0);
    std::vector<double> s(q.begin(), q.end());
    std::sort(s.begin(), s.end());
    std::vector<double> out;
    for (double l : levels) {
        if (!(l >= 0.0 && l <= 1.0)) throw std::invalid_argument("quantile level outside [0, 1]");
        const double pos = l * static_cast<double>(s.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, s.size() - 1);
        out.push_back(s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]));
    }
    return out;
}

}  // namespace dhrn
