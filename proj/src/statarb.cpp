#include "dhrn/statarb.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "dhrn/measure.hpp"
#include "dhrn/parallel.hpp"
#include "dhrn/utility.hpp"

namespace dhrn {

StatArbResult train_statarb(const PathSet& train, const PathSet& valid, const CostSpec& cost,
                            const StatArbConfig& config, std::span<const double> w_train,
                            std::span<const double> w_valid, const EvalHook& hook) {
    StatArbResult out;
    out.net = PolicyNet::create(config.shape, train, cost.constraint(), config.init_seed);
    out.stats = train_policy(out.net, TrainProblem{&train, &cost, w_train, {}}, config.train, hook);
    const double lambda = config.train.lambda;
    const auto g_tr = evaluate_gains(out.net, train, cost);
    out.g_train = entropy_utility(g_tr, lambda, w_train);
    const auto g_va = evaluate_gains(out.net, valid, cost);
    out.g_valid = entropy_utility(g_va, lambda, w_valid);
    out.g_valid_se = utility_se(g_va, lambda, w_valid, config.bootstrap);
    return out;
}

bool cost_dominates(const CostSpec& upper, const CostSpec& lower) {
    if (upper.n_steps() != lower.n_steps() || upper.n_instruments() != lower.n_instruments()) return false;
    for (std::size_t t = 0; t < upper.n_steps(); ++t) {
        const auto uu = upper.gamma_up(t), ud = upper.gamma_dn(t);
        const auto lu = lower.gamma_up(t), ld = lower.gamma_dn(t);
        for (std::size_t i = 0; i < upper.n_instruments(); ++i)
            if (uu[i] < lu[i] || ud[i] < ld[i]) return false;
    }
    return true;
}

namespace {

// Weighted least squares of y on the state basis (1, log S_t, sum of the last
// `window` squared log returns). Returns the largest excess of the fitted
// drift over [lo, hi] net of confidence * pointwise sandwich s.e.
double conditional_excess(const PathSet& paths, std::span<const double> q, std::size_t t, const std::vector<double>& y,
                          double lo, double hi, double confidence, std::size_t window) {
    const std::size_t n = paths.n_paths();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 3);
    for (std::size_t p = 0; p < n; ++p) {
        double rv = 0.0;
        for (std::size_t k = t > window ? t - window : 0; k < t; ++k) {
            const double r = std::log(paths.spot(p, k + 1) / paths.spot(p, k));
            rv += r * r;
        }
        x(static_cast<Eigen::Index>(p), 0) = 1.0;
        x(static_cast<Eigen::Index>(p), 1) = std::log(paths.spot(p, t));
        x(static_cast<Eigen::Index>(p), 2) = rv;
    }
    // Keep columns with weighted variance; the intercept always stays.
    std::vector<Eigen::Index> cols{0};
    for (Eigen::Index c = 1; c < 3; ++c) {
        double m = 0.0, v = 0.0;
        for (std::size_t p = 0; p < n; ++p) m += q[p] * x(static_cast<Eigen::Index>(p), c);
        for (std::size_t p = 0; p < n; ++p) {
            const double d = x(static_cast<Eigen::Index>(p), c) - m;
            v += q[p] * d * d;
        }
        if (v > 1e-20 * std::max(1.0, m * m)) cols.push_back(c);
    }
    const auto k = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd xs(static_cast<Eigen::Index>(n), k);
    for (Eigen::Index j = 0; j < k; ++j) xs.col(j) = x.col(cols[static_cast<std::size_t>(j)]);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
    for (std::size_t p = 0; p < n; ++p) {
        const auto row = xs.row(static_cast<Eigen::Index>(p));
        a.noalias() += q[p] * row.transpose() * row;
        rhs.noalias() += q[p] * y[p] * row.transpose();
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success) return 0.0;
    const Eigen::VectorXd beta = ldlt.solve(rhs);
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (std::size_t p = 0; p < n; ++p) {
        const auto row = xs.row(static_cast<Eigen::Index>(p));
        const double r = y[p] - row.dot(beta);
        meat.noalias() += (q[p] * q[p] * r * r) * row.transpose() * row;
    }
    const Eigen::MatrixXd a_inv = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
    const Eigen::MatrixXd v = a_inv * meat * a_inv;
    double worst = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        if (q[p] <= 0.0) continue;
        const Eigen::VectorXd row = xs.row(static_cast<Eigen::Index>(p)).transpose();
        const double fit = row.dot(beta);
        const double se = std::sqrt(std::max(0.0, row.dot(v * row)));
        worst = std::max(worst, std::max(fit - hi, lo - fit) - confidence * se);
    }
    return worst;
}

}  // namespace

StatArbReport verify_no_statarb(const PathSet& valid, std::span<const double> q_valid, const CostSpec& cost_prime,
                                const VerifyConfig& config, const PathSet* train, std::span<const double> q_train,
                                const CostSpec* training_cost) {
    if (q_valid.size() != valid.n_paths()) throw std::invalid_argument("weights do not match the validation paths");
    if (cost_prime.n_steps() != valid.n_steps() || cost_prime.n_instruments() != valid.n_instruments())
        throw std::invalid_argument("verification cost does not match the path set");
    if (training_cost && !cost_dominates(cost_prime, *training_cost))
        throw std::invalid_argument("verification cost must be >= the training cost for every instrument and step");

    StatArbReport rep;
    rep.ess = effective_sample_size(q_valid);
    rep.unreliable = !config.exact && rep.ess < config.min_ess;

    const std::size_t m = valid.n_steps(), n = valid.n_instruments(), np = valid.n_paths();
    rep.cells.resize(m * n);
    parallel_for(m * n, [&](std::size_t c) {
        const std::size_t t = c / n, i = c % n;
        BandCell& cell = rep.cells[c];
        cell.t = t;
        cell.instrument = i;
        cell.id = valid.instruments(t)[i].id;
        std::vector<double> y(np);
        double wsum = 0.0, drift = 0.0, mean_p = 0.0;
        for (std::size_t p = 0; p < np; ++p) {
            y[p] = valid.mark(p, t, i) - valid.mid(p, t, i);
            drift += q_valid[p] * y[p];
            wsum += q_valid[p];
            mean_p += y[p];
        }
        drift /= wsum;
        double var = 0.0;
        for (std::size_t p = 0; p < np; ++p) {
            const double w = q_valid[p] / wsum;
            var += w * w * (y[p] - drift) * (y[p] - drift);
        }
        cell.drift = drift;
        cell.drift_p = mean_p / static_cast<double>(np);
        cell.band_hi = cost_prime.gamma_up(t)[i];
        cell.band_lo = -cost_prime.gamma_dn(t)[i];
        cell.se = config.exact ? 0.0 : std::sqrt(var);
        cell.violation = std::max({0.0, drift - cell.band_hi, cell.band_lo - drift});
        cell.pass = config.exact ? cell.violation <= config.exact_tol : cell.violation <= config.confidence * cell.se;
        if (!config.exact && np > 3)
            cell.conditional_excess = std::max(
                0.0, conditional_excess(valid, q_valid, t, y, cell.band_lo, cell.band_hi, config.confidence, config.regression_window));
    });
    for (const auto& cell : rep.cells) {
        if (!cell.pass) ++rep.band_failures;
        if (cell.conditional_excess > 0.0) ++rep.conditional_flags;
    }

    if (config.retrain) {
        if (!train) throw std::invalid_argument("retrain test needs training paths");
        const auto res = train_statarb(*train, valid, cost_prime, config.retrain_config, q_train, q_valid);
        rep.retrained = true;
        rep.retrain_raw = res.g_valid;
        rep.retrain_g = std::max(0.0, res.g_valid);
        rep.retrain_se = res.g_valid_se;
        rep.retrain_tol = std::max(config.g_floor, config.confidence * res.g_valid_se);
        rep.retrain_pass = rep.retrain_g <= rep.retrain_tol;
        rep.retrain_gains = evaluate_gains(res.net, valid, cost_prime);
    }
    return rep;
}

std::vector<LadderPoint> g_lambda_ladder_from_gains(const std::vector<std::vector<double>>& candidate_gains,
                                                    std::span<const double> lambdas, std::span<const double> w_valid,
                                                    std::size_t bootstrap) {
    std::vector<LadderPoint> out;
    for (double lambda : lambdas) {
        if (!(lambda >= 0.0)) throw std::invalid_argument("ladder lambdas must be >= 0");
        LadderPoint pt{lambda, 0.0, 0.0};  // the zero policy attains 0
        const std::vector<double>* best = nullptr;
        for (const auto& g : candidate_gains) {
            const double u = entropy_utility(g, lambda, w_valid);
            if (u > pt.g) {
                pt.g = u;
                best = &g;
            }
        }
        if (best) pt.se = utility_se(*best, lambda, w_valid, bootstrap);
        out.push_back(pt);
    }
    return out;
}

std::vector<LadderPoint> g_lambda_ladder(const PathSet& train, const PathSet& valid, const CostSpec& cost,
                                         std::span<const double> lambdas, const StatArbConfig& config,
                                         std::span<const double> w_train, std::span<const double> w_valid) {
    std::vector<std::vector<double>> candidates;
    if (!cost.has_constraint()) {
        StatArbConfig c = config;
        c.train.lambda = 1.0;
        const auto base = train_statarb(train, valid, cost, c, w_train, w_valid);
        candidates.push_back(evaluate_gains(base.net, valid, cost));
        for (double lambda : lambdas)
            if (lambda > 0.0 && std::isfinite(lambda) && lambda != 1.0)
                candidates.push_back(evaluate_gains(base.net.scaled(1.0 / lambda), valid, cost));
    } else {
        for (double lambda : lambdas) {
            if (!(lambda > 0.0) || std::isinf(lambda)) continue;
            StatArbConfig c = config;
            c.train.lambda = lambda;
            const auto res = train_statarb(train, valid, cost, c, w_train, w_valid);
            candidates.push_back(evaluate_gains(res.net, valid, cost));
        }
    }
    return g_lambda_ladder_from_gains(candidates, lambdas, w_valid, config.bootstrap);
}

}  // namespace dhrn
