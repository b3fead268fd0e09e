#include "dhrn/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dhrn/black_scholes.hpp"
#include "dhrn/parallel.hpp"
#include "dhrn/rng.hpp"

namespace dhrn {

void BSParams::validate() const {
    if (!(sigma_realized > 0.0)) throw std::invalid_argument("sigma_realized must be > 0");
    if (sigma_implied && !(*sigma_implied > 0.0)) throw std::invalid_argument("sigma_implied must be > 0");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    if (n_steps == 0) throw std::invalid_argument("n_steps must be >= 1");
    if (n_paths == 0) throw std::invalid_argument("n_paths must be >= 1");
    if (!std::isfinite(mu)) throw std::invalid_argument("mu must be finite");
    if (option_tenor_steps && (*option_tenor_steps < 1 || static_cast<std::size_t>(*option_tenor_steps) > n_steps))
        throw std::invalid_argument("option tenor must lie in [1, n_steps]; options cannot mature after the horizon");
}

void BinomialParams::validate() const {
    if (!(u > d)) throw std::invalid_argument("binomial model needs u > d");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binomial probability must lie in [0, 1]");
    if (!(gamma >= 0.0)) throw std::invalid_argument("binomial cost must be >= 0");
}

namespace {

// Log-spot paths, S_0 = 1, filled block by block.
std::vector<double> bs_spot(const BSParams& params) {
    const auto m = params.n_steps;
    std::vector<double> spot(params.n_paths * (m + 1));
    const double drift = (params.mu - 0.5 * params.sigma_realized * params.sigma_realized) * params.dt;
    const double vol = params.sigma_realized * std::sqrt(params.dt);
    const std::size_t n_blocks = (params.n_paths + kSimBlock - 1) / kSimBlock;
    parallel_for(n_blocks, [&](std::size_t b) {
        Rng rng(params.seed, b);
        const auto end = std::min(params.n_paths, (b + 1) * kSimBlock);
        for (std::size_t p = b * kSimBlock; p < end; ++p) {
            double* row = spot.data() + p * (m + 1);
            double log_s = 0.0;
            row[0] = 1.0;
            for (std::size_t t = 1; t <= m; ++t) {
                log_s += drift + vol * rng.normal();
                row[t] = std::exp(log_s);
            }
        }
    });
    return spot;
}

}  // namespace

PathSet simulate_bs(const BSParams& params) {
    params.validate();
    const auto m = params.n_steps;
    PathSet::Data d;
    d.world = "bs";
    d.n_paths = params.n_paths;
    d.n_steps = m;
    d.step_dt = params.dt;
    d.seed = params.seed;
    d.instruments.assign(m, {InstrumentSpec::spot()});
    d.spot = bs_spot(params);
    d.mids.resize(params.n_paths * m);
    d.marks.resize(params.n_paths * m);
    for (std::size_t p = 0; p < params.n_paths; ++p) {
        const double* row = d.spot.data() + p * (m + 1);
        for (std::size_t t = 0; t < m; ++t) {
            d.mids[p * m + t] = row[t];
            d.marks[p * m + t] = row[m];
        }
    }
    return PathSet(std::move(d));
}

PathSet simulate_bs_with_options(const BSParams& params) {
    params.validate();
    if (!params.sigma_implied) throw std::invalid_argument("bs_options world needs sigma_implied");
    const auto m = params.n_steps;
    const double sig_i = *params.sigma_implied;
    constexpr std::size_t n = 3;

    PathSet::Data d;
    d.world = "bs_options";
    d.n_paths = params.n_paths;
    d.n_steps = m;
    d.step_dt = params.dt;
    d.seed = params.seed;
    std::vector<int> tenor(m);
    std::vector<double> call_quote(m);
    std::vector<double> put_quote(m);
    for (std::size_t t = 0; t < m; ++t) {
        const int remaining = static_cast<int>(m - t);
        tenor[t] = params.option_tenor_steps ? std::min(*params.option_tenor_steps, remaining) : remaining;
        const double tau = params.dt * tenor[t];
        call_quote[t] = bs_call_relative(1.0, sig_i, tau);
        put_quote[t] = bs_put_relative(1.0, sig_i, tau);
        d.instruments.push_back({InstrumentSpec::spot(),
                                 InstrumentSpec::option("atm_call", InstrumentKind::call, 1.0, tenor[t]),
                                 InstrumentSpec::option("atm_put", InstrumentKind::put, 1.0, tenor[t])});
    }
    d.spot = bs_spot(params);
    d.mids.resize(params.n_paths * m * n);
    d.marks.resize(params.n_paths * m * n);
    for (std::size_t p = 0; p < params.n_paths; ++p) {
        const double* row = d.spot.data() + p * (m + 1);
        for (std::size_t t = 0; t < m; ++t) {
            const auto base = (p * m + t) * n;
            const double growth = row[t + tenor[t]] / row[t];
            d.mids[base] = row[t];
            d.marks[base] = row[m];
            d.mids[base + 1] = call_quote[t];
            d.marks[base + 1] = std::max(growth - 1.0, 0.0);
            d.mids[base + 2] = put_quote[t];
            d.marks[base + 2] = std::max(1.0 - growth, 0.0);
        }
    }
    return PathSet(std::move(d));
}

PathSet simulate_binomial(const BinomialParams& params, std::size_t n_paths, std::uint64_t seed) {
    params.validate();
    PathSet::Data d;
    d.world = "binomial";
    d.n_paths = n_paths;
    d.n_steps = 1;
    d.step_dt = 1.0;
    d.seed = seed;
    d.instruments = {{InstrumentSpec::spot("H")}};
    d.spot.resize(2 * n_paths);
    d.mids.assign(n_paths, 1.0);
    d.marks.resize(n_paths);
    const std::size_t n_blocks = (n_paths + kSimBlock - 1) / kSimBlock;
    parallel_for(n_blocks, [&](std::size_t b) {
        Rng rng(seed, b);
        const auto end = std::min(n_paths, (b + 1) * kSimBlock);
        for (std::size_t p = b * kSimBlock; p < end; ++p) {
            const bool up = rng.uniform() < params.p;
            const double h1 = 1.0 + (up ? params.u : params.d);
            d.spot[2 * p] = 1.0;
            d.spot[2 * p + 1] = h1;
            d.marks[p] = h1;
        }
    });
    return PathSet(std::move(d));
}

WeightedPathSet binomial_tree(const BinomialParams& params) {
    params.validate();
    PathSet::Data d;
    d.world = "binomial";
    d.n_paths = 2;
    d.n_steps = 1;
    d.step_dt = 1.0;
    d.instruments = {{InstrumentSpec::spot("H")}};
    d.spot = {1.0, 1.0 + params.u, 1.0, 1.0 + params.d};
    d.mids = {1.0, 1.0};
    d.marks = {1.0 + params.u, 1.0 + params.d};
    return {PathSet(std::move(d)), {params.p, 1.0 - params.p}};
}

CostSpec binomial_cost(const BinomialParams& params) { return CostSpec::flat(1, 1, params.gamma); }

}  // namespace dhrn
