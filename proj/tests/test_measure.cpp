#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dhrn/measure.hpp"
#include "dhrn/rng.hpp"
#include "dhrn/statarb.hpp"
#include "dhrn/utility.hpp"

using namespace dhrn;

namespace {

std::vector<double> normal_sample(Rng& rng, std::size_t n, double scale) {
    std::vector<double> x(n);
    for (auto& v : x) v = scale * rng.normal();
    return x;
}

// Integral of f(z) phi(z) dz by the trapezoid rule on [-12, 12].
template <class F>
double gauss_expect(F f) {
    const int n = 24000;
    const double h = 24.0 / n;
    double s = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double z = -12.0 + h * k;
        const double w = (k == 0 || k == n) ? 0.5 : 1.0;
        s += w * f(z) * std::exp(-0.5 * z * z);
    }
    return s * h / std::sqrt(2.0 * M_PI);
}

}  // namespace

TEST_CASE("utility axioms on random samples") {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const double lam = 0.1 + 5.0 * rng.uniform();
        const auto x = normal_sample(rng, 200, 0.3);
        auto y = x;
        for (auto& v : y) v += std::abs(0.1 * rng.normal());
        const auto z = normal_sample(rng, 200, 0.3);
        const double c = rng.normal();
        const double w = rng.uniform();
        auto xc = x;
        for (auto& v : xc) v += c;
        std::vector<double> mix(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) mix[i] = w * x[i] + (1.0 - w) * z[i];
        const double ux = entropy_utility(x, lam);
        CHECK(entropy_utility(y, lam) >= ux);                                          // monotone
        CHECK(std::abs(entropy_utility(xc, lam) - (ux + c)) <= 1e-12 * (1.0 + std::abs(ux + c)));  // cash invariant
        CHECK(entropy_utility(mix, lam) >= w * ux + (1.0 - w) * entropy_utility(z, lam) - 1e-12);  // concave
        CHECK(ux <= std::accumulate(x.begin(), x.end(), 0.0) / 200.0 + 1e-15);
        CHECK(ux >= *std::min_element(x.begin(), x.end()) - 1e-15);
    }
}

TEST_CASE("utility limits and weights") {
    const std::vector<double> x{1.0, -2.0, 0.5};
    CHECK(entropy_utility(x, 0.0) == doctest::Approx(-0.5 / 3.0));
    CHECK(entropy_utility(x, kInf) == -2.0);
    CHECK(entropy_utility(x, kInf, std::vector<double>{1.0, 0.0, 1.0}) == 0.5);
    CHECK(entropy_utility(x, 1e-7) == doctest::Approx(-0.5 / 3.0).epsilon(1e-6));
    // Gaussian: U = mean - lambda var / 2.
    const double lam = 2.0, s = 0.1;
    const double u = -std::log(gauss_expect([&](double z) { return std::exp(-lam * s * z); })) / lam;
    CHECK(u == doctest::Approx(-lam * s * s / 2.0).epsilon(1e-10));
    // Large exponents do not overflow.
    CHECK(entropy_utility(std::vector<double>{-1000.0, 1000.0}, 1.0) == doctest::Approx(-1000.0 + std::log(2.0)));
    CHECK_THROWS_AS(entropy_utility(x, 1.0, std::vector<double>{0.0, 0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(entropy_utility(x, -1.0), std::invalid_argument);
}

TEST_CASE("bootstrap standard error of a mean") {
    Rng rng(3);
    const auto x = normal_sample(rng, 4000, 1.0);
    const double se = bootstrap_se(x, {}, [](auto v, auto w) { return entropy_utility(v, 0.0, w); }, 400, 1);
    CHECK(se == doctest::Approx(1.0 / std::sqrt(4000.0)).epsilon(0.15));
    CHECK(utility_se(x, 0.0, {}, 400, 1) == se);
}

TEST_CASE("measure weights") {
    const std::vector<double> g{0.0, std::log(2.0)};
    const auto mw = measure_weights(g);
    CHECK(mw.q[0] == doctest::Approx(2.0 / 3.0));
    CHECK(mw.q[1] == doctest::Approx(1.0 / 3.0));
    CHECK(mw.log_normalizer == doctest::Approx(std::log(0.75)));
    // Shifting every gain leaves q unchanged.
    const auto shifted = measure_weights(std::vector<double>{5.0, 5.0 + std::log(2.0)});
    CHECK(shifted.q[0] == doctest::Approx(mw.q[0]).epsilon(1e-14));
    const auto based = measure_weights(std::vector<double>{0.0, 0.0}, {}, std::vector<double>{0.25, 0.75});
    CHECK(based.q[1] == doctest::Approx(0.75));
    CHECK(relative_entropy(based.q, std::vector<double>{0.25, 0.75}) == doctest::Approx(0.0));
    // An inadmissible path would carry infinite mass unless its base weight is zero.
    CHECK_THROWS_AS(measure_weights(std::vector<double>{0.0, -kInf}), std::invalid_argument);
    const auto masked = measure_weights(std::vector<double>{0.0, -kInf}, {}, std::vector<double>{1.0, 0.0});
    CHECK(masked.q[1] == 0.0);
    CHECK_THROWS_AS(measure_weights(std::vector<double>{0.0, NAN}), std::invalid_argument);
}

TEST_CASE("effective sample size and quantiles") {
    const std::vector<double> uniform(100, 0.01);
    CHECK(effective_sample_size(uniform) == doctest::Approx(100.0));
    std::vector<double> spike(100, 0.0);
    spike[3] = 1.0;
    CHECK(effective_sample_size(spike) == doctest::Approx(1.0));
    CHECK(relative_entropy(spike) == doctest::Approx(std::log(100.0)));
    const std::vector<double> levels{0.0, 0.5, 1.0};
    for (double v : weight_quantiles(uniform, levels)) CHECK(v == doctest::Approx(0.01).epsilon(1e-15));
    const auto qs = weight_quantiles(std::vector<double>{0.1, 0.4, 0.2, 0.3}, levels);
    CHECK(qs[0] == 0.1);
    CHECK(qs[1] == doctest::Approx(0.25));
    CHECK(qs[2] == 0.4);
}

TEST_CASE("black-scholes minimal martingale density") {
    const double mu = 0.05, sigma = 0.15, t = 30.0 / 252.0;
    const auto spot = [&](double z) { return std::exp((mu - 0.5 * sigma * sigma) * t + sigma * std::sqrt(t) * z); };
    const auto dens = [&](double z) { return bs_memm_density(spot(z), mu, sigma, t); };
    CHECK(gauss_expect(dens) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(gauss_expect([&](double z) { return dens(z) * spot(z); }) == doctest::Approx(1.0).epsilon(1e-10));
    const double h = gauss_expect([&](double z) { return dens(z) * std::log(dens(z)); });
    CHECK(h == doctest::Approx(mu * mu * t / (2.0 * sigma * sigma)).epsilon(1e-8));
    CHECK(mu * mu * t / (2.0 * sigma * sigma) == doctest::Approx(0.0066138).epsilon(1e-4));
}

TEST_CASE("binomial oracle against brute force") {
    struct Case {
        BinomialParams p;
        double lambda;
    };
    const Case cases[] = {
        {{0.1, -0.08, 0.5, 0.0}, 1.0},  {{0.1, -0.08, 0.5, 0.005}, 1.0}, {{0.1, -0.08, 0.3, 0.002}, 2.0},
        {{0.05, -0.1, 0.6, 0.001}, 0.5}, {{0.1, -0.1, 0.5, 0.01}, 1.0},
    };
    for (const auto& c : cases) {
        const auto o = binomial_oracle(c.p, c.lambda);
        REQUIRE(!o.classical_arbitrage);
        const double w[2] = {c.p.p, 1.0 - c.p.p};
        const auto util = [&](double a) {
            const double cost = c.p.gamma * std::abs(a);
            const double x[2] = {a * c.p.u - cost, a * c.p.d - cost};
            return entropy_utility(x, c.lambda, w);
        };
        double best = -kInf, best_a = 0.0;
        for (int k = -200000; k <= 200000; ++k) {
            const double a = k * 1e-4;
            if (const double v = util(a); v > best) {
                best = v;
                best_a = a;
            }
        }
        CHECK(o.g == doctest::Approx(best).epsilon(1e-7));
        CHECK(std::abs(o.a_star - best_a) < 2e-4);
        CHECK(o.q_up + o.q_down == doctest::Approx(1.0));
        const double drift = o.q_up * c.p.u + o.q_down * c.p.d;
        CHECK(std::abs(drift) <= c.p.gamma + 1e-12);
        if (!o.in_band) CHECK(std::abs(drift) == doctest::Approx(c.p.gamma).epsilon(1e-9));
    }
    // a* scales as 1/lambda.
    const BinomialParams bp{0.1, -0.08, 0.5, 0.002};
    CHECK(binomial_oracle(bp, 4.0).a_star == doctest::Approx(binomial_oracle(bp, 1.0).a_star / 4.0));
    CHECK(binomial_oracle({0.1, 0.01, 0.5, 0.005}, 1.0).classical_arbitrage);
    CHECK(binomial_oracle({0.01, -0.01, 0.5, 0.02}, 1.0).in_band);
}

TEST_CASE("epsilon bound") {
    CHECK(epsilon_bound(1.1, 1.0, 2.0) == doctest::Approx(std::log(1.1) / 2.0));
    CHECK(epsilon_bound(1.0, 1.0, 1.0) == 0.0);
}

TEST_CASE("ladder from candidate gains is non-increasing") {
    Rng rng(8);
    std::vector<std::vector<double>> candidates;
    for (double scale : {1.0, 0.5, 0.25}) {
        std::vector<double> g(500);
        for (auto& v : g) v = scale * (0.01 + 0.05 * rng.normal());
        candidates.push_back(g);
    }
    const std::vector<double> lambdas{0.0, 0.5, 1.0, 2.0, 10.0, kInf};
    const auto ladder = g_lambda_ladder_from_gains(candidates, lambdas, {}, 50);
    REQUIRE(ladder.size() == lambdas.size());
    for (std::size_t k = 0; k < ladder.size(); ++k) {
        CHECK(ladder[k].g >= 0.0);
        if (k > 0) CHECK(ladder[k].g <= ladder[k - 1].g + 1e-15);
    }
    CHECK(ladder.back().g == 0.0);
    CHECK(ladder[0].g == doctest::Approx(0.01).epsilon(0.5));
}

TEST_CASE("band test flags a drift outside the spread") {
    // Two paths, one step, one instrument: drift under q is 0.6 * 0.1 - 0.4 * 0.1 = 0.02.
    PathSet::Data d;
    d.world = "test";
    d.n_paths = 2;
    d.n_steps = 1;
    d.step_dt = 1.0;
    d.instruments = {{InstrumentSpec::spot()}};
    d.spot = {1.0, 1.1, 1.0, 0.9};
    d.mids = {1.0, 1.0};
    d.marks = {1.1, 0.9};
    const PathSet ps(d);
    VerifyConfig vc;
    vc.exact = true;
    vc.retrain = false;
    const std::vector<double> q{0.6, 0.4};
    const auto wide = verify_no_statarb(ps, q, CostSpec::flat(1, 1, 0.03), vc);
    CHECK(wide.band_pass());
    CHECK(wide.cells[0].drift == doctest::Approx(0.02));
    const auto narrow = verify_no_statarb(ps, q, CostSpec::flat(1, 1, 0.01), vc);
    CHECK(!narrow.band_pass());
    CHECK(narrow.cells[0].violation == doctest::Approx(0.01));
    const auto train_cost = CostSpec::flat(1, 1, 0.05);
    CHECK_THROWS_AS(verify_no_statarb(ps, q, CostSpec::flat(1, 1, 0.03), vc, nullptr, {}, &train_cost),
                    std::invalid_argument);
}
