#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include "dhrn/adam.hpp"
#include "dhrn/checkpoint.hpp"
#include "dhrn/entropy_loss.hpp"
#include "dhrn/parallel.hpp"
#include "dhrn/simulators.hpp"
#include "dhrn/trainer.hpp"
#include "dhrn/utility.hpp"
#include "fd_check.hpp"

using namespace dhrn;

namespace {

PathSet options_world(std::size_t n_paths, std::uint64_t seed = 21) {
    BSParams p;
    p.mu = 0.04;
    p.sigma_realized = 0.2;
    p.sigma_implied = 0.22;
    p.n_steps = 4;
    p.n_paths = n_paths;
    p.seed = seed;
    return simulate_bs_with_options(p);
}

std::vector<std::size_t> all_paths(const PathSet& ps) {
    std::vector<std::size_t> idx(ps.n_paths());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

}  // namespace

TEST_CASE("entropy loss is minus the utility") {
    const std::vector<double> x{0.1, -0.2, 0.3, 0.05};
    const std::vector<double> w{1.0, 2.0, 1.0, 0.5};
    for (double lam : {0.0, 0.5, 3.0}) CHECK(entropy_loss(x, lam, w) == doctest::Approx(-entropy_utility(x, lam, w)));
    CHECK(entropy_loss(std::vector<double>{0.7, 0.7}, 2.0) == doctest::Approx(-0.7).epsilon(1e-15));
    CHECK(subgradient_abs(0.0) == 0.0);
    CHECK(subgradient_abs(-2.0) == -1.0);
}

TEST_CASE("feedforward gradient matches finite differences") {
    const auto ps = options_world(40);
    const auto cost = CostSpec::flat(ps.n_steps(), ps.n_instruments(), 0.002);
    auto net = PolicyNet::create({Architecture::feedforward, {6, 5}, {true, false}}, ps, {}, 3);
    Rng rng(5);
    testing::jitter(net, rng, 0.3);
    const LossInputs in{&ps, &cost, 1.5, {}, {}};
    int checked = 0;
    for (int k = 0; k < 10; ++k) {
        const auto r = testing::fd_point(net, in, rng);
        if (r.skipped) continue;
        ++checked;
        CHECK(r.rel < 1e-5);
    }
    CHECK(checked >= 5);
}

TEST_CASE("recurrent gradient with payoff and weights matches finite differences") {
    const auto ps = options_world(30);
    const auto cost = CostSpec::flat(ps.n_steps(), ps.n_instruments(), 0.001);
    auto net = PolicyNet::create({Architecture::recurrent, {5, 4}, {true, false}}, ps, {}, 8);
    Rng rng(6);
    testing::jitter(net, rng, 0.3);
    std::vector<double> w(ps.n_paths()), z(ps.n_paths());
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = 0.5 + rng.uniform();
        z[i] = -std::max(ps.spot(i, ps.n_steps()) - 1.0, 0.0);
    }
    const LossInputs in{&ps, &cost, 2.0, w, z};
    int checked = 0;
    for (int k = 0; k < 10; ++k) {
        const auto r = testing::fd_point(net, in, rng);
        if (r.skipped) continue;
        ++checked;
        CHECK(r.rel < 1e-5);
    }
    CHECK(checked >= 5);
}

TEST_CASE("projected gradient matches finite differences") {
    const auto ps = options_world(30);
    const QuadraticConstraint quad{{1.0, 0.1, 0.0, 0.1, 2.0, 0.3, 0.0, 0.3, 2.0}, 0.5};
    const CostSpec cost(ps.n_steps(), 3, std::vector<double>(ps.n_steps() * 3, 0.001),
                        std::vector<double>(ps.n_steps() * 3, 0.001), quad);
    auto net = PolicyNet::create({Architecture::feedforward, {6}, {}}, ps, quad, 1);
    Rng rng(2);
    testing::jitter(net, rng, 1.0);
    const LossInputs in{&ps, &cost, 1.0, {}, {}};
    int checked = 0;
    for (int k = 0; k < 10; ++k) {
        const auto r = testing::fd_point(net, in, rng);
        if (r.skipped) continue;
        ++checked;
        CHECK(r.rel < 1e-5);
    }
    CHECK(checked >= 5);
}

TEST_CASE("projected actions are admissible") {
    const auto ps = options_world(50);
    const BoxConstraint box{{0.5, 0.2, 0.2}};
    const CostSpec cost(ps.n_steps(), 3, std::vector<double>(ps.n_steps() * 3, 0.0),
                        std::vector<double>(ps.n_steps() * 3, 0.0), box);
    auto net = PolicyNet::create({Architecture::recurrent, {4}, {}}, ps, box, 1);
    Rng rng(1);
    testing::jitter(net, rng, 5.0);
    const auto a = net.forward(ps);
    for (std::size_t p = 0; p < ps.n_paths(); ++p)
        for (std::size_t t = 0; t < ps.n_steps(); ++t) CHECK(cost.admissible(a.step(p, t)));
    for (double g : evaluate_gains(net, ps, cost)) CHECK(std::isfinite(g));
}

TEST_CASE("spot trades are holdings differences") {
    const auto ps = options_world(20);
    auto net = PolicyNet::create({Architecture::feedforward, {4}, {}}, ps, {}, 1);
    Rng rng(4);
    testing::jitter(net, rng, 0.5);
    const auto a = net.forward(ps);
    const auto a2 = net.scaled(2.0).forward(ps);
    for (std::size_t k = 0; k < a.values.size(); ++k) CHECK(a2.values[k] == doctest::Approx(2.0 * a.values[k]));
    // With zero cost the spot gain is the holdings path integrated against spot moves.
    const auto g = gains(ps, a, CostSpec::zero(ps.n_steps(), 3));
    for (std::size_t p = 0; p < ps.n_paths(); ++p) {
        double holding = 0.0, pnl = 0.0;
        for (std::size_t t = 0; t < ps.n_steps(); ++t) {
            holding += a(p, t, 0);
            pnl += holding * (ps.spot(p, t + 1) - ps.spot(p, t));
            for (std::size_t i = 1; i < 3; ++i) pnl += a(p, t, i) * (ps.mark(p, t, i) - ps.mid(p, t, i));
        }
        CHECK(g[p] == doctest::Approx(pnl).epsilon(1e-12));
    }
}

TEST_CASE("adam first step and convergence") {
    Eigen::VectorXd x(2);
    x << 1.0, -2.0;
    AdamState st;
    const AdamConfig cfg{0.01, 0.9, 0.999, 1e-12};
    Eigen::VectorXd g(2);
    g << 3.0, -0.5;
    adam_step(x, st, g, cfg);
    CHECK(x(0) == doctest::Approx(0.99));
    CHECK(x(1) == doctest::Approx(-1.99));
    for (int k = 0; k < 3000; ++k) {
        Eigen::VectorXd grad(2);
        grad << 2.0 * (x(0) - 0.3), 8.0 * (x(1) + 0.7);
        adam_step(x, st, grad, cfg, 0.01 * std::pow(0.998, k));
    }
    CHECK(x(0) == doctest::Approx(0.3).epsilon(1e-3));
    CHECK(x(1) == doctest::Approx(-0.7).epsilon(1e-3));
}

TEST_CASE("checkpoint round trip") {
    const auto ps = options_world(20);
    auto net = PolicyNet::create({Architecture::recurrent, {5, 3}, {true, false}}, ps, BoxConstraint{{1.0, 1.0, 1.0}}, 2);
    Rng rng(9);
    testing::jitter(net, rng, 0.4);
    const auto file = std::filesystem::temp_directory_path() / "dhrn_test.ckpt";
    save_checkpoint(file, net, rng.state(), "digest");
    const auto back = load_checkpoint(file);
    CHECK(back.config_digest == "digest");
    CHECK(back.rng_state == rng.state());
    CHECK(back.net.params() == net.params());
    CHECK(back.net.forward(ps).values == net.forward(ps).values);
    std::filesystem::remove(file);
    CHECK_THROWS(load_checkpoint(file));
}

TEST_CASE("incompatible paths are rejected") {
    const auto ps = options_world(10);
    const auto net = PolicyNet::create({}, ps, {}, 1);
    BSParams p;
    p.n_steps = 4;
    p.n_paths = 10;
    CHECK_THROWS_AS(net.forward(simulate_bs(p)), std::invalid_argument);
}

TEST_CASE("loss and training are independent of the thread count") {
    const auto ps = options_world(500);
    const auto cost = CostSpec::flat(ps.n_steps(), 3, 0.001);
    auto net = PolicyNet::create({Architecture::feedforward, {8, 8}, {}}, ps, {}, 4);
    Rng rng(1);
    testing::jitter(net, rng, 0.2);
    const auto idx = all_paths(ps);
    const LossInputs in{&ps, &cost, 1.0, {}, {}};
    TrainConfig tc;
    tc.learning_rate = 1e-3;
    tc.batch_size = 128;
    tc.epochs = 3;
    set_thread_count(1);
    const auto r1 = loss_and_grad(net, in, idx);
    auto n1 = net;
    train_policy(n1, {&ps, &cost, {}, {}}, tc);
    set_thread_count(4);
    const auto r4 = loss_and_grad(net, in, idx);
    auto n4 = net;
    train_policy(n4, {&ps, &cost, {}, {}}, tc);
    set_thread_count(1);
    CHECK(r1.loss == r4.loss);
    CHECK(r1.grad == r4.grad);
    CHECK(n1.params() == n4.params());
}

TEST_CASE("training reaches the binomial optimum") {
    const BinomialParams bp{0.1, -0.08, 0.5, 0.0};
    const auto tree = binomial_tree(bp);
    auto net = PolicyNet::create({Architecture::feedforward, {4}, {}}, tree.paths, {}, 1);
    TrainConfig tc;
    tc.learning_rate = 0.02;
    tc.final_learning_rate = 1e-5;
    tc.batch_size = 0;
    tc.epochs = 3000;
    const auto cost = CostSpec::zero(1, 1);
    train_policy(net, {&tree.paths, &cost, tree.weights, {}}, tc);
    // Zero cost, lambda = 1: a* = log(p u / ((1-p)(-d))) / (u - d).
    const double a_star = std::log(0.5 * 0.1 / (0.5 * 0.08)) / 0.18;
    CHECK(net.forward(tree.paths)(0, 0, 0) == doctest::Approx(a_star).epsilon(1e-4));
}

TEST_CASE("training rejects bad settings") {
    TrainConfig tc;
    tc.learning_rate = -1.0;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc = {};
    tc.lambda = -1.0;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
}
