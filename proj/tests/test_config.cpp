#include <doctest.h>

#include <stdexcept>
#include <string>

#include "dhrn/config.hpp"

using namespace dhrn;
using nlohmann::json;

namespace {

json minimal() {
    return json::parse(R"({
        "seed": 3,
        "world": {"type": "bs_options", "mu": 0.0, "sigma_realized": 0.15, "sigma_implied": 0.2,
                  "n_steps": 5, "n_train": 100, "n_valid": 50},
        "cost": {"gamma": 0.001, "spot_gamma": 0.0005}
    })");
}

std::string error_of(const json& doc) {
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("parses a minimal document with defaults") {
    const auto c = parse_config(minimal());
    CHECK(c.seed == 3);
    CHECK(c.world.type == "bs_options");
    CHECK(*c.world.bs.sigma_implied == 0.2);
    CHECK(c.world.n_train == 100);
    CHECK(c.verification.cost_factor == 2.0);
    CHECK(c.threads == 1);
    CHECK(!c.hedge);
    CHECK(c.digest.size() == 64);
}

TEST_CASE("unknown keys and bad values name their path") {
    auto doc = minimal();
    doc["world"]["sigma_realised"] = 0.1;
    CHECK(error_of(doc).find("unknown key world.sigma_realised") != std::string::npos);

    doc = minimal();
    doc["training"] = {{"learning_rate", "fast"}};
    CHECK(error_of(doc).find("training.learning_rate") != std::string::npos);

    doc = minimal();
    doc.erase("world");
    CHECK(error_of(doc).find("world") != std::string::npos);

    doc = minimal();
    doc["world"]["type"] = "heston";
    CHECK(!error_of(doc).empty());

    doc = minimal();
    doc["verification"] = {{"cost_factor", 0.5}};
    CHECK(error_of(doc).find("cost_factor") != std::string::npos);

    doc = minimal();
    doc["cost"]["box"] = json::array({1.0, 1.0, 1.0});
    doc["cost"]["quadratic"] = {{"sigma", json::array({1.0})}, {"max_risk", 1.0}};
    CHECK(error_of(doc).find("exclusive") != std::string::npos);

    doc = minimal();
    doc["hedge"] = {{"payoff", json::array({{{"kind", "call"}, {"strike", 1.0}}})}, {"lambda", "inf"}};
    CHECK(error_of(doc).find("hedge.lambda") != std::string::npos);
}

TEST_CASE("digest ignores output and threads only") {
    const auto a = parse_config(minimal());
    const auto b = with_overrides(a, std::nullopt, std::filesystem::path("/tmp/elsewhere"), std::size_t{4});
    CHECK(b.digest == a.digest);
    CHECK(b.output == "/tmp/elsewhere");
    CHECK(b.threads == 4);
    const auto c = with_overrides(a, std::uint64_t{99}, std::nullopt, std::nullopt);
    CHECK(c.seed == 99);
    CHECK(c.digest != a.digest);
    auto doc = minimal();
    doc["cost"]["gamma"] = 0.002;
    CHECK(parse_config(doc).digest != a.digest);
}

TEST_CASE("lambdas accept infinity") {
    auto doc = minimal();
    doc["verification"] = {{"lambdas", json::array({0, 1, "inf"})}};
    const auto c = parse_config(doc);
    REQUIRE(c.verification.lambdas.size() == 3);
    CHECK(std::isinf(c.verification.lambdas[2]));
}

TEST_CASE("cost specs per instrument") {
    const auto c = parse_config(minimal());
    BSParams p;
    p.sigma_implied = 0.2;
    p.n_steps = 5;
    p.n_paths = 4;
    const auto ps = simulate_bs_with_options(p);
    const auto cost = make_cost(c.cost, ps);
    CHECK(cost.gamma_up(0)[0] == 0.0005);
    CHECK(cost.gamma_up(2)[1] == 0.001);
    CHECK(cost.gamma_dn(4)[2] == 0.001);
    const auto doubled = make_cost(c.cost, ps, 2.0);
    CHECK(doubled.gamma_dn(1)[0] == 0.001);
    CHECK(cost_dominates(doubled, cost));

    auto doc = minimal();
    doc["cost"]["box"] = json::array({1.0});
    CHECK_THROWS_AS(make_cost(parse_config(doc).cost, ps), ConfigError);
}

TEST_CASE("shipped configs parse") {
    for (const char* name : {"binomial", "bs_memm", "bs_options", "var_flatten", "bs_hedge"}) {
        CAPTURE(name);
        const auto c = load_config(std::filesystem::path(DHRN_SOURCE_DIR) / "configs" / (std::string(name) + ".cfg"));
        CHECK(!c.digest.empty());
    }
    CHECK_THROWS_AS(load_config("/nonexistent.cfg"), ConfigError);
}
