// Acceptance suite: one PASS/FAIL line per criterion.
//
//   dhrn_acceptance [--out DIR] [criterion ...]
//
// Long-running criteria run the shipped configs through the pipeline and read
// the checks it records; the rest are computed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dhrn/dlv.hpp"
#include "dhrn/entropy_loss.hpp"
#include "dhrn/pipeline.hpp"
#include "dhrn/utility.hpp"
#include "dlv_fixtures.hpp"
#include "fd_check.hpp"

using namespace dhrn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

fs::path g_out = "acceptance_out";

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path config_path(const std::string& name) { return fs::path(DHRN_SOURCE_DIR) / "configs" / (name + ".cfg"); }

// Checks recorded by the pipeline in <dir>/checks/*.csv, by name.
std::map<std::string, Check> read_checks(const fs::path& dir) {
    std::map<std::string, Check> out;
    if (!fs::exists(dir / "checks")) return out;
    for (const auto& entry : fs::directory_iterator(dir / "checks")) {
        std::ifstream in(entry.path());
        std::string line;
        std::getline(in, line);  // digest
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            std::vector<std::string> f;
            std::stringstream ss(line);
            for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
            if (f.size() < 4) continue;
            Check c{f[0], std::stod(f[1]), std::stod(f[2]), f[3] == "1", f.size() > 4 ? f[4] : ""};
            out[c.name] = c;
        }
    }
    return out;
}

std::string failed_marker(const fs::path& dir) {
    std::ifstream in(dir / "FAILED");
    std::string s;
    std::getline(in, s);
    return s;
}

struct PipelineRun {
    int code = -1;
    double seconds = 0.0;
    std::map<std::string, Check> checks;
    std::string failed;
};

PipelineRun run_config(const ExperimentConfig& cfg, const std::string& tag) {
    const auto dir = g_out / tag;
    fs::remove_all(dir);
    const auto c = with_overrides(cfg, std::nullopt, dir, std::nullopt);
    const auto t0 = std::chrono::steady_clock::now();
    PipelineRun r;
    r.code = run_stage(c, "run");
    r.seconds = seconds_since(t0);
    r.checks = read_checks(dir);
    r.failed = failed_marker(dir);
    return r;
}

// Requires every named check to be present and passing.
Outcome judge(const PipelineRun& r, const std::vector<std::string>& names) {
    Outcome o{true, {}};
    if (!r.failed.empty()) {
        o.pass = false;
        o.detail = r.failed + "; ";
    }
    for (const auto& n : names) {
        const auto it = r.checks.find(n);
        if (it == r.checks.end()) {
            o.pass = false;
            o.detail += n + " missing; ";
            continue;
        }
        const auto& c = it->second;
        o.pass = o.pass && c.pass;
        o.detail += n + (c.pass ? " ok" : " FAIL") + " (" + fmt(c.value) + " vs " + fmt(c.tolerance) + "); ";
    }
    o.detail += "runtime " + fmt(r.seconds) + " s";
    return o;
}

Outcome binomial_sweep() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(20240601);
    const auto base = load_config(config_path("binomial"));
    double worst_a = 0.0, worst_g = 0.0, worst_band = 0.0;
    int n_band = 0, failures = 0;
    for (int k = 0; k < 20; ++k) {
        BinomialParams bp;
        bp.u = 0.02 + 0.13 * rng.uniform();
        bp.d = -(0.02 + 0.13 * rng.uniform());
        bp.p = 0.3 + 0.4 * rng.uniform();
        const double drift = bp.p * bp.u + (1.0 - bp.p) * bp.d;
        // Every fourth point sits inside the no-trade band.
        bp.gamma = k % 4 == 3 ? std::abs(drift) * (1.0 + rng.uniform()) : 0.5 * std::abs(drift) * rng.uniform();
        const double lambda = 0.5 + 2.5 * rng.uniform();
        const auto oracle = binomial_oracle(bp, lambda);
        if (oracle.classical_arbitrage) return {false, "sweep point with classical arbitrage"};

        const auto tree = binomial_tree(bp);
        const auto cost = binomial_cost(bp);
        auto sc = base.training;
        sc.train.lambda = lambda;
        sc.train.seed = sc.init_seed = 100 + static_cast<std::uint64_t>(k);
        const auto res = train_statarb(tree.paths, tree.paths, cost, sc, tree.weights, tree.weights);
        const double a = res.net.forward(tree.paths)(0, 0, 0);
        const double g = entropy_utility(evaluate_gains(res.net, tree.paths, cost), lambda, tree.weights);
        const double ea = std::abs(a - oracle.a_star), eg = std::abs(g - oracle.g);
        worst_a = std::max(worst_a, ea);
        worst_g = std::max(worst_g, eg);
        if (oracle.in_band) {
            ++n_band;
            worst_band = std::max(worst_band, std::abs(a));
        }
        if (ea > 1e-3 || eg > 1e-4 || (oracle.in_band && std::abs(a) > 1e-3)) {
            ++failures;
            std::fprintf(stderr, "  binomial point %d: u %.4g d %.4g p %.4g gamma %.4g lambda %.4g: a %.6g vs %.6g, g %.6g vs %.6g\n",
                         k, bp.u, bp.d, bp.p, bp.gamma, lambda, a, oracle.a_star, g, oracle.g);
        }
    }
    const double secs = seconds_since(t0);
    return {failures == 0 && secs <= 120.0,
            "20 points (" + std::to_string(n_band) + " in band), " + std::to_string(failures) + " off; max |a - a*| " +
                fmt(worst_a) + " (tol 1e-3), max |g - g*| " + fmt(worst_g) + " (tol 1e-4), max in-band |a| " +
                fmt(worst_band) + "; runtime " + fmt(secs) + " s (limit 120)"};
}

Outcome bs_memm() {
    const auto r = run_config(load_config(config_path("bs_memm")), "bs_memm");
    auto o = judge(r, {"density_mse_trend", "density_mse_ratio", "relative_entropy", "call_prices_within_se"});
    if (r.seconds > 1800.0) o.pass = false;
    o.detail += " (limit 1800)";
    return o;
}

Outcome implied_vs_realized() {
    const auto r = run_config(load_config(config_path("bs_options")), "bs_options");
    return judge(r, {"variance_gap_closure", "low_weight_paths_low_vol", "high_weight_paths_high_vol"});
}

Outcome var_flattening() {
    const auto r = run_config(load_config(config_path("var_flatten")), "var_flatten");
    return judge(r, {"band", "retrained_statarb"});
}

Outcome dlv_codec() {
    Rng rng(515);
    double worst_rt = 0.0;
    int missed = 0, injected = 0;
    const auto flagged = [](const std::vector<ArbitrageViolation>& v, std::size_t j, std::size_t i, ArbitrageKind k) {
        return std::any_of(v.begin(), v.end(), [&](const auto& x) {
            return x.maturity_index == j && x.strike_index == i && x.kind == k;
        });
    };
    for (int k = 0; k < 50; ++k) {
        const auto s = testing::random_surface(rng);
        const auto calls = calls_from_dlv(s);
        if (!static_arbitrage_report(calls).empty()) return {false, "generated grid is not arbitrage-free"};
        const auto back = calls_from_dlv(dlv_from_calls(calls));
        for (std::size_t c = 0; c < calls.values.size(); ++c)
            worst_rt = std::max(worst_rt, std::abs(back.values[c] - calls.values[c]));

        // One butterfly and one calendar violation per grid.
        const auto j = rng.below(s.grid.n_maturities());
        const auto i = rng.below(s.grid.n_strikes());
        const auto& x = s.grid.strikes;
        const double xl = i == 0 ? s.grid.ghost_low() : x[i - 1];
        const double xr = i + 1 == x.size() ? s.grid.ghost_high() : x[i + 1];
        const double cl = i == 0 ? 1.0 : calls(j, i - 1);
        const double cr = i + 1 == x.size() ? 0.0 : calls(j, i + 1);
        auto bf = calls;
        bf(j, i) = cl + (cr - cl) * (x[i] - xl) / (xr - xl) + 1e-6;
        ++injected;
        if (!flagged(static_arbitrage_report(bf), j, i, ArbitrageKind::butterfly)) ++missed;

        const auto jc = 1 + rng.below(s.grid.n_maturities() - 1);
        auto cal = calls;
        cal(jc, i) = calls(jc - 1, i) - 1e-6;
        ++injected;
        if (!flagged(static_arbitrage_report(cal), jc, i, ArbitrageKind::calendar)) ++missed;
    }

    DLVSurface flat;
    for (int i = 0; i <= 200; ++i) flat.grid.strikes.push_back(0.5 + 0.005 * i);
    for (int j = 1; j <= 30; ++j) flat.grid.maturities.push_back(j / 252.0);
    flat.sigma.assign(flat.grid.n_strikes() * flat.grid.n_maturities(), 0.15);
    const double tau = flat.grid.maturities.back();
    const double atm = calls_from_dlv(flat)(29, 100);
    const double iv = testing::implied_vol(atm, 1.0, tau);
    const double price_err = std::abs(atm - bs_call_relative(1.0, 0.15, tau));

    const bool pass = worst_rt <= 1e-10 && std::abs(iv - 0.15) <= 1e-3 && price_err <= 1e-3 && missed == 0;
    return {pass, "round trip max error " + fmt(worst_rt) + " over 50 grids (tol 1e-10); flat 0.15 ATM implied vol " +
                      fmt(iv) + ", price error " + fmt(price_err) + " (tol 10 bp); " + std::to_string(injected - missed) +
                      "/" + std::to_string(injected) + " injected violations flagged at their cell"};
}

Outcome gradient_fd() {
    BSParams p;
    p.mu = 0.04;
    p.sigma_realized = 0.2;
    p.sigma_implied = 0.22;
    p.n_steps = 5;
    p.n_paths = 48;
    p.seed = 31;
    const auto ps = simulate_bs_with_options(p);
    const auto n = ps.n_instruments(), m = ps.n_steps();
    const auto cost = CostSpec::flat(m, n, 0.002);
    const QuadraticConstraint quad{{1.0, 0.1, 0.0, 0.1, 2.0, 0.3, 0.0, 0.3, 2.0}, 0.5};
    const CostSpec qcost(m, n, std::vector<double>(m * n, 0.001), std::vector<double>(m * n, 0.002), quad);
    std::vector<double> w(ps.n_paths()), z(ps.n_paths());
    Rng rng(77);
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = 0.2 + rng.uniform();
        z[i] = -std::max(ps.spot(i, m) - 1.0, 0.0);
    }
    struct Variant {
        NetShape shape;
        Constraint projection;
        LossInputs in;
    };
    const Variant variants[] = {
        {{Architecture::feedforward, {8, 6}, {true, false}}, {}, {&ps, &cost, 1.0, {}, {}}},
        {{Architecture::recurrent, {6, 5}, {true, false}}, {}, {&ps, &cost, 2.0, w, z}},
        {{Architecture::feedforward, {6}, {}}, quad, {&ps, &qcost, 0.5, w, {}}},
        {{Architecture::recurrent, {5}, {}}, quad, {&ps, &qcost, 1.0, {}, z}},
    };
    int points = 0, skipped = 0, bad = 0;
    double worst = 0.0;
    for (int attempt = 0; points < 100 && attempt < 1000; ++attempt) {
        const auto& v = variants[attempt % 4];
        auto net = PolicyNet::create(v.shape, ps, v.projection, 1000 + static_cast<std::uint64_t>(attempt));
        testing::jitter(net, rng, 0.3);
        const auto r = testing::fd_point(net, v.in, rng);
        if (r.skipped) {
            ++skipped;
            continue;
        }
        ++points;
        worst = std::max(worst, r.rel);
        if (r.rel > 1e-5) ++bad;
    }
    return {points == 100 && bad == 0, std::to_string(points) + " non-kink points (" + std::to_string(skipped) +
                                            " kink draws skipped), max relative error " + fmt(worst) + " (tol 1e-5)"};
}

Outcome utility_axioms() {
    Rng rng(4242);
    int chain_fail = 0;
    double worst_cash = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const auto n = 2 + rng.below(300);
        const double scale = 0.01 + rng.uniform();
        std::vector<double> x(n), wts(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = scale * rng.normal() + 0.1 * rng.normal();
            wts[i] = rng.uniform();
        }
        const std::span<const double> w = k % 2 ? std::span<const double>(wts) : std::span<const double>();
        double l1 = 0.05 + 5.0 * rng.uniform(), l2 = 0.05 + 5.0 * rng.uniform();
        if (l1 > l2) std::swap(l1, l2);
        const double u0 = entropy_utility(x, 0.0, w), u1 = entropy_utility(x, l1, w), u2 = entropy_utility(x, l2, w);
        const double uinf = entropy_utility(x, kInf, w);
        if (!(u0 >= u1 && u1 >= u2 && u2 >= uinf)) ++chain_fail;
        const double c = 2.0 * rng.normal();
        auto xc = x;
        for (auto& v : xc) v += c;
        worst_cash = std::max(worst_cash, std::abs(entropy_utility(xc, l1, w) - (u1 + c)));
    }
    return {chain_fail == 0 && worst_cash <= 1e-12,
            "1000 samples: U_0 >= U_l >= U_l' >= U_inf violated " + std::to_string(chain_fail) +
                " times; max cash-invariance error " + fmt(worst_cash) + " (tol 1e-12)"};
}

Outcome hedging_consistency() {
    const auto base = load_config(config_path("bs_hedge"));
    const auto zero = run_config(base, "bs_hedge");
    auto doc = base.raw;
    doc["cost"]["gamma"] = 0.001;
    const auto costly = run_config(parse_config(doc), "bs_hedge_cost");
    auto a = judge(zero, {"hedge_q_equals_p_minus_statarb", "hedge_decomposition"});
    auto b = judge(costly, {"hedge_q_at_most_p_minus_statarb"});
    return {a.pass && b.pass, "zero cost: " + a.detail + " | cost 0.001: " + b.detail};
}

std::string g_cli;

std::string slurp(const fs::path& f) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    // A small recurrent run with options exercises sharded simulation and training.
    auto doc = load_config(config_path("bs_options")).raw;
    doc["world"]["n_train"] = 6000;
    doc["world"]["n_valid"] = 3000;
    doc["training"]["epochs"] = 4;
    doc["training"]["batch_size"] = 1000;
    doc["training"]["eval_every"] = 2;
    const auto cfg_file = g_out / "determinism.cfg";
    fs::create_directories(g_out);
    std::ofstream(cfg_file) << doc.dump(2);

    std::string detail;
    bool pass = true;
    for (const std::string& cfg : {config_path("binomial").string(), cfg_file.string()}) {
        std::vector<std::string> metrics;
        for (const auto& [tag, threads] : std::vector<std::pair<std::string, int>>{{"a", 1}, {"b", 1}, {"c", 4}}) {
            const auto dir = g_out / ("determinism_" + tag);
            fs::remove_all(dir);
            const std::string cmd = "\"" + g_cli + "\" run --config \"" + cfg + "\" --out \"" + dir.string() +
                                    "\" --threads " + std::to_string(threads) + " > /dev/null 2>&1";
            const int rc = std::system(cmd.c_str());
            if (!fs::exists(dir / "metrics.csv")) {
                pass = false;
                detail += "no metrics.csv (exit " + std::to_string(rc) + "); ";
            }
            metrics.push_back(slurp(dir / "metrics.csv"));
        }
        const bool same = !metrics[0].empty() && metrics[0] == metrics[1] && metrics[0] == metrics[2];
        pass = pass && same;
        detail += fs::path(cfg).stem().string() + ": " + (same ? "identical" : "DIFFERENT") + " (" +
                  std::to_string(metrics[0].size()) + " bytes); ";
    }
    return {pass, detail + "runs: twice with 1 thread, once with 4"};
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> only;
    for (int k = 1; k < argc; ++k) {
        const std::string a = argv[k];
        if (a == "--out" && k + 1 < argc) g_out = argv[++k];
        else if (a == "--cli" && k + 1 < argc) g_cli = argv[++k];
        else only.push_back(a);
    }
    if (g_cli.empty()) g_cli = (fs::path(argv[0]).parent_path() / ".." / "dhrn").string();

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"binomial_oracle_sweep", binomial_sweep},
        {"bs_memm_reproduction", bs_memm},
        {"implied_vs_realized", implied_vs_realized},
        {"var_drift_flattening", var_flattening},
        {"dlv_codec", dlv_codec},
        {"gradient_finite_differences", gradient_fd},
        {"utility_axioms", utility_axioms},
        {"deep_hedging_consistency", hedging_consistency},
        {"determinism", determinism},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s %-28s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
