#include "dhrn/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "dhrn/black_scholes.hpp"
#include "dhrn/checkpoint.hpp"
#include "dhrn/measure.hpp"
#include "dhrn/parallel.hpp"
#include "dhrn/pathset_io.hpp"
#include "dhrn/utility.hpp"
#include "dhrn/var_model.hpp"

namespace dhrn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kTrainTag = 0x747261696eULL;
constexpr std::uint64_t kValidTag = 0x76616c6964ULL;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed ^ (tag * 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string num(std::size_t v) { return std::to_string(v); }
std::string num(bool v) { return v ? "1" : "0"; }
std::string num(const std::string& v) { return v; }
std::string num(const char* v) { return v; }

class Csv {
public:
    Csv(const fs::path& file, const std::string& digest, const std::string& header) : os_(file, std::ios::binary) {
        if (!os_) throw std::runtime_error("cannot write " + file.string());
        os_ << "# config_digest: " << digest << '\n' << header << '\n';
    }

    template <typename... T>
    void row(const T&... v) {
        std::string line;
        ((line += num(v), line += ','), ...);
        line.back() = '\n';
        os_ << line;
    }

private:
    std::ofstream os_;
};

std::vector<std::vector<std::string>> read_csv(const fs::path& file) {
    std::ifstream in(file);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

double realized_variance(const PathSet& ps, std::size_t p) {
    double s = 0.0;
    for (std::size_t t = 0; t < ps.n_steps(); ++t) {
        const double r = std::log(ps.spot(p, t + 1) / ps.spot(p, t));
        s += r * r;
    }
    return s / ps.horizon();
}

double weighted_mean(std::span<const double> x, std::span<const double> w) {
    double s = 0.0, ws = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double wk = w.empty() ? 1.0 : w[k];
        s += wk * x[k];
        ws += wk;
    }
    return s / ws;
}

// Path indices sorted by weight, ties by index.
std::vector<std::size_t> weight_order(std::span<const double> q) {
    std::vector<std::size_t> o(q.size());
    std::iota(o.begin(), o.end(), std::size_t{0});
    std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) { return q[a] < q[b]; });
    return o;
}

double median(std::vector<double> v) {
    const std::size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2), v.end());
    const double hi = v[n / 2];
    if (n % 2) return hi;
    return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2)));
}

Check make_check(std::string name, double value, double tolerance, bool pass, std::string detail = {}) {
    return {std::move(name), value, tolerance, pass, std::move(detail)};
}

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + file.string());
    os << text;
}

const std::vector<std::string>& stage_order() {
    static const std::vector<std::string> s{"simulate", "train-arb", "reweight", "verify", "hedge", "price"};
    return s;
}

}  // namespace

bool decreasing_trend(const std::vector<double>& values, std::size_t window, double slack) {
    const std::size_t n = values.size();
    if (n < 2) return true;
    const std::size_t half = window / 2;
    std::vector<double> smooth(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t lo = k >= half ? k - half : 0, hi = std::min(n - 1, k + half);
        double s = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) s += values[j];
        smooth[k] = s / static_cast<double>(hi - lo + 1);
    }
    for (std::size_t k = 1; k < n; ++k)
        if (smooth[k] > smooth[k - 1] + slack * std::abs(values[0])) return false;
    return true;
}

Pipeline::Pipeline(ExperimentConfig cfg) : cfg_(std::move(cfg)) {}

void Pipeline::simulate() {
    fs::create_directories(out());
    write_text(out() / "config.json", json{{"config_digest", cfg_.digest}, {"config", cfg_.raw}}.dump(2) + "\n");
    const auto& w = cfg_.world;
    std::size_t rejected_train = 0, rejected_valid = 0;
    base_train_.clear();
    base_valid_.clear();
    if (w.type == "binomial") {
        auto tree = binomial_tree(w.binomial);
        train_ = tree.paths;
        valid_ = tree.paths;
        base_train_ = base_valid_ = tree.weights;
        write_f64(out() / "base_weights_train.bin", base_train_);
        write_f64(out() / "base_weights_valid.bin", base_valid_);
    } else if (w.type == "bs" || w.type == "bs_options") {
        BSParams p = w.bs;
        const bool options = w.type == "bs_options";
        p.n_paths = w.n_train;
        p.seed = derive_seed(cfg_.seed, kTrainTag);
        train_ = options ? simulate_bs_with_options(p) : simulate_bs(p);
        p.n_paths = w.n_valid;
        p.seed = derive_seed(cfg_.seed, kValidTag);
        valid_ = options ? simulate_bs_with_options(p) : simulate_bs(p);
    } else {
        const auto params = paper_like_var_fixture();
        auto tr = simulate_var(params, w.n_train, w.var_steps, derive_seed(cfg_.seed, kTrainTag));
        rejected_train = tr.rejected_paths;
        train_ = std::move(tr.paths);
        auto va = simulate_var(params, w.n_valid, w.var_steps, derive_seed(cfg_.seed, kValidTag));
        rejected_valid = va.rejected_paths;
        valid_ = std::move(va.paths);
    }
    for (const auto& name : {"base_weights_train.bin", "base_weights_valid.bin"})
        if (base_train_.empty()) fs::remove(out() / name);
    save_pathset(*train_, out() / "train", cfg_.digest);
    save_pathset(*valid_, out() / "valid", cfg_.digest);
    Csv sim(out() / "simulate.csv", cfg_.digest, "set,n_paths,n_steps,n_instruments,rejected_paths");
    sim.row("train", train_->n_paths(), train_->n_steps(), train_->n_instruments(), rejected_train);
    sim.row("valid", valid_->n_paths(), valid_->n_steps(), valid_->n_instruments(), rejected_valid);
    ensure_paths();
    record("simulate", {});
}

void Pipeline::ensure_paths() {
    if (!train_ || !valid_) {
        const auto cfg_file = out() / "config.json";
        if (!fs::exists(cfg_file)) throw InputError("no simulated paths in " + out().string() + " (run `simulate` first)");
        std::ifstream in(cfg_file);
        const auto meta = json::parse(in);
        if (meta.value("config_digest", std::string{}) != cfg_.digest)
            throw InputError("artifacts in " + out().string() + " come from a different config (digest mismatch)");
        train_ = load_pathset(out() / "train");
        valid_ = load_pathset(out() / "valid");
        if (fs::exists(out() / "base_weights_train.bin")) {
            base_train_ = read_f64(out() / "base_weights_train.bin");
            base_valid_ = read_f64(out() / "base_weights_valid.bin");
        }
    }
    if (cost_.n_steps() == 0) {
        cost_ = make_cost(cfg_.cost, *train_);
        cost_prime_ = make_cost(cfg_.cost, *valid_, cfg_.verification.cost_factor);
    }
    if (cfg_.world.type == "bs" && density_ref_.empty()) {
        const auto& b = cfg_.world.bs;
        density_ref_.resize(valid_->n_paths());
        for (std::size_t p = 0; p < valid_->n_paths(); ++p)
            density_ref_[p] = bs_memm_density(valid_->spot(p, valid_->n_steps()) / valid_->spot(p, 0), b.mu,
                                              b.sigma_realized, valid_->horizon());
    }
}

void Pipeline::ensure_policy() {
    if (policy_) return;
    const auto file = out() / "policy.ckpt";
    if (!fs::exists(file)) throw InputError("no policy checkpoint in " + out().string() + " (run `train-arb` first)");
    auto ck = load_checkpoint(file);
    if (ck.config_digest != cfg_.digest) throw InputError(file.string() + " comes from a different config");
    policy_ = std::move(ck.net);
}

void Pipeline::ensure_weights() {
    if (!q_valid_.empty()) return;
    const auto file = out() / "weights.bin";
    if (!fs::exists(file)) throw InputError("no measure weights in " + out().string() + " (run `reweight` first)");
    std::ifstream in(out() / "weights.json");
    const auto meta = json::parse(in);
    if (meta.value("config_digest", std::string{}) != cfg_.digest)
        throw InputError("weights.bin comes from a different config");
    q_valid_ = read_f64(file);
    q_train_ = read_f64(out() / "weights_train.bin");
}

std::vector<double> Pipeline::measure_gains(const PolicyNet& net, const PathSet& paths) const {
    auto g = evaluate_gains(net, paths, cost_);
    for (auto& v : g) v *= cfg_.training.train.lambda;
    return g;
}

MetricsRow Pipeline::evaluate_metrics(std::size_t step, const PolicyNet& net) const {
    const PathSet& va = *valid_;
    const auto m = measure_weights(measure_gains(net, va), cfg_.digest, base_valid_);
    const std::size_t n = va.n_paths();
    MetricsRow r;
    r.step = step;
    r.rel_entropy = relative_entropy(m.q, base_valid_);
    r.density_mse = std::nan("");
    const auto& type = cfg_.world.type;
    if (type == "bs") {
        double s = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            const double e = m.q[p] * static_cast<double>(n) - density_ref_[p];
            s += e * e;
        }
        r.density_mse = s / static_cast<double>(n);
    } else if (type == "binomial") {
        const auto orc = binomial_oracle(cfg_.world.binomial, cfg_.training.train.lambda);
        const double ref[2] = {orc.q_up, orc.q_down};
        double s = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            const double e = (m.q[p] - ref[p]) / base_valid_[p];
            s += base_valid_[p] * e * e;
        }
        r.density_mse = s;
    }
    if (type == "bs" || type == "bs_options") {
        const double sigma = type == "bs" ? cfg_.world.bs.sigma_realized : *cfg_.world.bs.sigma_implied;
        const auto& strikes = bs_reference_strikes();
        double s = 0.0;
        for (double k : strikes) {
            double price = 0.0;
            for (std::size_t p = 0; p < n; ++p)
                price += m.q[p] * std::max(va.spot(p, va.n_steps()) / va.spot(p, 0) - k, 0.0);
            const double e = price - bs_call_relative(k, sigma, va.horizon());
            s += e * e;
        }
        r.option_mse = s / static_cast<double>(strikes.size());
    } else {
        // Squared distance of the reweighted terminal mark from the bid/ask
        // band around the mid, averaged over option instruments (every
        // instrument in the binomial world).
        double s = 0.0;
        std::size_t cells = 0;
        for (std::size_t t = 0; t < va.n_steps(); ++t)
            for (std::size_t i = 0; i < va.n_instruments(); ++i) {
                if (type != "binomial" && va.instruments(t)[i].persistent()) continue;
                double d = 0.0;
                for (std::size_t p = 0; p < n; ++p) d += m.q[p] * (va.mark(p, t, i) - va.mid(p, t, i));
                const double e = std::max({0.0, d - cost_.gamma_up(t)[i], -cost_.gamma_dn(t)[i] - d});
                s += e * e;
                ++cells;
            }
        r.option_mse = cells ? s / static_cast<double>(cells) : std::nan("");
    }
    return r;
}

void Pipeline::train_arb() {
    ensure_paths();
    std::vector<Check> checks;
    const auto& type = cfg_.world.type;
    std::optional<BinomialOracle> orc;
    if (type == "binomial") {
        orc = binomial_oracle(cfg_.world.binomial, cfg_.training.train.lambda);
        if (orc->classical_arbitrage)
            throw InputError("binomial parameters admit classical arbitrage: the statarb value is unbounded");
    }
    metrics_.clear();
    const auto res = train_statarb(*train_, *valid_, cost_, cfg_.training, base_train_, base_valid_,
                                   [&](std::size_t step, const PolicyNet& net) { metrics_.push_back(evaluate_metrics(step, net)); });
    policy_ = res.net;
    q_valid_.clear();
    q_train_.clear();
    save_checkpoint(out() / "policy.ckpt", res.net, {}, cfg_.digest);
    {
        Csv m(out() / "metrics.csv", cfg_.digest, kMetricsHeader);
        for (const auto& r : metrics_) m.row(r.step, r.density_mse, r.rel_entropy, r.option_mse);
    }
    {
        Csv t(out() / "train.csv", cfg_.digest, "steps,epochs,underflow,final_loss,g_train,g_valid,g_valid_se");
        t.row(res.stats.steps, res.stats.epoch_loss.size(), res.stats.underflow,
              res.stats.epoch_loss.empty() ? std::nan("") : res.stats.epoch_loss.back(), res.g_train, res.g_valid,
              res.g_valid_se);
    }
    checks.push_back(make_check("underflow", static_cast<double>(res.stats.underflow), 0.0, res.stats.underflow == 0,
                                "loss terms more than 60 below the batch maximum"));
    if (orc) {
        const double a = res.net.forward(*valid_)(0, 0, 0);
        const double tol = cfg_.tolerances.a_star;
        checks.push_back(make_check("binomial_a_star", std::abs(a - orc->a_star), tol, std::abs(a - orc->a_star) <= tol,
                                    "trained " + num(a) + " vs closed form " + num(orc->a_star)));
        const double dg = std::abs(res.g_valid - orc->g);
        checks.push_back(make_check("binomial_g", dg, cfg_.tolerances.g, dg <= cfg_.tolerances.g,
                                    "trained " + num(res.g_valid) + " vs closed form " + num(orc->g)));
    }
    if (type == "bs" && !metrics_.empty()) {
        std::vector<double> d;
        for (const auto& r : metrics_) d.push_back(r.density_mse);
        const double ratio = d.back() / d.front();
        checks.push_back(make_check("density_mse_ratio", ratio, cfg_.tolerances.density_ratio,
                                    ratio <= cfg_.tolerances.density_ratio,
                                    "final " + num(d.back()) + " / initial " + num(d.front())));
        const bool trend = decreasing_trend(d, 5, 0.01);
        checks.push_back(make_check("density_mse_trend", trend ? 0.0 : 1.0, 0.0, trend,
                                    "moving average (width 5) never rises by more than 1% of the initial MSE"));
    }
    record("train-arb", std::move(checks));
}

void Pipeline::reweight() {
    ensure_paths();
    ensure_policy();
    const auto mt = measure_weights(measure_gains(*policy_, *train_), cfg_.digest, base_train_);
    const auto mv = measure_weights(measure_gains(*policy_, *valid_), cfg_.digest, base_valid_);
    q_train_ = mt.q;
    q_valid_ = mv.q;
    gains_valid_ = evaluate_gains(*policy_, *valid_, cost_);
    write_f64(out() / "weights.bin", q_valid_);
    write_f64(out() / "weights_train.bin", q_train_);
    const double re = relative_entropy(q_valid_, base_valid_);
    write_text(out() / "weights.json",
               json{{"config_digest", cfg_.digest},
                    {"format", "little-endian f64, one weight per validation path, summing to 1"},
                    {"n_paths", q_valid_.size()},
                    {"log_normalizer", mv.log_normalizer},
                    {"ess", mv.ess()},
                    {"relative_entropy", re},
                    {"lambda", cfg_.training.train.lambda},
                    {"train_file", "weights_train.bin"}}
                       .dump(2) + "\n");

    const PathSet& va = *valid_;
    const std::size_t n = va.n_paths();
    std::vector<double> rv(n);
    for (std::size_t p = 0; p < n; ++p) rv[p] = realized_variance(va, p);
    {
        Csv w(out() / "weights.csv", cfg_.digest, "path,q,gain,realized_var");
        for (std::size_t p = 0; p < n; ++p) w.row(p, q_valid_[p], gains_valid_[p], rv[p]);
    }
    {
        const auto& levels = weight_hist_levels();
        const auto qs = weight_quantiles(q_valid_, levels);
        Csv h(out() / "weights_hist.csv", cfg_.digest, kWeightsHistHeader);
        for (std::size_t k = 0; k < levels.size(); ++k) h.row(levels[k], qs[k]);
    }
    const auto order = weight_order(q_valid_);
    const std::size_t group = std::max<std::size_t>(1, n / 1000);
    {
        Csv wp(out() / "weight_paths.csv", cfg_.digest, "group,rank,path,q,t,spot");
        for (std::size_t r = 0; r < group && r < n; ++r)
            for (std::size_t t = 0; t <= va.n_steps(); ++t) wp.row("low", r, order[r], q_valid_[order[r]], t, va.spot(order[r], t));
        for (std::size_t r = 0; r < group && r < n; ++r) {
            const std::size_t p = order[n - 1 - r];
            for (std::size_t t = 0; t <= va.n_steps(); ++t) wp.row("high", r, p, q_valid_[p], t, va.spot(p, t));
        }
    }

    std::vector<Check> checks;
    const auto& type = cfg_.world.type;
    const auto& tol = cfg_.tolerances;
    if (type == "binomial") {
        const auto orc = binomial_oracle(cfg_.world.binomial, cfg_.training.train.lambda);
        const double err = std::max(std::abs(q_valid_[0] - orc.q_up), std::abs(q_valid_[1] - orc.q_down));
        checks.push_back(make_check("binomial_weights", err, tol.weights, err <= tol.weights,
                                    "q_up " + num(q_valid_[0]) + " vs closed form " + num(orc.q_up)));
    } else if (type == "bs") {
        const auto& b = cfg_.world.bs;
        const double target = b.mu * b.mu * va.horizon() / (2.0 * b.sigma_realized * b.sigma_realized);
        const double rel = std::abs(re - target) / target;
        checks.push_back(make_check("relative_entropy", rel, tol.rel_entropy, rel <= tol.rel_entropy,
                                    "estimate " + num(re) + " vs " + num(target)));
        const double z = cfg_.verification.confidence;
        std::vector<double> payoff(n);
        double worst = 0.0;
        std::string detail;
        for (double k : bs_reference_strikes()) {
            for (std::size_t p = 0; p < n; ++p) payoff[p] = std::max(va.spot(p, va.n_steps()) / va.spot(p, 0) - k, 0.0);
            const double price = weighted_mean(payoff, q_valid_);
            const double se = bootstrap_se(payoff, q_valid_, weighted_mean, cfg_.training.bootstrap);
            const double ref = bs_call_relative(k, b.sigma_realized, va.horizon());
            const double score = std::abs(price - ref) / std::max(se, 1e-300);
            if (score > worst) {
                worst = score;
                detail = "worst strike " + num(k) + ": " + num(price) + " vs " + num(ref) + " (se " + num(se) + ")";
            }
        }
        checks.push_back(make_check("call_prices_within_se", worst, z, worst <= z, detail));
    } else if (type == "bs_options") {
        const double ep = weighted_mean(rv, {});
        const double eq = weighted_mean(rv, q_valid_);
        const double implied = *cfg_.world.bs.sigma_implied;
        const double closure = (eq - ep) / (implied * implied - ep);
        checks.push_back(make_check("variance_gap_closure", closure, tol.variance_gap, closure >= tol.variance_gap,
                                    "E_P " + num(ep) + ", E_Q " + num(eq) + ", implied " + num(implied * implied)));
        const double med = median(rv);
        std::vector<double> low, high;
        for (std::size_t r = 0; r < group; ++r) {
            low.push_back(rv[order[r]]);
            high.push_back(rv[order[n - 1 - r]]);
        }
        const double low_med = median(low), high_med = median(high);
        auto share = [&](const std::vector<double>& v, bool below) {
            return static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) { return below ? x < med : x > med; })) /
                   static_cast<double>(v.size());
        };
        checks.push_back(make_check("low_weight_paths_low_vol", low_med, med, low_med < med,
                                    num(share(low, true)) + " of the lowest-weight group below the median"));
        checks.push_back(make_check("high_weight_paths_high_vol", high_med, med, high_med > med,
                                    num(share(high, false)) + " of the highest-weight group above the median"));
    }
    record("reweight", std::move(checks));
}

void Pipeline::verify() {
    ensure_paths();
    ensure_policy();
    ensure_weights();
    if (gains_valid_.empty()) gains_valid_ = evaluate_gains(*policy_, *valid_, cost_);
    const auto& v = cfg_.verification;
    VerifyConfig vc;
    vc.confidence = v.confidence;
    vc.min_ess = v.min_ess;
    vc.retrain = v.retrain;
    vc.retrain_config = cfg_.training;
    if (v.retrain_epochs > 0) vc.retrain_config.train.epochs = v.retrain_epochs;
    vc.exact = cfg_.world.type == "binomial";
    vc.exact_tol = cfg_.tolerances.weights;
    vc.g_floor = cfg_.tolerances.g;
    const auto rep = verify_no_statarb(*valid_, q_valid_, cost_prime_, vc, &*train_, q_train_, &cost_);
    {
        Csv b(out() / "band.csv", cfg_.digest, kBandHeader);
        for (const auto& c : rep.cells)
            b.row(c.t, c.instrument, c.drift, c.band_lo, c.band_hi, c.se, c.violation, c.id, c.drift_p,
                  c.conditional_excess, c.pass);
    }
    {
        Csv g(out() / "gains.csv", cfg_.digest, "path,gain,q,retrain_gain");
        for (std::size_t p = 0; p < gains_valid_.size(); ++p)
            g.row(p, gains_valid_[p], q_valid_[p], rep.retrain_gains.empty() ? std::nan("") : rep.retrain_gains[p]);
    }

    std::vector<double> lambdas = v.lambdas;
    std::sort(lambdas.begin(), lambdas.end());
    std::vector<LadderPoint> ladder;
    if (!cost_.has_constraint()) {
        const double lt = cfg_.training.train.lambda;
        std::vector<std::vector<double>> cands{gains_valid_};
        for (double l : lambdas)
            if (l > 0.0 && std::isfinite(l) && l != lt) cands.push_back(evaluate_gains(policy_->scaled(lt / l), *valid_, cost_));
        ladder = g_lambda_ladder_from_gains(cands, lambdas, base_valid_, cfg_.training.bootstrap);
    } else {
        ladder = g_lambda_ladder(*train_, *valid_, cost_, lambdas, cfg_.training, base_train_, base_valid_);
    }
    double rise = 0.0;
    {
        Csv l(out() / "ladder.csv", cfg_.digest, "lambda,g,se");
        for (std::size_t k = 0; k < ladder.size(); ++k) {
            l.row(ladder[k].lambda, ladder[k].g, ladder[k].se);
            if (k > 0) rise = std::max(rise, ladder[k].g - ladder[k - 1].g);
        }
    }

    std::vector<Check> checks;
    checks.push_back(make_check("band", static_cast<double>(rep.band_failures), 0.0, rep.band_pass(),
                                num(rep.cells.size()) + " cells; " + num(rep.conditional_flags) +
                                    " flagged by the conditional regression (diagnostic)"));
    if (!vc.exact)
        checks.push_back(make_check("effective_sample_size", rep.ess, v.min_ess, !rep.unreliable,
                                    rep.unreliable ? "band test unreliable" : ""));
    if (rep.retrained)
        checks.push_back(make_check("retrained_statarb", rep.retrain_g, rep.retrain_tol, rep.retrain_pass,
                                    "raw utility " + num(rep.retrain_raw) + ", se " + num(rep.retrain_se)));
    checks.push_back(make_check("ladder_monotone", rise, 0.0, rise <= 0.0, "g_lambda non-increasing in lambda"));
    record("verify", std::move(checks));
}

void Pipeline::hedge() {
    if (!cfg_.hedge) throw InputError("config has no hedge section");
    ensure_paths();
    ensure_policy();
    ensure_weights();
    const auto& h = *cfg_.hedge;
    HedgeConfig hc{cfg_.training};
    const double lambda = h.lambda;
    HedgeStudy s;
    s.lambda = lambda;
    s.zero_cost = cost_.is_zero() && !cost_.has_constraint();
    s.under_p = deep_hedge(h.payoff, *train_, *valid_, cost_, lambda, hc, base_train_, base_valid_);
    s.under_q = deep_hedge(h.payoff, *train_, *valid_, cost_, lambda, hc, q_train_, q_valid_);
    save_checkpoint(out() / "hedge_P.ckpt", s.under_p.net, {}, cfg_.digest);
    save_checkpoint(out() / "hedge_Q.ckpt", s.under_q.net, {}, cfg_.digest);
    {
        Csv c(out() / "hedge.csv", cfg_.digest, "measure,lambda,g,g_raw,se");
        c.row("P", lambda, s.under_p.g, s.under_p.g_raw, s.under_p.g_se);
        c.row("Q*", lambda, s.under_q.g, s.under_q.g_raw, s.under_q.g_se);
    }
    std::vector<Check> checks;
    if (!cost_.has_constraint()) {
        s.statarb.net = *policy_;
        s.statarb_lambda = policy_->scaled(cfg_.training.train.lambda / lambda);
        const auto g_star = evaluate_gains(s.statarb_lambda, *valid_, cost_);
        s.g_lambda = entropy_utility(g_star, lambda, base_valid_);
        s.g_lambda_se = utility_se(g_star, lambda, base_valid_, cfg_.training.bootstrap);
        s.q_valid.q = q_valid_;
        s.z_valid = h.payoff.evaluate(*valid_);
        const double z = cfg_.verification.confidence;
        const auto dh1 = check_prop_dh1(s, z);
        Csv c(out() / "hedge_consistency.csv", cfg_.digest, "check,lhs,rhs,se,pass");
        c.row(dh1.equality_expected ? "dh1_equality" : "dh1_inequality", dh1.lhs, dh1.rhs, dh1.se, dh1.pass);
        checks.push_back(make_check(dh1.equality_expected ? "hedge_q_equals_p_minus_statarb" : "hedge_q_at_most_p_minus_statarb",
                                    dh1.lhs - dh1.rhs, z * dh1.se, dh1.pass,
                                    "g*(Z) " + num(dh1.lhs) + ", g(Z) - g " + num(dh1.rhs)));
        if (s.zero_cost) {
            const auto dh2 = check_corollary_dh2(s, *valid_, cost_, z, cfg_.training.bootstrap);
            c.row("dh2", dh2.u_composed, dh2.u_direct, dh2.se, dh2.pass);
            checks.push_back(make_check("hedge_decomposition", dh2.u_composed - dh2.u_direct, z * dh2.se, dh2.pass,
                                        "U*(Z + G(a' - a*)) " + num(dh2.u_composed) + " vs U*(Z + G(a'')) " +
                                            num(dh2.u_direct)));
        }
    }
    record("hedge", std::move(checks));
}

void Pipeline::price() {
    if (!cfg_.hedge || !cfg_.hedge->price) throw InputError("config has no hedge.price payoff");
    ensure_paths();
    const auto& h = *cfg_.hedge;
    std::span<const double> wt = base_train_, wv = base_valid_;
    if (h.measure == "Q*") {
        ensure_weights();
        wt = q_train_;
        wv = q_valid_;
    }
    const auto ip = indifference_price(*h.price, h.payoff, *train_, *valid_, cost_, h.lambda, HedgeConfig{cfg_.training}, wt, wv);
    Csv c(out() / "price.csv", cfg_.digest, "measure,lambda,price,g_z,g_z_minus_x,se");
    c.row(h.measure, h.lambda, ip.price, ip.g_z, ip.g_z_minus_x, ip.se);
    record("price", {});
}

void Pipeline::record(const std::string& stage, std::vector<Check> checks) {
    fs::create_directories(out() / "checks");
    Csv c(out() / "checks" / (stage + ".csv"), cfg_.digest, "name,value,tolerance,pass,detail");
    for (auto& ch : checks) {
        std::string detail = ch.detail;
        std::replace(detail.begin(), detail.end(), ',', ';');
        c.row(ch.name, ch.value, ch.tolerance, ch.pass, detail);
        checks_.push_back(std::move(ch));
    }
}

bool Pipeline::summarize() {
    std::ostringstream os;
    os << "# config_digest: " << cfg_.digest << '\n';
    os << "world: " << cfg_.world.type << '\n';
    bool pass = true;
    std::size_t n = 0;
    for (const auto& stage : stage_order()) {
        const auto file = out() / "checks" / (stage + ".csv");
        if (!fs::exists(file)) continue;
        os << "stage " << stage << '\n';
        for (const auto& row : read_csv(file)) {
            if (row.size() < 4) continue;
            const bool ok = row[3] == "1";
            pass = pass && ok;
            ++n;
            os << "  " << std::left << std::setw(34) << row[0] << (ok ? "PASS" : "FAIL") << "  value " << row[1]
               << "  tolerance " << row[2];
            if (row.size() > 4 && !row[4].empty()) os << "  (" << row[4] << ')';
            os << '\n';
        }
    }
    if (fs::exists(out() / "FAILED")) pass = false;
    os << "checks: " << n << '\n' << (pass ? "PASS" : "FAIL") << '\n';
    write_text(out() / "summary.txt", os.str());
    return pass;
}

ExportReport metrics_export(const fs::path& dir, const std::string& config_digest) {
    ExportReport rep;
    fs::create_directories(dir);
    const std::pair<const char*, const char*> files[] = {
        {"metrics.csv", kMetricsHeader}, {"band.csv", kBandHeader}, {"weights_hist.csv", kWeightsHistHeader}};
    for (const auto& [name, header] : files) {
        if (fs::exists(dir / name)) continue;
        Csv(dir / name, config_digest, header);
        rep.missing.push_back(name);
    }
    return rep;
}

int run_stage(const ExperimentConfig& cfg, const std::string& stage) {
    set_thread_count(cfg.threads);
    std::vector<std::string> stages;
    if (stage == "run") {
        stages = {"simulate", "train-arb", "reweight", "verify"};
        if (cfg.hedge) stages.push_back("hedge");
        if (cfg.hedge && cfg.hedge->price) stages.push_back("price");
    } else if (std::find(stage_order().begin(), stage_order().end(), stage) != stage_order().end()) {
        stages = {stage};
    } else {
        throw std::invalid_argument("unknown stage '" + stage + "'");
    }
    Pipeline pipe(cfg);
    fs::create_directories(cfg.output);
    fs::remove(cfg.output / "FAILED");
    if (stage == "run" || stage == "simulate") fs::remove_all(cfg.output / "checks");
    std::string current;
    try {
        for (const auto& s : stages) {
            current = s;
            if (s == "simulate") pipe.simulate();
            else if (s == "train-arb") pipe.train_arb();
            else if (s == "reweight") pipe.reweight();
            else if (s == "verify") pipe.verify();
            else if (s == "hedge") pipe.hedge();
            else if (s == "price") pipe.price();
        }
    } catch (const std::exception& e) {
        write_text(cfg.output / "FAILED", "stage " + current + ": " + e.what() + "\n");
        metrics_export(cfg.output, cfg.digest);
        pipe.summarize();
        if (dynamic_cast<const std::invalid_argument*>(&e)) return static_cast<int>(ExitCode::input);
        return static_cast<int>(ExitCode::tolerance);
    }
    return pipe.summarize() ? static_cast<int>(ExitCode::pass) : static_cast<int>(ExitCode::tolerance);
}

}  // namespace dhrn
