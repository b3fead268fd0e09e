#include "dhrn/config.hpp"

#include <fstream>
#include <set>

#include "dhrn/digest.hpp"

namespace dhrn {

using nlohmann::json;

namespace {

// Reads typed fields from one object, tracking which keys were consumed.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        return read<T>(key);
    }

    template <typename T>
    std::optional<T> opt(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return std::nullopt;
        return read<T>(key);
    }

    template <typename T>
    T req(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(where(key) + " is required");
        return read<T>(key);
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    const json& raw(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(where(key) + " is required");
        return j_.at(key);
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown key " + where(it.key()));
    }

    std::string where(const std::string& key = {}) const {
        if (key.empty()) return path_.empty() ? "<root>" : path_;
        return path_.empty() ? key : path_ + "." + key;
    }

private:
    template <typename T>
    T read(const std::string& key) const {
        try {
            if constexpr (std::is_same_v<T, double>) {
                const auto& v = j_.at(key);
                if (v.is_string()) {
                    const auto s = v.get<std::string>();
                    if (s == "inf") return kInf;
                    throw ConfigError(where(key) + ": expected a number, got '" + s + "'");
                }
                if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
                return v.get<double>();
            } else if constexpr (std::is_same_v<T, std::uint64_t> || std::is_same_v<T, std::size_t> || std::is_same_v<T, int>) {
                const auto& v = j_.at(key);
                if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
                    throw ConfigError(where(key) + ": expected a nonnegative integer");
                return v.get<T>();
            } else {
                return j_.at(key).get<T>();
            }
        } catch (const json::exception& e) {
            throw ConfigError(where(key) + ": " + e.what());
        }
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

std::vector<double> number_list(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + " must be an array");
    std::vector<double> out;
    for (const auto& v : j) {
        if (v.is_string() && v.get<std::string>() == "inf")
            out.push_back(kInf);
        else if (v.is_number())
            out.push_back(v.get<double>());
        else
            throw ConfigError(where + ": entries must be numbers or \"inf\"");
    }
    return out;
}

PortfolioPayoff parse_payoff(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + " must be an array of payoff terms");
    PortfolioPayoff out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        Section s(j[k], where + "[" + std::to_string(k) + "]");
        PayoffTerm t;
        try {
            t.kind = payoff_kind_from_string(s.req<std::string>("kind"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(s.where("kind") + ": " + e.what());
        }
        t.coefficient = s.get<double>("coefficient", 1.0);
        t.strike = s.get<double>("strike", 1.0);
        s.finish();
        out.terms.push_back(t);
    }
    return out;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig c;
    c.raw = doc;
    Section root(doc, "");
    c.seed = root.get<std::uint64_t>("seed", 1);
    c.output = root.get<std::string>("output", "out");
    c.threads = root.get<std::size_t>("threads", 1);
    if (c.threads == 0) throw ConfigError("threads must be >= 1");

    {
        Section w(root.raw("world"), "world");
        auto& wc = c.world;
        wc.type = w.req<std::string>("type");
        if (wc.type == "binomial") {
            wc.binomial.u = w.req<double>("u");
            wc.binomial.d = w.req<double>("d");
            wc.binomial.p = w.req<double>("p");
            wc.n_train = wc.n_valid = 2;
        } else if (wc.type == "bs" || wc.type == "bs_options") {
            wc.bs.mu = w.get<double>("mu", 0.0);
            wc.bs.sigma_realized = w.req<double>("sigma_realized");
            wc.bs.sigma_implied = w.opt<double>("sigma_implied");
            wc.bs.n_steps = w.get<std::size_t>("n_steps", 30);
            wc.bs.dt = w.get<double>("dt", 1.0 / 252.0);
            wc.bs.option_tenor_steps = w.opt<int>("option_tenor_steps");
            wc.n_train = w.req<std::size_t>("n_train");
            wc.n_valid = w.req<std::size_t>("n_valid");
            if (wc.type == "bs_options" && !wc.bs.sigma_implied) throw ConfigError("world.sigma_implied is required for bs_options");
        } else if (wc.type == "var") {
            const auto fixture = w.get<std::string>("fixture", "paper_like");
            if (fixture != "paper_like") throw ConfigError("world.fixture: only \"paper_like\" is available");
            wc.var_steps = w.get<std::size_t>("n_steps", 30);
            wc.n_train = w.req<std::size_t>("n_train");
            wc.n_valid = w.req<std::size_t>("n_valid");
        } else {
            throw ConfigError("world.type must be one of binomial, bs, bs_options, var (got '" + wc.type + "')");
        }
        if (wc.n_train == 0 || wc.n_valid == 0) throw ConfigError("world.n_train and world.n_valid must be >= 1");
        w.finish();
    }

    if (root.has("cost")) {
        Section s(root.raw("cost"), "cost");
        c.cost.gamma = s.get<double>("gamma", 0.0);
        c.cost.spot_gamma = s.opt<double>("spot_gamma");
        if (s.has("box")) c.cost.box = number_list(s.raw("box"), "cost.box");
        if (s.has("quadratic")) {
            Section q(s.raw("quadratic"), "cost.quadratic");
            QuadraticConstraint qc;
            qc.sigma = number_list(q.raw("sigma"), "cost.quadratic.sigma");
            qc.max_risk = q.req<double>("max_risk");
            q.finish();
            c.cost.quadratic = qc;
        }
        if (c.cost.box && c.cost.quadratic) throw ConfigError("cost: box and quadratic constraints are exclusive");
        if (!(c.cost.gamma >= 0.0) || (c.cost.spot_gamma && !(*c.cost.spot_gamma >= 0.0)))
            throw ConfigError("cost: spreads must be >= 0");
        s.finish();
    }
    if (c.world.type == "binomial") c.world.binomial.gamma = c.cost.gamma;

    {
        static const json empty = json::object();
        Section s(root.has("training") ? root.raw("training") : empty, "training");
        auto& t = c.training;
        try {
            t.shape.arch = architecture_from_string(s.get<std::string>("architecture", "feedforward"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("training.architecture: ") + e.what());
        }
        t.shape.hidden = s.get<std::vector<int>>("hidden", {});
        if (s.has("features")) {
            Section f(s.raw("features"), "training.features");
            t.shape.features.mids = f.get<bool>("mids", false);
            t.shape.features.aux = f.get<bool>("aux", false);
            f.finish();
        }
        t.train.learning_rate = s.get<double>("learning_rate", 2e-5);
        t.train.final_learning_rate = s.opt<double>("final_learning_rate");
        t.train.batch_size = s.get<std::size_t>("batch_size", 256);
        t.train.epochs = s.get<std::size_t>("epochs", 100);
        t.train.lambda = s.get<double>("lambda", 1.0);
        t.train.grad_clip = s.get<double>("grad_clip", 0.0);
        t.train.eval_every = s.get<std::size_t>("eval_every", 100);
        t.bootstrap = s.get<std::size_t>("bootstrap", 200);
        t.train.seed = c.seed;
        t.init_seed = c.seed;
        try {
            t.train.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("training: ") + e.what());
        }
        if (!(t.train.lambda > 0.0)) throw ConfigError("training.lambda must be > 0");
        s.finish();
    }

    if (root.has("verification")) {
        Section s(root.raw("verification"), "verification");
        auto& v = c.verification;
        v.cost_factor = s.get<double>("cost_factor", 2.0);
        if (s.has("lambdas")) v.lambdas = number_list(s.raw("lambdas"), "verification.lambdas");
        v.retrain = s.get<bool>("retrain", true);
        v.retrain_epochs = s.get<std::size_t>("retrain_epochs", 0);
        v.retrain_p = s.get<bool>("retrain_p", false);
        v.confidence = s.get<double>("confidence", 3.0);
        v.min_ess = s.get<double>("min_ess", 100.0);
        if (!(v.cost_factor >= 1.0)) throw ConfigError("verification.cost_factor must be >= 1 (cost' >= cost)");
        for (double l : v.lambdas)
            if (!(l >= 0.0)) throw ConfigError("verification.lambdas must be >= 0");
        s.finish();
    }

    if (root.has("hedge")) {
        Section s(root.raw("hedge"), "hedge");
        HedgeSection h;
        h.payoff = parse_payoff(s.raw("payoff"), "hedge.payoff");
        if (s.has("price")) h.price = parse_payoff(s.raw("price"), "hedge.price");
        h.lambda = s.get<double>("lambda", 1.0);
        h.measure = s.get<std::string>("measure", "Q*");
        if (h.measure != "P" && h.measure != "Q*") throw ConfigError("hedge.measure must be \"P\" or \"Q*\"");
        if (!(h.lambda > 0.0) || std::isinf(h.lambda)) throw ConfigError("hedge.lambda must be finite and > 0");
        s.finish();
        c.hedge = h;
    }

    if (root.has("tolerances")) {
        Section s(root.raw("tolerances"), "tolerances");
        auto& t = c.tolerances;
        t.a_star = s.get<double>("a_star", t.a_star);
        t.g = s.get<double>("g", t.g);
        t.weights = s.get<double>("weights", t.weights);
        t.rel_entropy = s.get<double>("rel_entropy", t.rel_entropy);
        t.density_ratio = s.get<double>("density_ratio", t.density_ratio);
        t.variance_gap = s.get<double>("variance_gap", t.variance_gap);
        s.finish();
    }
    root.finish();

    json canonical = doc;
    canonical.erase("output");
    canonical.erase("threads");
    c.digest = sha256_hex(canonical.dump());
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config " + file.string());
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    return parse_config(doc);
}

ExperimentConfig with_overrides(const ExperimentConfig& cfg, std::optional<std::uint64_t> seed,
                                std::optional<std::filesystem::path> output, std::optional<std::size_t> threads) {
    json doc = cfg.raw;
    if (seed) doc["seed"] = *seed;
    if (output) doc["output"] = output->string();
    if (threads) doc["threads"] = *threads;
    return parse_config(doc);
}

CostSpec make_cost(const CostConfig& c, const PathSet& paths, double factor) {
    const std::size_t m = paths.n_steps(), n = paths.n_instruments();
    std::vector<double> gamma(m * n);
    for (std::size_t t = 0; t < m; ++t)
        for (std::size_t i = 0; i < n; ++i) {
            const bool spot = paths.instruments(t)[i].persistent();
            gamma[t * n + i] = factor * (spot && c.spot_gamma ? *c.spot_gamma : c.gamma);
        }
    Constraint constraint;
    if (c.box) {
        if (c.box->size() != n)
            throw ConfigError("cost.box has " + std::to_string(c.box->size()) + " bounds for " + std::to_string(n) + " instruments");
        constraint = BoxConstraint{*c.box};
    } else if (c.quadratic) {
        if (c.quadratic->sigma.size() != n * n) throw ConfigError("cost.quadratic.sigma must be n x n");
        constraint = *c.quadratic;
    }
    return CostSpec(m, n, gamma, gamma, constraint);
}

}  // namespace dhrn
