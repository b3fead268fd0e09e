#include "dhrn/market.hpp"

#include <cmath>
#include <stdexcept>

namespace dhrn {

const char* to_string(InstrumentKind kind) {
    switch (kind) {
        case InstrumentKind::spot: return "spot";
        case InstrumentKind::call: return "call";
        case InstrumentKind::put: return "put";
    }
    return "?";
}

InstrumentKind instrument_kind_from_string(const std::string& s) {
    if (s == "spot") return InstrumentKind::spot;
    if (s == "call") return InstrumentKind::call;
    if (s == "put") return InstrumentKind::put;
    throw std::invalid_argument("unknown instrument kind '" + s + "'");
}

InstrumentSpec InstrumentSpec::spot(std::string id) {
    return InstrumentSpec{std::move(id), InstrumentKind::spot, std::nullopt, std::nullopt};
}

InstrumentSpec InstrumentSpec::option(std::string id, InstrumentKind kind, double strike, int maturity_steps) {
    InstrumentSpec s{std::move(id), kind, strike, maturity_steps};
    s.validate();
    return s;
}

void InstrumentSpec::validate() const {
    if (kind == InstrumentKind::spot) {
        if (relative_strike || maturity_steps)
            throw std::invalid_argument("instrument '" + id + "': spot has neither strike nor maturity");
        return;
    }
    if (!relative_strike || !(*relative_strike > 0.0))
        throw std::invalid_argument("instrument '" + id + "': relative strike must be > 0");
    if (!maturity_steps || *maturity_steps < 1)
        throw std::invalid_argument("instrument '" + id + "': maturity must be >= 1 step");
}

PathSet::PathSet(Data data) : d_(std::move(data)) {
    n_inst_ = d_.instruments.empty() ? 0 : d_.instruments.front().size();
    validate();
}

void PathSet::validate() const {
    const auto m = d_.n_steps;
    const auto n = n_inst_;
    const auto k = d_.aux_names.size();
    if (m == 0) throw std::invalid_argument("path set needs at least one step");
    if (!(d_.step_dt > 0.0)) throw std::invalid_argument("path set step_dt must be > 0");
    if (d_.instruments.size() != m) throw std::invalid_argument("path set needs one instrument list per step");
    for (const auto& step : d_.instruments) {
        if (step.size() != n) throw std::invalid_argument("instrument count must be constant across steps");
        for (const auto& s : step) s.validate();
    }
    if (d_.spot.size() != d_.n_paths * (m + 1)) throw std::invalid_argument("spot array has wrong size");
    if (d_.mids.size() != d_.n_paths * m * n) throw std::invalid_argument("mids array has wrong size");
    if (d_.marks.size() != d_.n_paths * m * n) throw std::invalid_argument("marks array has wrong size");
    if (d_.aux.size() != d_.n_paths * (m + 1) * k) throw std::invalid_argument("aux array has wrong size");
    auto finite = [](const std::vector<double>& v, const char* what) {
        for (double x : v)
            if (!std::isfinite(x)) throw std::invalid_argument(std::string("non-finite value in ") + what);
    };
    finite(d_.spot, "spot");
    finite(d_.mids, "mids");
    finite(d_.marks, "marks");
    finite(d_.aux, "aux");
}

std::span<const double> PathSet::spot_row(std::size_t p) const {
    return {d_.spot.data() + p * (d_.n_steps + 1), d_.n_steps + 1};
}

PathSet PathSet::subset(std::span<const std::size_t> paths) const {
    Data out;
    out.world = d_.world;
    out.n_paths = paths.size();
    out.n_steps = d_.n_steps;
    out.step_dt = d_.step_dt;
    out.seed = d_.seed;
    out.instruments = d_.instruments;
    out.aux_names = d_.aux_names;
    const auto m = d_.n_steps;
    const auto n = n_inst_;
    const auto k = n_aux();
    out.spot.reserve(paths.size() * (m + 1));
    out.mids.reserve(paths.size() * m * n);
    out.marks.reserve(paths.size() * m * n);
    out.aux.reserve(paths.size() * (m + 1) * k);
    for (auto p : paths) {
        if (p >= d_.n_paths) throw std::out_of_range("path index out of range");
        out.spot.insert(out.spot.end(), d_.spot.begin() + p * (m + 1), d_.spot.begin() + (p + 1) * (m + 1));
        out.mids.insert(out.mids.end(), d_.mids.begin() + p * m * n, d_.mids.begin() + (p + 1) * m * n);
        out.marks.insert(out.marks.end(), d_.marks.begin() + p * m * n, d_.marks.begin() + (p + 1) * m * n);
        out.aux.insert(out.aux.end(), d_.aux.begin() + p * (m + 1) * k, d_.aux.begin() + (p + 1) * (m + 1) * k);
    }
    return PathSet(std::move(out));
}

CostSpec::CostSpec(std::size_t n_steps, std::size_t n_instruments, std::vector<double> gamma_up,
                   std::vector<double> gamma_dn, Constraint constraint)
    : n_steps_(n_steps), n_inst_(n_instruments), gamma_up_(std::move(gamma_up)), gamma_dn_(std::move(gamma_dn)),
      constraint_(std::move(constraint)) {
    if (gamma_up_.size() != n_steps_ * n_inst_ || gamma_dn_.size() != n_steps_ * n_inst_)
        throw std::invalid_argument("cost spreads must be n_steps x n_instruments");
    for (std::size_t j = 0; j < gamma_up_.size(); ++j) {
        if (!(gamma_up_[j] >= 0.0) || !(gamma_dn_[j] >= 0.0))
            throw std::invalid_argument("cost spreads must be >= 0");
    }
    if (const auto* box = std::get_if<BoxConstraint>(&constraint_)) {
        if (box->bound.size() != n_inst_) throw std::invalid_argument("box constraint needs one bound per instrument");
        for (double b : box->bound)
            if (!(b > 0.0)) throw std::invalid_argument("box bounds must be > 0");
    } else if (const auto* quad = std::get_if<QuadraticConstraint>(&constraint_)) {
        if (quad->sigma.size() != n_inst_ * n_inst_)
            throw std::invalid_argument("quadratic constraint needs an n x n matrix");
        if (!(quad->max_risk > 0.0)) throw std::invalid_argument("quadratic constraint needs max_risk > 0");
    }
}

CostSpec CostSpec::zero(std::size_t n_steps, std::size_t n_instruments) {
    return flat(n_steps, n_instruments, 0.0);
}

CostSpec CostSpec::flat(std::size_t n_steps, std::size_t n_instruments, double gamma) {
    std::vector<double> g(n_steps * n_instruments, gamma);
    return CostSpec(n_steps, n_instruments, g, g);
}

bool CostSpec::is_zero() const {
    if (has_constraint()) return false;
    for (std::size_t j = 0; j < gamma_up_.size(); ++j)
        if (gamma_up_[j] != 0.0 || gamma_dn_[j] != 0.0) return false;
    return true;
}

bool CostSpec::admissible(std::span<const double> a) const {
    if (const auto* box = std::get_if<BoxConstraint>(&constraint_)) {
        for (std::size_t i = 0; i < a.size(); ++i)
            if (std::abs(a[i]) > box->bound[i]) return false;
    } else if (const auto* quad = std::get_if<QuadraticConstraint>(&constraint_)) {
        double risk = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < a.size(); ++j) risk += a[i] * quad->sigma[i * a.size() + j] * a[j];
        // Relative slack so that points constructed on the boundary stay admissible.
        if (risk > quad->max_risk * (1.0 + 1e-12)) return false;
    }
    return true;
}

double CostSpec::operator()(std::span<const double> a, std::size_t t) const {
    return generalized_cost(a, *this, t);
}

CostSpec CostSpec::scaled(double factor) const {
    auto up = gamma_up_;
    auto dn = gamma_dn_;
    for (auto& g : up) g *= factor;
    for (auto& g : dn) g *= factor;
    return CostSpec(n_steps_, n_inst_, std::move(up), std::move(dn), constraint_);
}

double proportional_cost(std::span<const double> a, std::span<const double> gamma_up,
                         std::span<const double> gamma_dn) {
    double c = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > 0.0) {
            if (std::isinf(gamma_up[i])) return kInf;
            c += gamma_up[i] * a[i];
        } else if (a[i] < 0.0) {
            if (std::isinf(gamma_dn[i])) return kInf;
            c -= gamma_dn[i] * a[i];
        }
    }
    return c;
}

double generalized_cost(std::span<const double> a, const CostSpec& cost_spec, std::size_t t) {
    if (a.size() != cost_spec.n_instruments()) throw std::invalid_argument("action size does not match cost spec");
    if (!cost_spec.admissible(a)) return kInf;
    return proportional_cost(a, cost_spec.gamma_up(t), cost_spec.gamma_dn(t));
}

ActionTensor ActionTensor::operator-(const ActionTensor& other) const {
    if (other.values.size() != values.size()) throw std::invalid_argument("action tensor shape mismatch");
    ActionTensor out = *this;
    for (std::size_t j = 0; j < values.size(); ++j) out.values[j] -= other.values[j];
    return out;
}

ActionTensor ActionTensor::operator+(const ActionTensor& other) const {
    if (other.values.size() != values.size()) throw std::invalid_argument("action tensor shape mismatch");
    ActionTensor out = *this;
    for (std::size_t j = 0; j < values.size(); ++j) out.values[j] += other.values[j];
    return out;
}

ActionTensor ActionTensor::scaled(double factor) const {
    ActionTensor out = *this;
    for (auto& v : out.values) v *= factor;
    return out;
}

std::vector<double> gains(const PathSet& paths, const ActionTensor& actions, const CostSpec& cost) {
    const auto n = paths.n_instruments();
    const auto m = paths.n_steps();
    if (actions.n_paths != paths.n_paths() || actions.n_steps != m || actions.n_instruments != n)
        throw std::invalid_argument("action tensor shape does not match path set");
    if (cost.n_steps() != m || cost.n_instruments() != n)
        throw std::invalid_argument("cost spec shape does not match path set");
    std::vector<double> g(paths.n_paths(), 0.0);
    for (std::size_t p = 0; p < paths.n_paths(); ++p) {
        double total = 0.0;
        for (std::size_t t = 0; t < m; ++t) {
            const auto a = actions.step(p, t);
            const double c = cost(a, t);
            if (std::isinf(c)) {
                total = -kInf;
                break;
            }
            double perf = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (a[i] != 0.0) perf += a[i] * (paths.mark(p, t, i) - paths.mid(p, t, i));
            }
            total += perf - c;
        }
        g[p] = total;
    }
    return g;
}

}  // namespace dhrn
