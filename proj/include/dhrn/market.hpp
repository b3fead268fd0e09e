#pragma once
// Market data model: instruments, simulated path sets, generalized costs and
// the terminal gains of a trading policy.
//
// Prices are expressed in units of the initial spot (S_0 = 1). Options are
// floating instruments quoted per unit of the spot at the time they are
// traded, so an option bought at step t with relative strike k and tenor tau
// pays (S_{t+tau}/S_t - k)^+.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace dhrn {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class InstrumentKind { spot, call, put };

const char* to_string(InstrumentKind kind);
InstrumentKind instrument_kind_from_string(const std::string& s);

struct InstrumentSpec {
    std::string id;
    InstrumentKind kind{InstrumentKind::spot};
    std::optional<double> relative_strike;   // absent for spot
    std::optional<int> maturity_steps;       // absent for spot

    static InstrumentSpec spot(std::string id = "spot");
    static InstrumentSpec option(std::string id, InstrumentKind kind, double strike, int maturity_steps);

    /// Spot positions persist across steps; options are held to maturity.
    bool persistent() const { return kind == InstrumentKind::spot; }

    /// Throws std::invalid_argument when the spec is inconsistent.
    void validate() const;
};

/// A batch of simulated market paths.
///
/// Layout is path-major: spot is [n_paths][n_steps+1], mids and marks are
/// [n_paths][n_steps][n_instruments], aux is [n_paths][n_steps+1][n_aux].
/// Aux columns carry additional observable state (e.g. log local vols).
class PathSet {
public:
    struct Data {
        std::string world;
        std::size_t n_paths = 0;
        std::size_t n_steps = 0;
        double step_dt = 0.0;
        std::uint64_t seed = 0;
        std::vector<std::vector<InstrumentSpec>> instruments;  // [n_steps][n]
        std::vector<std::string> aux_names;
        std::vector<double> spot;
        std::vector<double> mids;
        std::vector<double> marks;
        std::vector<double> aux;
    };

    PathSet() = default;
    explicit PathSet(Data data);

    const std::string& world() const { return d_.world; }
    std::size_t n_paths() const { return d_.n_paths; }
    std::size_t n_steps() const { return d_.n_steps; }
    std::size_t n_instruments() const { return n_inst_; }
    std::size_t n_aux() const { return d_.aux_names.size(); }
    double step_dt() const { return d_.step_dt; }
    double horizon() const { return d_.step_dt * static_cast<double>(d_.n_steps); }
    std::uint64_t seed() const { return d_.seed; }

    const std::vector<InstrumentSpec>& instruments(std::size_t t) const { return d_.instruments.at(t); }
    const std::vector<std::vector<InstrumentSpec>>& all_instruments() const { return d_.instruments; }
    const std::vector<std::string>& aux_names() const { return d_.aux_names; }

    double spot(std::size_t p, std::size_t t) const { return d_.spot[p * (d_.n_steps + 1) + t]; }
    double mid(std::size_t p, std::size_t t, std::size_t i) const { return d_.mids[(p * d_.n_steps + t) * n_inst_ + i]; }
    double mark(std::size_t p, std::size_t t, std::size_t i) const { return d_.marks[(p * d_.n_steps + t) * n_inst_ + i]; }
    double aux(std::size_t p, std::size_t t, std::size_t k) const { return d_.aux[(p * (d_.n_steps + 1) + t) * n_aux() + k]; }

    std::span<const double> spot_row(std::size_t p) const;

    const Data& data() const { return d_; }

    /// New path set holding the given paths, in the given order.
    PathSet subset(std::span<const std::size_t> paths) const;

private:
    void validate() const;

    Data d_;
    std::size_t n_inst_ = 0;
};

struct BoxConstraint {
    std::vector<double> bound;  // |a^i| <= bound[i]
};

struct QuadraticConstraint {
    std::vector<double> sigma;  // row-major n x n, symmetric PSD
    double max_risk = 0.0;      // a . Sigma a <= max_risk
};

using Constraint = std::variant<std::monostate, BoxConstraint, QuadraticConstraint>;

enum class CostMode { proportional, generalized };

/// Convex cost c_t(a) = gamma_up . a^+ + gamma_dn . a^-, optionally +inf
/// outside a convex admissible set. Spreads are per step and instrument.
class CostSpec {
public:
    CostSpec() = default;
    CostSpec(std::size_t n_steps, std::size_t n_instruments, std::vector<double> gamma_up,
             std::vector<double> gamma_dn, Constraint constraint = {});

    static CostSpec zero(std::size_t n_steps, std::size_t n_instruments);
    static CostSpec flat(std::size_t n_steps, std::size_t n_instruments, double gamma);

    std::size_t n_steps() const { return n_steps_; }
    std::size_t n_instruments() const { return n_inst_; }
    CostMode mode() const { return constraint_.index() == 0 ? CostMode::proportional : CostMode::generalized; }
    const Constraint& constraint() const { return constraint_; }
    bool has_constraint() const { return constraint_.index() != 0; }

    std::span<const double> gamma_up(std::size_t t) const { return {gamma_up_.data() + t * n_inst_, n_inst_}; }
    std::span<const double> gamma_dn(std::size_t t) const { return {gamma_dn_.data() + t * n_inst_, n_inst_}; }

    bool is_zero() const;
    bool admissible(std::span<const double> a) const;

    /// Cost of action a at step t; +inf when inadmissible.
    double operator()(std::span<const double> a, std::size_t t) const;

    /// Same spreads, scaled by factor (infinite entries stay infinite).
    CostSpec scaled(double factor) const;

private:
    std::size_t n_steps_ = 0;
    std::size_t n_inst_ = 0;
    std::vector<double> gamma_up_;
    std::vector<double> gamma_dn_;
    Constraint constraint_;
};

double proportional_cost(std::span<const double> a, std::span<const double> gamma_up,
                         std::span<const double> gamma_dn);

/// Proportional part plus +inf outside the constraint set of cost_spec.
double generalized_cost(std::span<const double> a, const CostSpec& cost_spec, std::size_t t);

/// Holdings traded per path, step and instrument; layout [n_paths][n_steps][n].
struct ActionTensor {
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    std::size_t n_instruments = 0;
    std::vector<double> values;

    ActionTensor() = default;
    ActionTensor(std::size_t paths, std::size_t steps, std::size_t instruments, double fill = 0.0)
        : n_paths(paths), n_steps(steps), n_instruments(instruments), values(paths * steps * instruments, fill) {}

    double& operator()(std::size_t p, std::size_t t, std::size_t i) { return values[(p * n_steps + t) * n_instruments + i]; }
    double operator()(std::size_t p, std::size_t t, std::size_t i) const { return values[(p * n_steps + t) * n_instruments + i]; }
    std::span<const double> step(std::size_t p, std::size_t t) const {
        return {values.data() + (p * n_steps + t) * n_instruments, n_instruments};
    }

    ActionTensor operator-(const ActionTensor& other) const;
    ActionTensor operator+(const ActionTensor& other) const;
    ActionTensor scaled(double factor) const;
};

/// Terminal gains per path: sum_t a_t . (H_T - H_t) - c_t(a_t). A path with
/// any inadmissible action gets -inf.
std::vector<double> gains(const PathSet& paths, const ActionTensor& actions, const CostSpec& cost);

}  // namespace dhrn
