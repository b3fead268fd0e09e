#pragma once
// Batch driver: simulate -> train-arb -> reweight -> verify -> hedge -> price.
//
// Every stage reads its inputs from the artifact directory when they are not
// already in memory, so stages can run one at a time from the CLI. Each CSV
// starts with a `# config_digest: <hex>` line.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dhrn/config.hpp"

namespace dhrn {

/// A required artifact is missing or inconsistent with the config.
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct Check {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string detail;
};

struct MetricsRow {
    std::size_t step = 0;
    double density_mse = 0.0;
    double rel_entropy = 0.0;
    double option_mse = 0.0;
};

inline const std::vector<double>& weight_hist_levels() {
    static const std::vector<double> levels{0.0, 0.001, 0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99, 0.999, 1.0};
    return levels;
}

inline const std::vector<double>& bs_reference_strikes() {
    static const std::vector<double> strikes{0.80, 0.85, 0.90, 0.95, 1.00, 1.05, 1.10, 1.15, 1.20};
    return strikes;
}

/// Smoothed-trend test on a metric series: a centred moving average of the
/// given width must never rise by more than `slack` times the first value.
bool decreasing_trend(const std::vector<double>& values, std::size_t window, double slack);

class Pipeline {
public:
    explicit Pipeline(ExperimentConfig cfg);

    const ExperimentConfig& config() const { return cfg_; }
    const std::filesystem::path& out() const { return cfg_.output; }

    void simulate();
    void train_arb();
    void reweight();
    void verify();
    void hedge();
    void price();

    /// Collects the checks of every stage run so far (including earlier
    /// invocations recorded in checks.csv) and writes summary.txt.
    bool summarize();

    const std::vector<Check>& checks() const { return checks_; }
    const std::vector<MetricsRow>& metrics() const { return metrics_; }

private:
    void ensure_paths();
    void ensure_policy();
    void ensure_weights();
    void record(const std::string& stage, std::vector<Check> checks);
    MetricsRow evaluate_metrics(std::size_t step, const PolicyNet& net) const;
    std::vector<double> measure_gains(const PolicyNet& net, const PathSet& paths) const;

    ExperimentConfig cfg_;
    std::optional<PathSet> train_, valid_;
    CostSpec cost_, cost_prime_;
    std::vector<double> base_train_, base_valid_;
    std::optional<PolicyNet> policy_;
    std::vector<double> q_train_, q_valid_;
    std::vector<double> gains_valid_;
    std::vector<double> density_ref_;  // analytic dQ/dP on validation paths (bs world)
    std::vector<MetricsRow> metrics_;
    std::vector<Check> checks_;
};

enum class ExitCode : int { pass = 0, tolerance = 1, input = 2 };

/// Runs one stage ("simulate", "train-arb", "reweight", "verify", "hedge",
/// "price") or the full pipeline ("run"). Writes a FAILED marker naming the
/// stage when it throws. Returns 0 on pass, 1 on a tolerance failure or a
/// failed stage, 2 on bad input.
int run_stage(const ExperimentConfig& cfg, const std::string& stage);

struct ExportReport {
    std::vector<std::string> missing;  // artifacts replaced by header-only files
};

/// Ensures metrics.csv, band.csv and weights_hist.csv exist in `dir` with their
/// documented schemas, writing header-only files for missing ones.
ExportReport metrics_export(const std::filesystem::path& dir, const std::string& config_digest);

inline constexpr const char* kMetricsHeader = "step,density_mse,rel_entropy,option_mse";
inline constexpr const char* kBandHeader =
    "t,instrument,drift,band_lo,band_hi,se,violation,id,drift_p,conditional_excess,pass";
inline constexpr const char* kWeightsHistHeader = "level,quantile";

}  // namespace dhrn
