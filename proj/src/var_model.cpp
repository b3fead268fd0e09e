#include "dhrn/var_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dhrn/parallel.hpp"
#include "dhrn/rng.hpp"
#include "dhrn/simulators.hpp"

namespace dhrn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

DLVGrid VARParams::grid() const {
    DLVGrid g;
    for (int s : maturities_steps) g.maturities.push_back(step_dt * s);
    g.strikes = strikes;
    return g;
}

double VARParams::spectral_radius() const {
    const auto d = static_cast<Eigen::Index>(dimension());
    const auto p = static_cast<Eigen::Index>(order());
    if (p == 0) return 0.0;
    MatrixXd companion = MatrixXd::Zero(d * p, d * p);
    for (Eigen::Index k = 0; k < p; ++k) companion.block(0, k * d, d, d) = coefficients[k];
    if (p > 1) companion.block(d, 0, d * (p - 1), d * (p - 1)).setIdentity();
    return Eigen::EigenSolver<MatrixXd>(companion, false).eigenvalues().cwiseAbs().maxCoeff();
}

void VARParams::validate() const {
    const auto d = static_cast<Eigen::Index>(dimension());
    if (order() == 0) throw std::invalid_argument("VAR order must be >= 1");
    if (strikes.empty() || maturities_steps.empty()) throw std::invalid_argument("VAR needs a strike and maturity grid");
    for (std::size_t i = 1; i < strikes.size(); ++i)
        if (!(strikes[i] > strikes[i - 1])) throw std::invalid_argument("VAR strikes must be strictly increasing");
    for (std::size_t j = 1; j < maturities_steps.size(); ++j)
        if (!(maturities_steps[j] > maturities_steps[j - 1]))
            throw std::invalid_argument("VAR maturities must be strictly increasing");
    if (maturities_steps.front() < 1) throw std::invalid_argument("VAR maturities must be >= 1 step");
    grid().validate();
    for (const auto& a : coefficients)
        if (a.rows() != d || a.cols() != d) throw std::invalid_argument("VAR coefficient matrices must be d x d");
    if (mean.size() != d) throw std::invalid_argument("VAR mean must have dimension d");
    if (innovation_cov.rows() != d || innovation_cov.cols() != d)
        throw std::invalid_argument("VAR innovation covariance must be d x d");
    if (!innovation_cov.isApprox(innovation_cov.transpose(), 1e-12) &&
        (innovation_cov - innovation_cov.transpose()).cwiseAbs().maxCoeff() > 1e-14)
        throw std::invalid_argument("VAR innovation covariance must be symmetric");
    const double min_eig = Eigen::SelfAdjointEigenSolver<MatrixXd>(innovation_cov, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    if (min_eig < -1e-10 * std::max(1.0, innovation_cov.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("VAR innovation covariance must be positive semidefinite");
    if (initial_lags.rows() != static_cast<Eigen::Index>(order()) || initial_lags.cols() != d)
        throw std::invalid_argument("VAR initial lags must be p x d");
    if (!(step_dt > 0.0)) throw std::invalid_argument("VAR step_dt must be > 0");
}

VARParams fit_var(const MatrixXd& series, std::size_t order, std::vector<double> strikes,
                  std::vector<int> maturities_steps, double step_dt) {
    if (order == 0) throw std::invalid_argument("VAR order must be >= 1");
    const auto d = series.cols();
    const auto p = static_cast<Eigen::Index>(order);
    const auto n_obs = series.rows();
    const Eigen::Index n_reg = d * p + 1;
    const Eigen::Index n_eq = n_obs - p;
    if (static_cast<std::size_t>(d) != 1 + strikes.size() * maturities_steps.size())
        throw std::invalid_argument("series width does not match the strike/maturity grid");
    if (n_eq < n_reg + 1) {
        std::ostringstream os;
        os << "series of length " << n_obs << " is too short for a VAR(" << order << ") in dimension " << d
           << " (need more than " << p + n_reg << " observations)";
        throw std::invalid_argument(os.str());
    }
    MatrixXd x(n_eq, n_reg);
    MatrixXd y = series.bottomRows(n_eq);
    for (Eigen::Index r = 0; r < n_eq; ++r) {
        x(r, 0) = 1.0;
        for (Eigen::Index k = 0; k < p; ++k) x.block(r, 1 + k * d, 1, d) = series.row(r + p - 1 - k);
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < n_reg) {
        std::ostringstream os;
        os << "rank-deficient VAR regressors: rank " << qr.rank() << " of " << n_reg
           << " (constant or collinear series components)";
        throw std::invalid_argument(os.str());
    }
    const MatrixXd beta = qr.solve(y);  // n_reg x d
    const MatrixXd resid = y - x * beta;

    VARParams out;
    out.strikes = std::move(strikes);
    out.maturities_steps = std::move(maturities_steps);
    out.step_dt = step_dt;
    MatrixXd sum_a = MatrixXd::Zero(d, d);
    for (Eigen::Index k = 0; k < p; ++k) {
        out.coefficients.push_back(beta.block(1 + k * d, 0, d, d).transpose());
        sum_a += out.coefficients.back();
    }
    const VectorXd intercept = beta.row(0).transpose();
    const MatrixXd lhs = MatrixXd::Identity(d, d) - sum_a;
    Eigen::FullPivLU<MatrixXd> lu(lhs);
    if (!lu.isInvertible()) throw std::invalid_argument("fitted VAR has a unit root; long-run mean undefined");
    out.mean = lu.solve(intercept);
    // Degrees-of-freedom corrected residual covariance.
    out.innovation_cov = resid.transpose() * resid / static_cast<double>(n_eq - n_reg);
    out.innovation_cov = 0.5 * (out.innovation_cov + out.innovation_cov.transpose()).eval();
    out.initial_lags = series.bottomRows(p);
    return out;
}

namespace {

MatrixXd innovation_factor(const MatrixXd& cov) {
    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    // PSD but singular: pivoted LDL^T, jittering the diagonal if rounding
    // leaves materially negative pivots.
    MatrixXd c = cov;
    for (int attempt = 0; attempt < 2; ++attempt) {
        Eigen::LDLT<MatrixXd> ldlt(c);
        const VectorXd dvec = ldlt.vectorD();
        const double scale = std::max(1e-300, c.diagonal().cwiseAbs().maxCoeff());
        if (ldlt.info() == Eigen::Success && dvec.minCoeff() >= -1e-12 * scale) {
            MatrixXd l = ldlt.matrixL();
            MatrixXd b = l * dvec.cwiseMax(0.0).cwiseSqrt().asDiagonal();
            return ldlt.transpositionsP().transpose() * b;
        }
        c.diagonal().array() += 1e-12;
    }
    throw std::invalid_argument("VAR innovation covariance is not positive semidefinite");
}

struct PathDraw {
    std::vector<double> log_spot;  // total_steps + 1
    MatrixXd states;               // (n_steps + 1) x d, state at each trading step
};

// One VAR path: trading steps 0..n_steps, continued to total_steps for marks.
PathDraw draw_path(const VARParams& params, const MatrixXd& factor, std::size_t n_steps, std::size_t total_steps,
                   Rng& rng) {
    const auto d = static_cast<Eigen::Index>(params.dimension());
    const auto p = params.order();
    std::vector<VectorXd> lags;  // newest first
    for (std::size_t k = 0; k < p; ++k) lags.push_back(params.initial_lags.row(static_cast<Eigen::Index>(p - 1 - k)).transpose());
    PathDraw out;
    out.log_spot.assign(total_steps + 1, 0.0);
    out.states.resize(static_cast<Eigen::Index>(n_steps + 1), d);
    out.states.row(0) = lags.front().transpose();
    VectorXd z(d);
    for (std::size_t t = 1; t <= total_steps; ++t) {
        for (Eigen::Index k = 0; k < d; ++k) z(k) = rng.normal();
        VectorXd y = params.mean + factor * z;
        for (std::size_t k = 0; k < p; ++k) y += params.coefficients[k] * (lags[k] - params.mean);
        out.log_spot[t] = out.log_spot[t - 1] + y(0);
        if (t <= n_steps) out.states.row(static_cast<Eigen::Index>(t)) = y.transpose();
        lags.insert(lags.begin(), std::move(y));
        lags.pop_back();
    }
    return out;
}

}  // namespace

MatrixXd simulate_var_series(const VARParams& params, std::size_t n_obs, std::uint64_t seed) {
    params.validate();
    const MatrixXd factor = innovation_factor(params.innovation_cov);
    Rng rng(seed, 0);
    const auto draw = draw_path(params, factor, n_obs - 1, n_obs - 1, rng);
    return draw.states;
}

VARSimulation simulate_var(const VARParams& params, std::size_t n_paths, std::size_t n_steps, std::uint64_t seed) {
    params.validate();
    if (n_steps == 0 || n_paths == 0) throw std::invalid_argument("simulate_var needs paths and steps");
    const MatrixXd factor = innovation_factor(params.innovation_cov);
    const auto grid = params.grid();
    const std::size_t n_mat = params.maturities_steps.size();
    const std::size_t n_k = params.strikes.size();
    const std::size_t n_cells = n_mat * n_k;
    const std::size_t n = 1 + 2 * n_cells;
    const std::size_t max_mat = static_cast<std::size_t>(params.maturities_steps.back());
    const std::size_t total = n_steps + max_mat;

    PathSet::Data d;
    d.world = "var";
    d.n_paths = n_paths;
    d.n_steps = n_steps;
    d.step_dt = params.step_dt;
    d.seed = seed;
    std::vector<InstrumentSpec> step_inst{InstrumentSpec::spot()};
    for (int kind = 0; kind < 2; ++kind) {
        for (std::size_t j = 0; j < n_mat; ++j) {
            for (std::size_t i = 0; i < n_k; ++i) {
                const auto ik = kind == 0 ? InstrumentKind::call : InstrumentKind::put;
                std::ostringstream id;
                id << to_string(ik) << '_' << params.maturities_steps[j] << '_' << params.strikes[i];
                step_inst.push_back(InstrumentSpec::option(id.str(), ik, params.strikes[i], params.maturities_steps[j]));
            }
        }
    }
    d.instruments.assign(n_steps, step_inst);
    for (std::size_t j = 0; j < n_mat; ++j)
        for (std::size_t i = 0; i < n_k; ++i) {
            std::ostringstream name;
            name << "log_dlv_" << params.maturities_steps[j] << '_' << params.strikes[i];
            d.aux_names.push_back(name.str());
        }
    d.spot.resize(n_paths * (n_steps + 1));
    d.mids.resize(n_paths * n_steps * n);
    d.marks.resize(n_paths * n_steps * n);
    d.aux.resize(n_paths * (n_steps + 1) * n_cells);

    const std::size_t n_blocks = (n_paths + kSimBlock - 1) / kSimBlock;
    std::vector<std::size_t> rejected(n_blocks, 0);
    parallel_for(n_blocks, [&](std::size_t b) {
        Rng rng(seed, b);
        const auto end = std::min(n_paths, (b + 1) * kSimBlock);
        std::vector<double> quotes(n_steps * n_cells);
        for (std::size_t path = b * kSimBlock; path < end; ++path) {
            PathDraw draw;
            for (;;) {
                draw = draw_path(params, factor, n_steps, total, rng);
                bool ok = true;
                for (std::size_t t = 0; t < n_steps && ok; ++t) {
                    DLVSurface surface{grid, std::vector<double>(n_cells)};
                    for (std::size_t c = 0; c < n_cells; ++c) {
                        surface.sigma[c] = std::exp(draw.states(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(1 + c)));
                        if (!std::isfinite(surface.sigma[c])) ok = false;
                    }
                    if (!ok) break;
                    try {
                        const auto calls = calls_from_dlv(surface);
                        for (std::size_t c = 0; c < n_cells; ++c) {
                            if (!std::isfinite(calls.values[c])) ok = false;
                            quotes[t * n_cells + c] = calls.values[c];
                        }
                    } catch (const std::invalid_argument&) {
                        ok = false;
                    }
                }
                for (double ls : draw.log_spot)
                    if (!std::isfinite(ls) || std::abs(ls) > 700.0) ok = false;
                if (ok) break;
                ++rejected[b];
            }
            double* spot = d.spot.data() + path * (n_steps + 1);
            for (std::size_t t = 0; t <= n_steps; ++t) {
                spot[t] = std::exp(draw.log_spot[t]);
                double* aux = d.aux.data() + (path * (n_steps + 1) + t) * n_cells;
                for (std::size_t c = 0; c < n_cells; ++c)
                    aux[c] = draw.states(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(1 + c));
            }
            for (std::size_t t = 0; t < n_steps; ++t) {
                double* mid = d.mids.data() + (path * n_steps + t) * n;
                double* mark = d.marks.data() + (path * n_steps + t) * n;
                mid[0] = spot[t];
                mark[0] = spot[n_steps];
                for (std::size_t j = 0; j < n_mat; ++j) {
                    const auto tau = static_cast<std::size_t>(params.maturities_steps[j]);
                    const double growth = std::exp(draw.log_spot[t + tau] - draw.log_spot[t]);
                    for (std::size_t i = 0; i < n_k; ++i) {
                        const std::size_t c = j * n_k + i;
                        const double x = params.strikes[i];
                        const double call = quotes[t * n_cells + c];
                        mid[1 + c] = call;
                        mark[1 + c] = std::max(growth - x, 0.0);
                        mid[1 + n_cells + c] = call - (1.0 - x);
                        mark[1 + n_cells + c] = std::max(x - growth, 0.0);
                    }
                }
            }
        }
    });
    VARSimulation out{PathSet(std::move(d)), 0};
    for (auto r : rejected) out.rejected_paths += r;
    return out;
}

VARParams paper_like_var_fixture() {
    VARParams v;
    v.strikes = {0.85, 0.90, 0.95, 1.00, 1.05, 1.10, 1.15};
    v.maturities_steps = {20, 40, 60};
    v.step_dt = 1.0 / 252.0;
    const auto n_k = v.strikes.size();
    const auto n_mat = v.maturities_steps.size();
    const auto d = static_cast<Eigen::Index>(v.dimension());

    const double daily_vol = 0.15 * std::sqrt(v.step_dt);
    v.mean = VectorXd::Zero(d);
    v.mean(0) = 0.03 * v.step_dt;
    for (std::size_t j = 0; j < n_mat; ++j)
        for (std::size_t i = 0; i < n_k; ++i) {
            // Downward skew, mildly rising term structure.
            const double vol = 0.19 - 0.30 * (v.strikes[i] - 1.0) + 0.005 * static_cast<double>(j);
            v.mean(static_cast<Eigen::Index>(1 + j * n_k + i)) = std::log(vol);
        }

    MatrixXd a = MatrixXd::Zero(d, d);
    for (Eigen::Index k = 1; k < d; ++k) {
        a(k, k) = 0.90;
        a(k, 0) = -1.5;  // vols rise after a down move
    }
    v.coefficients = {a};

    // Innovations: return, a common vol level factor, a skew factor and
    // idiosyncratic noise.
    MatrixXd loadings = MatrixXd::Zero(d, 3 + d);
    loadings(0, 0) = daily_vol;
    for (std::size_t j = 0; j < n_mat; ++j)
        for (std::size_t i = 0; i < n_k; ++i) {
            const auto k = static_cast<Eigen::Index>(1 + j * n_k + i);
            loadings(k, 0) = -0.4 * 0.02;
            loadings(k, 1) = 0.02 * std::sqrt(1.0 - 0.16) / (1.0 + 0.5 * static_cast<double>(j));
            loadings(k, 2) = 0.01 * (v.strikes[i] - 1.0) / 0.15;
            loadings(k, 3 + k) = 0.004;
        }
    v.innovation_cov = loadings * loadings.transpose();
    v.initial_lags = v.mean.transpose();
    v.initial_lags(0, 0) = 0.0;
    return v;
}

}  // namespace dhrn
