#pragma once

// Experiment orchestration: per-run data preparation with paired seeds, a
// worker pool over runs, MSE and residual statistics, hyperparameter sweeps
// and the measurement-noise study.
//
// Seeds per run (from master_seed):
//   "layers"/run   reservoir seed; every variant of one run shares it
//   "data"/run     initial condition (or "data" alone with fixed data)
//   "noise"/run    measurement noise
// KS runs draw from a pool of q pre-generated trajectories ("ks.condition"/c)
// and pick one per run ("ks.pick"/run).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rolab/config.hpp"
#include "rolab/dynamics.hpp"
#include "rolab/enhance.hpp"
#include "rolab/error.hpp"
#include "rolab/rng.hpp"

namespace rolab {

// ---------------------------------------------------------------------------
// Metrics

/// Mean squared error per column (one sample per row).
inline Vector mse(const DenseMatrix& estimates, const DenseMatrix& targets) {
    if (estimates.rows() != targets.rows() || estimates.cols() != targets.cols())
        throw DimensionError("mse: estimates and targets differ in shape");
    if (estimates.rows() == 0) throw DegenerateInput("mse: empty window");
    return (estimates - targets).array().square().colwise().mean().transpose();
}

struct IntervalStats {
    StepRange interval;
    Vector mav;       // mean |residual| per column
    Vector variance;  // population variance per column
};

/// MAV and population variance of a residual series (rows = time) over each
/// interval; intervals are row ranges of `residuals`.
inline std::vector<IntervalStats> residual_stats(const DenseMatrix& residuals, const std::vector<StepRange>& intervals) {
    std::vector<IntervalStats> out;
    for (const StepRange& iv : intervals) {
        if (iv.size() < 1) throw DegenerateInput("residual_stats: empty interval");
        if (iv.begin < 0 || iv.end > residuals.rows()) throw DimensionError("residual_stats: interval outside the series");
        const auto block = residuals.middleRows(iv.begin, iv.size());
        IntervalStats s;
        s.interval = iv;
        s.mav = block.array().abs().colwise().mean().transpose();
        const Vector mean = block.colwise().mean().transpose();
        s.variance = (block.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
        out.push_back(std::move(s));
    }
    return out;
}

inline double percent_reduction(double mse_variant, double mse_ro) { return (1.0 - mse_variant / mse_ro) * 100.0; }

// ---------------------------------------------------------------------------
// Per-run data

struct RunData {
    std::vector<std::string> input_names;
    std::vector<std::string> target_names;
    std::vector<Eigen::Index> input_cols;  // target column of each input
    bool squared = false;

    DenseMatrix inputs;   // N x n, normalized measured inputs (noisy when noise is on)
    DenseMatrix targets;  // N x m, training targets as measured (noisy when noise is on)
    DenseMatrix truth;    // N x m, noise-free targets for evaluation
    NormalizationStats input_stats;
    Vector target_scale;  // training-span std of the noise-free targets
    std::vector<InputLink> links;

    std::uint64_t data_seed = 0;
    std::uint64_t layer_seed = 0;
    std::uint64_t noise_seed = 0;
    std::uint64_t data_hash = 0;  // FNV-1a of the raw trajectory bytes
};

namespace detail {

inline std::uint64_t hash_bytes(const DenseMatrix& m) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto* p = reinterpret_cast<const unsigned char*>(m.data());
    const std::size_t n = static_cast<std::size_t>(m.size()) * sizeof(double);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline bool squares_targets(const ExperimentConfig& cfg) {
    switch (cfg.square_targets) {
        case SquareTargets::on: return true;
        case SquareTargets::off: return false;
        case SquareTargets::automatic:
            return cfg.system == SystemKind::lorenz && cfg.input_vars.size() == 1 && cfg.input_vars[0] == "z";
    }
    return false;
}

}  // namespace detail

/// KS input grid points: n equally spaced indices.
inline std::vector<std::string> ks_input_names(int grid_points, int n) {
    std::vector<std::string> out;
    for (int j = 0; j < n; ++j) out.push_back("y" + std::to_string(j * grid_points / n));
    return out;
}

/// Pre-generated KS trajectories for the IS_q setting.
struct KsPool {
    std::vector<Trajectory> trajectories;
};

inline KsPool make_ks_pool(const ExperimentConfig& cfg) {
    KsPool pool;
    KsSpec spec = cfg.ks;
    spec.dt = cfg.dt;
    for (int c = 0; c < cfg.ks_conditions; ++c) {
        KsRunOptions o;
        o.seed = substream_seed(substream_seed(cfg.master_seed, "ks.condition"), static_cast<std::uint64_t>(c));
        o.washout_steps = cfg.data_washout;
        pool.trajectories.push_back(simulate_ks(spec, static_cast<std::size_t>(cfg.total_steps()), o));
    }
    return pool;
}

/// Raw trajectory for one run, before noise.
inline Trajectory run_trajectory(const ExperimentConfig& cfg, int run, const KsPool* pool, std::uint64_t& data_seed) {
    if (cfg.system == SystemKind::ks) {
        if (pool == nullptr || pool->trajectories.empty()) throw ConfigError("KS experiments need a trajectory pool");
        Rng pick(substream_seed(substream_seed(cfg.master_seed, "ks.pick"), static_cast<std::uint64_t>(run)));
        const auto c = uniform_index(pick, pool->trajectories.size());
        data_seed = c;
        return pool->trajectories[c];
    }
    data_seed = cfg.regenerate_data
                    ? substream_seed(substream_seed(cfg.master_seed, "data"), static_cast<std::uint64_t>(run))
                    : substream_seed(cfg.master_seed, "data");
    OdeRunOptions o;
    o.seed = data_seed;
    o.washout_steps = cfg.data_washout;
    o.init_half_width = cfg.init_half_width;
    return simulate_ode(cfg.ode, static_cast<std::size_t>(cfg.total_steps()), cfg.dt, o);
}

/// Noise, target squaring and input normalization for one run on a given
/// noise-free trajectory.
inline RunData prepare_from_trajectory(const ExperimentConfig& cfg, const Trajectory& clean, int run) {
    RunData d;
    d.data_hash = detail::hash_bytes(clean.values);
    d.layer_seed = substream_seed(substream_seed(cfg.master_seed, "layers"), static_cast<std::uint64_t>(run));
    d.noise_seed = substream_seed(substream_seed(cfg.master_seed, "noise"), static_cast<std::uint64_t>(run));

    d.target_names = clean.var_names;
    d.input_names = cfg.system == SystemKind::ks && cfg.input_vars.empty()
                        ? ks_input_names(cfg.ks.grid_points, cfg.ks_inputs)
                        : cfg.input_vars;
    for (const auto& name : d.input_names) d.input_cols.push_back(clean.index_of(name));

    const StepRange train{cfg.reservoir_washout, cfg.reservoir_washout + cfg.train_len};
    Trajectory measured = clean;
    if (cfg.noise.eta > 0.0) {
        if (cfg.noise_stage == NoiseStage::raw) {
            measured = add_uniform_noise(clean, cfg.noise, d.noise_seed);
        } else {
            // eta in normalized units: scale the unit-width perturbation per variable
            const NormalizationStats st = normalization_stats(clean.values, train);
            const Trajectory unit = add_uniform_noise(clean, cfg.noise, d.noise_seed);
            measured.values = clean.values + ((unit.values - clean.values).array().rowwise() * st.scale.transpose().array()).matrix();
        }
    }

    d.truth = clean.values;
    d.targets = measured.values;
    d.squared = detail::squares_targets(cfg);
    if (d.squared) {
        for (Eigen::Index c = 0; c < d.truth.cols(); ++c) {
            if (std::find(d.input_cols.begin(), d.input_cols.end(), c) != d.input_cols.end()) continue;
            d.truth.col(c) = d.truth.col(c).array().square();
            d.targets.col(c) = d.targets.col(c).array().square();
            d.target_names[static_cast<std::size_t>(c)] += "^2";
        }
    }

    DenseMatrix raw_inputs(measured.values.rows(), static_cast<Eigen::Index>(d.input_cols.size()));
    for (std::size_t j = 0; j < d.input_cols.size(); ++j)
        raw_inputs.col(static_cast<Eigen::Index>(j)) = measured.values.col(d.input_cols[j]);
    d.input_stats = normalization_stats(raw_inputs, train);
    d.inputs = apply_normalization(raw_inputs, d.input_stats);
    for (std::size_t j = 0; j < d.input_cols.size(); ++j)
        d.links.push_back({d.input_cols[j], d.input_stats.mean[static_cast<Eigen::Index>(j)],
                           d.input_stats.scale[static_cast<Eigen::Index>(j)]});
    d.target_scale = normalization_stats(d.truth, train).scale;
    return d;
}

inline RunData prepare_run(const ExperimentConfig& cfg, int run, const KsPool* pool = nullptr) {
    std::uint64_t data_seed = 0;
    RunData d = prepare_from_trajectory(cfg, run_trajectory(cfg, run, pool, data_seed), run);
    d.data_seed = data_seed;
    return d;
}

inline ObserverConfig observer_config(const ExperimentConfig& cfg, std::uint64_t layer_seed) {
    ObserverConfig oc;
    oc.reservoir = cfg.reservoir;
    oc.reservoir.seed = layer_seed;
    oc.residual = cfg.residual;
    oc.attention = cfg.attention;
    return oc;
}

inline TrainingLayout training_layout(const ExperimentConfig& cfg) { return {cfg.reservoir_washout, cfg.train_len}; }

// ---------------------------------------------------------------------------
// Runs and reports

/// Statistics of the basic module's residuals s - s_hat on the interval the
/// residual module is fitted on, and on the inference window.
struct ResidualSummary {
    StepRange fit_interval;        // absolute steps
    StepRange inference_interval;  // absolute steps
    Vector fit_mav, fit_variance;
    Vector inference_mav, inference_variance;
};

struct VariantResult {
    Variant variant = Variant::RO;
    Vector mse;             // per target, target units
    Vector mse_normalized;  // per target, divided by the training-span target variance
    std::optional<ResidualSummary> residuals;
};

struct RunResult {
    int run = 0;
    std::uint64_t data_seed = 0;
    std::uint64_t layer_seed = 0;
    std::uint64_t data_hash = 0;
    std::vector<VariantResult> variants;
    std::string error;  // empty on success
    double seconds = 0.0;

    bool ok() const { return error.empty(); }
};

inline VariantResult evaluate_variant(Variant v, const ExperimentConfig& cfg, const RunData& d) {
    const TrainingLayout lay = training_layout(cfg);
    const TrainedObserver obs = train_observer(v, observer_config(cfg, d.layer_seed), d.inputs, d.targets, lay, d.links);
    const ObserverOutput out = run_observer(obs, d.inputs);
    const Eigen::Index first = lay.train_end() - out.start_step;
    const Eigen::Index len = cfg.inference_len;

    VariantResult r;
    r.variant = v;
    r.mse = mse(out.estimate.middleRows(first, len), d.truth.middleRows(lay.train_end(), len));
    r.mse_normalized = r.mse.array() / d.target_scale.array().square();
    if (obs.residual) {
        // Residuals of the basic module: measured targets on the fit span,
        // noise-free truth on the inference window.
        const DenseMatrix fit_res = d.targets.middleRows(obs.residual_fit.begin, obs.residual_fit.size()) -
                                    out.basic.middleRows(obs.residual_fit.begin - out.start_step, obs.residual_fit.size());
        const DenseMatrix inf_res = d.truth.middleRows(lay.train_end(), len) - out.basic.middleRows(first, len);
        const auto fs = residual_stats(fit_res, {{0, fit_res.rows()}});
        const auto is = residual_stats(inf_res, {{0, inf_res.rows()}});
        ResidualSummary s;
        s.fit_interval = obs.residual_fit;
        s.inference_interval = {lay.train_end(), lay.train_end() + len};
        s.fit_mav = fs[0].mav;
        s.fit_variance = fs[0].variance;
        s.inference_mav = is[0].mav;
        s.inference_variance = is[0].variance;
        r.residuals = std::move(s);
    }
    return r;
}

inline RunResult execute_run(const ExperimentConfig& cfg, int run, const KsPool* pool) {
    const auto t0 = std::chrono::steady_clock::now();
    RunResult r;
    r.run = run;
    try {
        const RunData d = prepare_run(cfg, run, pool);
        r.data_seed = d.data_seed;
        r.layer_seed = d.layer_seed;
        r.data_hash = d.data_hash;
        for (Variant v : cfg.variants) r.variants.push_back(evaluate_variant(v, cfg, d));
    } catch (const std::exception& e) {
        r.error = e.what();
        r.variants.clear();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<std::string> input_names;
    std::vector<std::string> target_names;
    std::vector<RunResult> runs;  // ordered by run index
    double wall_seconds = 0.0;
    bool squared_targets = false;

    bool partial() const {
        return std::any_of(runs.begin(), runs.end(), [](const RunResult& r) { return !r.ok(); });
    }
    int completed() const {
        return static_cast<int>(std::count_if(runs.begin(), runs.end(), [](const RunResult& r) { return r.ok(); }));
    }

    Eigen::Index target_index(const std::string& name) const {
        for (std::size_t i = 0; i < target_names.size(); ++i)
            if (target_names[i] == name) return static_cast<Eigen::Index>(i);
        throw ConfigError("report has no target '" + name + "'");
    }

    bool has_variant(Variant v) const {
        return std::find(config.variants.begin(), config.variants.end(), v) != config.variants.end();
    }

    std::size_t variant_slot(Variant v) const {
        const auto it = std::find(config.variants.begin(), config.variants.end(), v);
        if (it == config.variants.end()) throw ConfigError("report has no variant " + to_string(v));
        return static_cast<std::size_t>(it - config.variants.begin());
    }

    /// Per-run MSE of one (variant, target) over completed runs.
    std::vector<double> run_mse(Variant v, Eigen::Index target, bool normalized = false) const {
        const std::size_t slot = variant_slot(v);
        std::vector<double> out;
        for (const auto& r : runs)
            if (r.ok()) out.push_back(normalized ? r.variants[slot].mse_normalized[target] : r.variants[slot].mse[target]);
        return out;
    }

    double mean_mse(Variant v, Eigen::Index target, bool normalized = false) const {
        const auto xs = run_mse(v, target, normalized);
        if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
        double s = 0.0;
        for (double x : xs) s += x;
        return s / static_cast<double>(xs.size());
    }

    /// (1 - mean MSE_v / mean MSE_RO) * 100 on the same completed runs.
    double reduction(Variant v, Eigen::Index target, bool normalized = false) const {
        return percent_reduction(mean_mse(v, target, normalized), mean_mse(Variant::RO, target, normalized));
    }
};

/// Runs cfg.n_runs independent runs on a worker pool. Results are stored by
/// run index, so the thread count never changes the report.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentReport rep;
    rep.config = cfg;

    std::optional<KsPool> pool;
    if (cfg.system == SystemKind::ks) pool = make_ks_pool(cfg);
    {
        const RunData probe = prepare_run(cfg, 0, pool ? &*pool : nullptr);
        rep.input_names = probe.input_names;
        rep.target_names = probe.target_names;
        rep.squared_targets = probe.squared;
    }

    rep.runs.resize(static_cast<std::size_t>(cfg.n_runs));
    unsigned workers = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(cfg.n_runs));
    std::atomic<int> next{0};
    auto work = [&] {
        for (int i = next++; i < cfg.n_runs; i = next++)
            rep.runs[static_cast<std::size_t>(i)] = execute_run(cfg, i, pool ? &*pool : nullptr);
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> ts;
        for (unsigned w = 0; w < workers; ++w) ts.emplace_back(work);
        for (auto& t : ts) t.join();
    }
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// ---------------------------------------------------------------------------
// Sweeps

inline const std::vector<std::string>& sweepable_parameters() {
    static const std::vector<std::string> names{"d", "D", "alpha", "xi", "rho", "gamma", "beta", "lambda", "sigma", "n_c"};
    return names;
}

/// Copy of cfg with one hyperparameter replaced; validates the result.
inline ExperimentConfig with_parameter(ExperimentConfig cfg, const std::string& param, double value) {
    auto as_count = [&](double v) {
        if (!(v >= 1.0) || std::floor(v) != v) throw ConfigError("sweep: " + param + " needs positive integer values");
        return static_cast<Eigen::Index>(v);
    };
    if (param == "d") cfg.reservoir.d = as_count(value);
    else if (param == "D" || param == "density") cfg.reservoir.density = value;
    else if (param == "alpha") cfg.reservoir.alpha = value;
    else if (param == "xi") cfg.reservoir.xi = value;
    else if (param == "rho") cfg.reservoir.rho = value;
    else if (param == "gamma") cfg.reservoir.gamma = value;
    else if (param == "beta") cfg.reservoir.beta = value;
    else if (param == "lambda") cfg.residual.lambda = value;
    else if (param == "sigma") cfg.attention.sigma = value;
    else if (param == "n_c" || param == "N_c") cfg.attention.n_centers = as_count(value);
    else throw ConfigError("sweep: unknown parameter '" + param + "'");
    cfg.validate();
    return cfg;
}

struct SweepPoint {
    double value = 0.0;
    ExperimentReport report;
};

struct SweepCurve {
    std::string param;
    std::vector<SweepPoint> points;
};

inline SweepCurve sweep_hyperparameter(const ExperimentConfig& cfg, const std::string& param, const std::vector<double>& grid,
                                       const std::function<void(double)>& progress = {}) {
    if (grid.empty()) throw ConfigError("sweep: empty grid");
    std::vector<ExperimentConfig> cfgs;
    for (double v : grid) cfgs.push_back(with_parameter(cfg, param, v));  // validate the whole grid first
    SweepCurve c;
    c.param = param;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (progress) progress(grid[i]);
        c.points.push_back({grid[i], run_experiment(cfgs[i])});
    }
    return c;
}

struct NoisePoint {
    double eta = 0.0;
    ExperimentReport report;
};

/// Noisy training and inference data at every eta; RO and ROR only, MSE
/// against the noise-free targets.
inline std::vector<NoisePoint> noise_study(ExperimentConfig cfg, const std::vector<double>& etas,
                                           const std::function<void(double)>& progress = {}) {
    for (double e : etas)
        if (!(e >= 0.0)) throw ConfigError("noise_study: eta must be nonnegative");
    cfg.variants = {Variant::RO, Variant::ROR};
    std::vector<NoisePoint> out;
    for (double e : etas) {
        if (progress) progress(e);
        cfg.noise.eta = e;
        out.push_back({e, run_experiment(cfg)});
    }
    return out;
}

}  // namespace rolab
