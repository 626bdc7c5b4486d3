#pragma once

// Experiment configuration, named presets for the four benchmark systems,
// and the JSON form used by config files and run summaries.

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "rolab/dynamics.hpp"
#include "rolab/enhance.hpp"
#include "rolab/error.hpp"

namespace rolab {

enum class SystemKind { rossler, lorenz, chua, ks };

inline std::string to_string(SystemKind k) {
    switch (k) {
        case SystemKind::rossler: return "rossler";
        case SystemKind::lorenz: return "lorenz";
        case SystemKind::chua: return "chua";
        case SystemKind::ks: return "ks";
    }
    return "?";
}

inline SystemKind system_from_string(const std::string& s) {
    for (SystemKind k : {SystemKind::rossler, SystemKind::lorenz, SystemKind::chua, SystemKind::ks})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown system '" + s + "'");
}

inline OdeKind ode_kind(SystemKind k) {
    switch (k) {
        case SystemKind::rossler: return OdeKind::rossler;
        case SystemKind::lorenz: return OdeKind::lorenz;
        case SystemKind::chua: return OdeKind::chua;
        case SystemKind::ks: break;
    }
    throw ConfigError("ks is not an ODE system");
}

/// Where measurement noise is added: on raw data before normalization, or
/// in normalized units (eta scaled by each variable's training std).
enum class NoiseStage { raw, normalized };

/// Lorenz observed through z cannot resolve the sign of x and y, so those
/// targets are squared. `automatic` does this exactly for Lorenz with z as
/// the only input.
enum class SquareTargets { automatic, on, off };

struct ExperimentConfig {
    std::string preset;
    SystemKind system = SystemKind::rossler;
    OdeSystemSpec ode = OdeSystemSpec::rossler();
    KsSpec ks;
    double dt = 0.1;

    /// Measured variables by name ("x", "y", "z"; "y<i>" for KS grid points).
    /// For KS an empty list selects `ks_inputs` equally spaced grid points.
    std::vector<std::string> input_vars{"x"};
    int ks_inputs = 8;
    int ks_conditions = 1;  // IS_q: q pre-generated trajectories, one picked per run
    SquareTargets square_targets = SquareTargets::automatic;

    ReservoirSpec reservoir;
    ResidualOptions residual;
    AttentionOptions attention;
    std::vector<Variant> variants{Variant::RO, Variant::ROR, Variant::ROA, Variant::RORA};

    Eigen::Index train_len = 400;
    Eigen::Index inference_len = 2000;
    Eigen::Index reservoir_washout = 100;
    std::size_t data_washout = 1000;
    /// Random ODE initial conditions are uniform in [-w, w]^3.
    double init_half_width = 1.0;

    int n_runs = 20;
    NoiseSpec noise;
    NoiseStage noise_stage = NoiseStage::raw;
    bool regenerate_data = true;
    std::uint64_t master_seed = 20240611;
    int threads = 0;  // 0: hardware concurrency

    void validate() const {
        reservoir.validate();
        if (train_len < 4) throw ConfigError("config: train_len must be at least 4");
        if (inference_len < 1) throw ConfigError("config: inference_len must be positive");
        if (reservoir_washout < 0) throw ConfigError("config: negative reservoir washout");
        if (!(init_half_width > 0.0)) throw ConfigError("config: init_half_width must be positive");
        if (n_runs < 1) throw ConfigError("config: n_runs must be at least 1");
        if (!(noise.eta >= 0.0)) throw ConfigError("config: noise eta must be nonnegative");
        if (variants.empty()) throw ConfigError("config: no variants requested");
        if (!(residual.lambda > 0.0 && residual.lambda <= 1.0)) throw ConfigError("config: lambda must lie in (0, 1]");
        if (!(attention.sigma > 0.0)) throw ConfigError("config: sigma must be positive");
        if (attention.n_centers < 1) throw ConfigError("config: n_centers must be positive");
        if (system == SystemKind::ks) {
            if (ks_conditions < 1) throw ConfigError("config: ks_conditions must be positive");
            if (input_vars.empty() && (ks_inputs < 1 || ks_inputs > ks.grid_points))
                throw ConfigError("config: ks_inputs out of range");
        } else if (input_vars.empty()) {
            throw ConfigError("config: at least one input variable is required");
        }
    }

    Eigen::Index total_steps() const { return reservoir_washout + train_len + inference_len; }
};

/// Reference settings per system. "ks" is the full-scale setting; "ks_desk" the reduced
/// one (d = 500, T = 10000) used for routine checks.
inline ExperimentConfig preset_config(const std::string& name) {
    ExperimentConfig c;
    c.preset = name;
    ReservoirSpec& r = c.reservoir;
    if (name == "rossler") {
        c.system = SystemKind::rossler;
        c.ode = OdeSystemSpec::rossler();
        c.dt = 0.1;
        c.train_len = 400;
        c.residual.lambda = 0.9;
    } else if (name == "lorenz") {
        c.system = SystemKind::lorenz;
        c.ode = OdeSystemSpec::lorenz();
        c.dt = 0.05;
        c.train_len = 800;
        c.residual.lambda = 0.9;
    } else if (name == "chua") {
        c.system = SystemKind::chua;
        c.ode = OdeSystemSpec::chua();
        c.dt = 0.1;
        c.train_len = 1000;
        c.residual.lambda = 0.5;
        // Starts from [-1, 1]^3 reach the large outer orbit about half the
        // time; this box stays in the basin of the three-scroll attractor.
        c.init_half_width = 0.2;
    } else if (name == "ks" || name == "ks_desk") {
        c.system = SystemKind::ks;
        c.dt = 0.25;
        c.ks.dt = 0.25;
        c.input_vars.clear();
        c.ks_inputs = 8;
        c.train_len = name == "ks" ? 30000 : 10000;
        r.d = name == "ks" ? 1000 : 500;
        r.density = 0.06;
        r.alpha = 0.5;
        r.xi = 0.0;
        r.rho = 0.9;
        r.gamma = 0.5;
        r.beta = 1e-10;
        c.residual.lambda = 0.95;
        return c;
    } else {
        throw ConfigError("unknown preset '" + name + "' (rossler, lorenz, chua, ks, ks_desk)");
    }
    r.d = 400;
    r.density = 0.05;
    r.alpha = 1.0;
    r.xi = 1.0;
    r.rho = 1.0;
    r.gamma = 1.0;
    r.beta = 1e-8;
    c.attention.sigma = 1.0;
    c.attention.n_centers = 50;
    return c;
}

// ---------------------------------------------------------------------------
// JSON

using Json = nlohmann::json;

inline Json rank_to_json(const RankMode& m) {
    if (const auto* f = std::get_if<FixedRank>(&m)) return Json(static_cast<std::int64_t>(f->h));
    return Json("auto");
}

inline RankMode rank_from_json(const Json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "auto") return AutoRank{};
        throw ConfigError("attention.h must be \"auto\" or a positive integer");
    }
    const auto h = j.get<std::int64_t>();
    if (h < 1) throw ConfigError("attention.h must be positive");
    return FixedRank{static_cast<Eigen::Index>(h)};
}

inline Json to_json(const ReservoirSpec& r) {
    return Json{{"d", r.d},     {"density", r.density}, {"alpha", r.alpha}, {"xi", r.xi},
                {"rho", r.rho}, {"gamma", r.gamma},     {"beta", r.beta},   {"seed", r.seed}};
}

inline void update_from_json(ReservoirSpec& r, const Json& j) {
    if (j.contains("d")) r.d = j.at("d").get<Eigen::Index>();
    if (j.contains("density")) r.density = j.at("density").get<double>();
    if (j.contains("alpha")) r.alpha = j.at("alpha").get<double>();
    if (j.contains("xi")) r.xi = j.at("xi").get<double>();
    if (j.contains("rho")) r.rho = j.at("rho").get<double>();
    if (j.contains("gamma")) r.gamma = j.at("gamma").get<double>();
    if (j.contains("beta")) r.beta = j.at("beta").get<double>();
    if (j.contains("seed")) r.seed = j.at("seed").get<std::uint64_t>();
}

inline Json to_json(const ExperimentConfig& c) {
    Json variants = Json::array();
    for (Variant v : c.variants) variants.push_back(to_string(v));
    Json params = Json::object();
    for (const auto& [k, v] : c.ode.params) params[k] = v;
    return Json{
        {"preset", c.preset},
        {"system", to_string(c.system)},
        {"ode_params", params},
        {"ks", {{"domain_length", c.ks.domain_length}, {"grid_points", c.ks.grid_points}, {"substeps", c.ks.substeps},
                {"contour_points", c.ks.contour_points}}},
        {"dt", c.dt},
        {"input_vars", c.input_vars},
        {"ks_inputs", c.ks_inputs},
        {"ks_conditions", c.ks_conditions},
        {"square_targets", c.square_targets == SquareTargets::automatic ? "auto"
                           : c.square_targets == SquareTargets::on      ? "on"
                                                                        : "off"},
        {"reservoir", to_json(c.reservoir)},
        {"residual", {{"lambda", c.residual.lambda},
                      {"input_weights", c.residual.input_weights == ResidualInputWeights::fresh ? "fresh" : "shared"}}},
        {"attention", {{"n_centers", c.attention.n_centers}, {"sigma", c.attention.sigma}, {"h", rank_to_json(c.attention.rank)}}},
        {"variants", variants},
        {"train_len", c.train_len},
        {"inference_len", c.inference_len},
        {"reservoir_washout", c.reservoir_washout},
        {"data_washout", c.data_washout},
        {"init_half_width", c.init_half_width},
        {"n_runs", c.n_runs},
        {"noise", {{"eta", c.noise.eta}, {"stage", c.noise_stage == NoiseStage::raw ? "raw" : "normalized"}}},
        {"regenerate_data", c.regenerate_data},
        {"master_seed", c.master_seed},
        {"threads", c.threads},
    };
}

/// Reads a config object. A "preset" key seeds every field from the preset;
/// the remaining keys override it, so a file may name a preset and list
/// only what differs.
inline ExperimentConfig config_from_json(const Json& j) {
    ExperimentConfig c;
    if (j.contains("preset")) c = preset_config(j.at("preset").get<std::string>());
    try {
        if (j.contains("system")) {
            const SystemKind k = system_from_string(j.at("system").get<std::string>());
            if (k != c.system) {
                c.system = k;
                if (k != SystemKind::ks) c.ode = OdeSystemSpec::standard(ode_kind(k));
            }
        }
        if (j.contains("ode_params"))
            for (const auto& [k, v] : j.at("ode_params").items()) c.ode.params[k] = v.get<double>();
        if (j.contains("ks")) {
            const Json& k = j.at("ks");
            if (k.contains("domain_length")) c.ks.domain_length = k.at("domain_length").get<double>();
            if (k.contains("grid_points")) c.ks.grid_points = k.at("grid_points").get<int>();
            if (k.contains("substeps")) c.ks.substeps = k.at("substeps").get<int>();
            if (k.contains("contour_points")) c.ks.contour_points = k.at("contour_points").get<int>();
        }
        if (j.contains("dt")) c.dt = j.at("dt").get<double>();
        c.ks.dt = c.dt;
        if (j.contains("input_vars")) c.input_vars = j.at("input_vars").get<std::vector<std::string>>();
        if (j.contains("ks_inputs")) c.ks_inputs = j.at("ks_inputs").get<int>();
        if (j.contains("ks_conditions")) c.ks_conditions = j.at("ks_conditions").get<int>();
        if (j.contains("square_targets")) {
            const auto s = j.at("square_targets").get<std::string>();
            if (s == "auto") c.square_targets = SquareTargets::automatic;
            else if (s == "on") c.square_targets = SquareTargets::on;
            else if (s == "off") c.square_targets = SquareTargets::off;
            else throw ConfigError("square_targets must be auto, on or off");
        }
        if (j.contains("reservoir")) update_from_json(c.reservoir, j.at("reservoir"));
        if (j.contains("residual")) {
            const Json& r = j.at("residual");
            if (r.contains("lambda")) c.residual.lambda = r.at("lambda").get<double>();
            if (r.contains("input_weights")) {
                const auto s = r.at("input_weights").get<std::string>();
                if (s == "fresh") c.residual.input_weights = ResidualInputWeights::fresh;
                else if (s == "shared") c.residual.input_weights = ResidualInputWeights::shared;
                else throw ConfigError("residual.input_weights must be fresh or shared");
            }
        }
        if (j.contains("attention")) {
            const Json& a = j.at("attention");
            if (a.contains("n_centers")) c.attention.n_centers = a.at("n_centers").get<Eigen::Index>();
            if (a.contains("sigma")) c.attention.sigma = a.at("sigma").get<double>();
            if (a.contains("h")) c.attention.rank = rank_from_json(a.at("h"));
        }
        if (j.contains("variants")) {
            c.variants.clear();
            for (const auto& v : j.at("variants")) c.variants.push_back(variant_from_string(v.get<std::string>()));
        }
        if (j.contains("train_len")) c.train_len = j.at("train_len").get<Eigen::Index>();
        if (j.contains("inference_len")) c.inference_len = j.at("inference_len").get<Eigen::Index>();
        if (j.contains("reservoir_washout")) c.reservoir_washout = j.at("reservoir_washout").get<Eigen::Index>();
        if (j.contains("data_washout")) c.data_washout = j.at("data_washout").get<std::size_t>();
        if (j.contains("init_half_width")) c.init_half_width = j.at("init_half_width").get<double>();
        if (j.contains("n_runs")) c.n_runs = j.at("n_runs").get<int>();
        if (j.contains("noise")) {
            const Json& n = j.at("noise");
            if (n.contains("eta")) c.noise.eta = n.at("eta").get<double>();
            if (n.contains("stage")) {
                const auto s = n.at("stage").get<std::string>();
                if (s == "raw") c.noise_stage = NoiseStage::raw;
                else if (s == "normalized") c.noise_stage = NoiseStage::normalized;
                else throw ConfigError("noise.stage must be raw or normalized");
            }
        }
        if (j.contains("regenerate_data")) c.regenerate_data = j.at("regenerate_data").get<bool>();
        if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
        if (j.contains("threads")) c.threads = j.at("threads").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config '" + path + "'");
    Json j;
    try {
        j = Json::parse(f, nullptr, true, true);  // comments allowed
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

}  // namespace rolab
