#pragma once

// JSON container for trained observers: train once, infer later. Doubles are
// written in shortest round-trip form, so reading back gives identical bits.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "rolab/config.hpp"
#include "rolab/enhance.hpp"
#include "rolab/harness.hpp"

namespace rolab {

inline constexpr int kContainerVersion = 1;

/// A trained observer plus what is needed to apply it to raw measurements.
struct ObserverContainer {
    TrainedObserver observer;
    std::vector<std::string> input_names;
    std::vector<std::string> target_names;
    NormalizationStats input_stats;
    bool squared_targets = false;
    double dt = 0.0;
};

namespace ser {

inline Json dense(const DenseMatrix& m) {
    std::vector<double> data(m.data(), m.data() + m.size());
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline DenseMatrix dense(const Json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ConfigError("container: matrix size mismatch");
    return Eigen::Map<const DenseMatrix>(data.data(), rows, cols);
}

inline Json vec(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vec(const Json& j) {
    const auto xs = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

inline Json sparse(const SparseMatrix& m) {
    std::vector<Eigen::Index> r, c;
    std::vector<double> v;
    for (Eigen::Index k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
            r.push_back(it.row());
            c.push_back(it.col());
            v.push_back(it.value());
        }
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"i", r}, {"j", c}, {"v", v}};
}

inline SparseMatrix sparse(const Json& j) {
    const auto r = j.at("i").get<std::vector<Eigen::Index>>();
    const auto c = j.at("j").get<std::vector<Eigen::Index>>();
    const auto v = j.at("v").get<std::vector<double>>();
    if (r.size() != c.size() || r.size() != v.size()) throw ConfigError("container: triplet arrays differ in length");
    SparseMatrix m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
    std::vector<Triplet> t;
    t.reserve(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) t.emplace_back(r[k], c[k], v[k]);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

inline Json weights(const ReservoirWeights& w) { return Json{{"A", sparse(w.a)}, {"W_in", dense(w.w_in)}}; }
inline ReservoirWeights weights(const Json& j) { return {sparse(j.at("A")), dense(j.at("W_in"))}; }

inline Json readout(const Readout& r) {
    return Json{{"W_out", dense(r.w_out)}, {"bias", vec(r.bias)}, {"features", to_string(r.feature_kind)}};
}
inline Readout readout(const Json& j) {
    return {dense(j.at("W_out")), vec(j.at("bias")), feature_kind_from_string(j.at("features").get<std::string>())};
}

inline Json bank(const std::optional<AttentionBank>& b) {
    if (!b) return nullptr;
    return Json{{"U_h", dense(b->u_h)}, {"mean", vec(b->state_mean)}, {"centers", dense(b->centers)}, {"sigma", b->sigma}};
}
inline std::optional<AttentionBank> bank(const Json& j) {
    if (j.is_null()) return std::nullopt;
    return AttentionBank{dense(j.at("U_h")), vec(j.at("mean")), dense(j.at("centers")), j.at("sigma").get<double>()};
}

inline Json range(const StepRange& r) { return Json::array({r.begin, r.end}); }
inline StepRange range(const Json& j) { return {j.at(0).get<Eigen::Index>(), j.at(1).get<Eigen::Index>()}; }

}  // namespace ser

inline Json to_json(const ReservoirWeights& w) { return ser::weights(w); }
inline Json to_json(const Readout& r) { return ser::readout(r); }

inline Json to_json(const TrainedObserver& o) {
    Json links = Json::array();
    for (const auto& l : o.links) links.push_back({{"target_col", l.target_col}, {"mean", l.mean}, {"scale", l.scale}});
    Json j{{"variant", to_string(o.variant)},
           {"spec", to_json(o.spec)},
           {"basic", ser::weights(o.basic)},
           {"basic_readout", ser::readout(o.basic_readout)},
           {"basic_bank", ser::bank(o.basic_bank)},
           {"links", links},
           {"washout", o.washout},
           {"basic_fit", ser::range(o.basic_fit)},
           {"residual_fit", ser::range(o.residual_fit)},
           {"residual", nullptr}};
    if (o.residual)
        j["residual"] = Json{{"weights", ser::weights(o.residual->weights)},
                             {"lambda", o.residual->lambda},
                             {"readout", ser::readout(o.residual->readout)},
                             {"bank", ser::bank(o.residual->bank)}};
    return j;
}

inline TrainedObserver observer_from_json(const Json& j) {
    TrainedObserver o;
    o.variant = variant_from_string(j.at("variant").get<std::string>());
    update_from_json(o.spec, j.at("spec"));
    o.spec.validate();
    o.basic = ser::weights(j.at("basic"));
    o.basic_readout = ser::readout(j.at("basic_readout"));
    o.basic_bank = ser::bank(j.at("basic_bank"));
    for (const auto& l : j.at("links"))
        o.links.push_back({l.at("target_col").get<Eigen::Index>(), l.at("mean").get<double>(), l.at("scale").get<double>()});
    o.washout = j.at("washout").get<Eigen::Index>();
    o.basic_fit = ser::range(j.at("basic_fit"));
    o.residual_fit = ser::range(j.at("residual_fit"));
    if (!j.at("residual").is_null()) {
        const Json& r = j.at("residual");
        ResidualModule m;
        m.weights = ser::weights(r.at("weights"));
        m.lambda = r.at("lambda").get<double>();
        m.readout = ser::readout(r.at("readout"));
        m.bank = ser::bank(r.at("bank"));
        o.residual = std::move(m);
    }
    if (o.basic.dim() != o.spec.d || o.basic_readout.w_out.cols() == 0) throw ConfigError("container: inconsistent observer");
    return o;
}

inline Json to_json(const ObserverContainer& c) {
    return Json{{"format", "rolab.observer"},
                {"version", kContainerVersion},
                {"observer", to_json(c.observer)},
                {"input_names", c.input_names},
                {"target_names", c.target_names},
                {"input_mean", ser::vec(c.input_stats.mean)},
                {"input_scale", ser::vec(c.input_stats.scale)},
                {"squared_targets", c.squared_targets},
                {"dt", c.dt}};
}

inline ObserverContainer container_from_json(const Json& j) {
    try {
        if (j.value("format", std::string()) != "rolab.observer") throw ConfigError("container: not an observer container");
        const int v = j.at("version").get<int>();
        if (v != kContainerVersion) throw ConfigError("container: unsupported version " + std::to_string(v));
        ObserverContainer c;
        c.observer = observer_from_json(j.at("observer"));
        c.input_names = j.at("input_names").get<std::vector<std::string>>();
        c.target_names = j.at("target_names").get<std::vector<std::string>>();
        c.input_stats.mean = ser::vec(j.at("input_mean"));
        c.input_stats.scale = ser::vec(j.at("input_scale"));
        c.squared_targets = j.at("squared_targets").get<bool>();
        c.dt = j.at("dt").get<double>();
        if (static_cast<Eigen::Index>(c.input_names.size()) != c.observer.basic.n_inputs() ||
            static_cast<Eigen::Index>(c.target_names.size()) != c.observer.basic_readout.n_targets())
            throw ConfigError("container: names do not match the observer");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("container: ") + e.what());
    }
}

inline void save_container(const std::string& path, const ObserverContainer& c) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    f << to_json(c).dump() << '\n';
}

inline ObserverContainer load_container(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open '" + path + "'");
    Json j;
    try {
        j = Json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("container '" + path + "': " + e.what());
    }
    return container_from_json(j);
}

/// Trains one variant on prepared run data and packs it with the names and
/// input statistics needed at inference time.
inline ObserverContainer train_container(Variant v, const ExperimentConfig& cfg, const RunData& d) {
    ObserverContainer c;
    c.observer = train_observer(v, observer_config(cfg, d.layer_seed), d.inputs, d.targets, training_layout(cfg), d.links);
    c.input_names = d.input_names;
    c.target_names = d.target_names;
    c.input_stats = d.input_stats;
    c.squared_targets = d.squared;
    c.dt = cfg.dt;
    return c;
}

/// Applies a container to raw measurements: picks the input columns by
/// name, normalizes them with the stored statistics and runs the observer.
/// Returns estimates for steps [washout, N) in target units.
inline Trajectory apply_container(const ObserverContainer& c, const Trajectory& measured) {
    DenseMatrix u(measured.steps(), static_cast<Eigen::Index>(c.input_names.size()));
    for (std::size_t j = 0; j < c.input_names.size(); ++j)
        u.col(static_cast<Eigen::Index>(j)) = measured.values.col(measured.index_of(c.input_names[j]));
    const ObserverOutput out = run_observer(c.observer, apply_normalization(u, c.input_stats));
    Trajectory est;
    est.dt = measured.dt;
    est.t0 = measured.t0 + static_cast<double>(out.start_step) * measured.dt;
    est.values = out.estimate;
    est.var_names = c.target_names;
    return est;
}

}  // namespace rolab
