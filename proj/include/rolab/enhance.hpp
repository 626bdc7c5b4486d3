#pragma once

// Residual calibration and attention for reservoir observers, and the
// composition of both. Every observer variant is trained and run through the
// same entry points so experiments can treat them uniformly.
//
// Time layout shared by all variants (absolute sample indices):
//   [0, W)        reservoir washout, never fitted or scored
//   [W, W + T)    training span; split at W + T/2 for the residual variants
//   [W + T, ...)  inference
// The residual reservoir starts from zero at step W and is driven by the
// basic module's input residuals from then on.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rolab/attention.hpp"
#include "rolab/dynamics.hpp"
#include "rolab/error.hpp"
#include "rolab/numerics.hpp"
#include "rolab/reservoir.hpp"
#include "rolab/rng.hpp"

namespace rolab {

enum class Variant { RO, ROR, ROR_al, ROA, RORA, RO2d, PRC };

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::RO: return "RO";
        case Variant::ROR: return "ROR";
        case Variant::ROR_al: return "ROR-al";
        case Variant::ROA: return "ROA";
        case Variant::RORA: return "RORA";
        case Variant::RO2d: return "RO-2d";
        case Variant::PRC: return "P-RC";
    }
    return "?";
}

inline Variant variant_from_string(const std::string& s) {
    for (Variant v : {Variant::RO, Variant::ROR, Variant::ROR_al, Variant::ROA, Variant::RORA, Variant::RO2d, Variant::PRC})
        if (to_string(v) == s) return v;
    if (s == "ROR_al") return Variant::ROR_al;
    if (s == "RO2d") return Variant::RO2d;
    if (s == "PRC") return Variant::PRC;
    throw ConfigError("unknown observer variant '" + s + "'");
}

inline bool has_residual(Variant v) { return v == Variant::ROR || v == Variant::RORA || v == Variant::ROR_al; }
inline bool has_attention(Variant v) { return v == Variant::ROA || v == Variant::RORA; }

enum class ResidualInputWeights { fresh, shared };

struct ResidualOptions {
    double lambda = 0.9;
    ResidualInputWeights input_weights = ResidualInputWeights::fresh;
};

struct ObserverConfig {
    ReservoirSpec reservoir;
    ResidualOptions residual;
    AttentionOptions attention;
};

/// Which observer output estimates a measured input, and the input's
/// normalization, so residuals are expressed in reservoir-input units.
struct InputLink {
    Eigen::Index target_col = 0;
    double mean = 0.0;
    double scale = 1.0;
};

struct TrainingLayout {
    Eigen::Index washout = 100;
    Eigen::Index train_len = 400;

    Eigen::Index train_begin() const { return washout; }
    Eigen::Index train_end() const { return washout + train_len; }
    Eigen::Index split() const { return washout + train_len / 2; }
};

struct ResidualModule {
    ReservoirWeights weights;  // a = B, w_in = residual input layer
    double lambda = 0.9;
    Readout readout;
    std::optional<AttentionBank> bank;
};

struct TrainedObserver {
    Variant variant = Variant::RO;
    ReservoirSpec spec;
    ReservoirWeights basic;
    Readout basic_readout;
    std::optional<AttentionBank> basic_bank;
    std::optional<ResidualModule> residual;
    std::vector<InputLink> links;
    Eigen::Index washout = 100;

    /// Index ranges used for fitting, for data-hygiene checks.
    StepRange basic_fit;
    StepRange residual_fit;
};

/// Estimates for steps [start_step, start_step + rows).
struct ObserverOutput {
    Eigen::Index start_step = 0;
    DenseMatrix estimate;    // s_tilde (or s_hat when there is no residual module)
    DenseMatrix basic;       // s_hat of the basic module
    DenseMatrix correction;  // delta s_hat, zero without residual module
};

/// r_check(k+1) = (1-alpha) r_check(k) + alpha tanh(lambda B r_check(k)
///                + (1-lambda) A r(k) + W_in du(k) + xi 1),  r_check(start) = 0.
///
/// basic_states and delta_u (one sample per row) must cover the same steps.
inline StateSequence drive_residual(const ReservoirWeights& res, double lambda, const ReservoirSpec& spec,
                                    const SparseMatrix& basic_a, const StateSequence& basic_states,
                                    const DenseMatrix& delta_u) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("drive_residual: lambda must lie in (0, 1]");
    const Eigen::Index n = basic_states.size();
    if (delta_u.rows() != n) throw DimensionError("drive_residual: residual series misaligned with basic states");
    if (delta_u.cols() != res.n_inputs()) throw DimensionError("drive_residual: residual width differs from W_in");
    if (basic_a.rows() != basic_states.states.rows() || res.dim() != basic_a.rows())
        throw DimensionError("drive_residual: reservoir sizes differ");

    const Eigen::Index d = res.dim();
    DenseMatrix coupling;
    if (lambda < 1.0) coupling = (1.0 - lambda) * (basic_a * basic_states.states);

    StateSequence out;
    out.start_step = basic_states.start_step;
    out.states.resize(d, n);
    Vector r = Vector::Zero(d);
    Vector pre(d);
    for (Eigen::Index k = 0; k < n; ++k) {
        out.states.col(k) = r;
        if (k + 1 == n) break;
        pre.noalias() = lambda * (res.a * r);
        if (lambda < 1.0) pre += coupling.col(k);
        pre.noalias() += res.w_in * delta_u.row(k).transpose();
        pre.array() += spec.xi;
        r = (1.0 - spec.alpha) * r + spec.alpha * pre.array().tanh().matrix();
        if (!r.allFinite())
            throw Divergence("drive_residual: non-finite state", static_cast<std::size_t>(out.start_step + k + 1));
    }
    return out;
}

/// Input residuals du = u - u_hat in normalized input units.
inline DenseMatrix input_residuals(const DenseMatrix& inputs_rows, const DenseMatrix& estimates_rows,
                                   const std::vector<InputLink>& links) {
    if (static_cast<Eigen::Index>(links.size()) != inputs_rows.cols())
        throw DimensionError("input_residuals: one link per input required");
    DenseMatrix du(estimates_rows.rows(), inputs_rows.cols());
    for (std::size_t j = 0; j < links.size(); ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        const auto& l = links[j];
        if (l.target_col < 0 || l.target_col >= estimates_rows.cols())
            throw DimensionError("input_residuals: link points outside the targets");
        du.col(c) = inputs_rows.col(c) - ((estimates_rows.col(l.target_col).array() - l.mean) / l.scale).matrix();
    }
    return du;
}

namespace detail {

inline FeatureKind basic_feature_kind(Variant v) {
    if (has_attention(v)) return FeatureKind::attention_augmented;
    if (v == Variant::PRC) return FeatureKind::polynomial;
    return FeatureKind::state;
}

inline const AttentionBank* bank_ptr(const std::optional<AttentionBank>& b) { return b ? &*b : nullptr; }

}  // namespace detail

/// Residual layers: B from the "B" substream, input layer either fresh
/// ("W_in.res") or reused from the basic reservoir.
inline ReservoirWeights build_residual_weights(const ReservoirSpec& spec, const ReservoirWeights& basic,
                                               ResidualInputWeights mode) {
    ReservoirWeights w;
    w.a = random_recurrent_matrix(spec.d, spec.density, spec.rho, substream_seed(spec.seed, "B"));
    w.w_in = mode == ResidualInputWeights::shared
                 ? basic.w_in
                 : random_input_matrix(spec.d, basic.n_inputs(), spec.gamma, substream_seed(spec.seed, "W_in.res"));
    return w;
}

/// Runs a trained observer on `inputs` (one normalized sample per row) and
/// returns estimates for steps [washout, N).
inline ObserverOutput run_observer(const TrainedObserver& obs, const DenseMatrix& inputs) {
    const StateSequence states = drive(obs.basic, obs.spec, inputs, obs.washout);
    ObserverOutput out;
    out.start_step = states.start_step;
    out.basic = apply_readout(obs.basic_readout, states.states, detail::bank_ptr(obs.basic_bank)).transpose();
    if (!obs.residual) {
        out.estimate = out.basic;
        out.correction = DenseMatrix::Zero(out.basic.rows(), out.basic.cols());
        return out;
    }
    const ResidualModule& res = *obs.residual;
    const DenseMatrix du = input_residuals(inputs.bottomRows(states.size()), out.basic, obs.links);
    const StateSequence rs = drive_residual(res.weights, res.lambda, obs.spec, obs.basic.a, states, du);
    out.correction = apply_readout(res.readout, rs.states, detail::bank_ptr(res.bank)).transpose();
    out.estimate = out.basic + out.correction;
    return out;
}

/// Trains one observer variant. `inputs` are normalized measurements and
/// `targets` the full-state targets, both one sample per row over the same
/// steps; only rows inside the training span of `layout` are used for fitting.
inline TrainedObserver train_observer(Variant variant, const ObserverConfig& cfg, const DenseMatrix& inputs,
                                      const DenseMatrix& targets, const TrainingLayout& layout,
                                      const std::vector<InputLink>& links) {
    if (inputs.rows() != targets.rows()) throw DimensionError("train_observer: inputs and targets differ in length");
    if (layout.washout < 0 || layout.train_len < 4) throw DegenerateInput("train_observer: training span too short");
    if (layout.train_end() > inputs.rows()) throw DegenerateInput("train_observer: training span exceeds the data");
    const bool residual = has_residual(variant);
    if (residual && static_cast<Eigen::Index>(links.size()) != inputs.cols())
        throw ConfigError("train_observer: residual variants need one input link per measured channel");

    TrainedObserver obs;
    obs.variant = variant;
    obs.spec = variant == Variant::RO2d ? ro_2d_spec(cfg.reservoir) : cfg.reservoir;
    obs.links = links;
    obs.washout = layout.washout;
    obs.basic = build_reservoir(obs.spec, inputs.cols());

    // Training span, as an absolute step range, of the basic module.
    const Eigen::Index basic_end =
        (variant == Variant::ROR || variant == Variant::RORA) ? layout.split() : layout.train_end();
    obs.basic_fit = {layout.train_begin(), basic_end};

    const StateSequence states = drive(obs.basic, obs.spec, inputs.topRows(layout.train_end()), layout.washout);
    const DenseMatrix fit_states = states.span(obs.basic_fit.begin, obs.basic_fit.end);
    const FeatureKind kind = detail::basic_feature_kind(variant);
    if (kind == FeatureKind::attention_augmented)
        obs.basic_bank = build_attention(fit_states, cfg.attention, substream_seed(obs.spec.seed, "centers.basic"));
    obs.basic_readout = fit_readout(fit_states, targets.middleRows(obs.basic_fit.begin, obs.basic_fit.size()).transpose(),
                                    obs.spec.beta, kind, detail::bank_ptr(obs.basic_bank));
    if (!residual) return obs;

    // Basic-module estimates and input residuals over the whole training span.
    const DenseMatrix s_hat = apply_readout(obs.basic_readout, states.states, detail::bank_ptr(obs.basic_bank)).transpose();
    const DenseMatrix du = input_residuals(inputs.middleRows(layout.washout, states.size()), s_hat, links);

    ResidualModule res;
    res.lambda = cfg.residual.lambda;
    res.weights = build_residual_weights(obs.spec, obs.basic, cfg.residual.input_weights);
    const StateSequence rs = drive_residual(res.weights, res.lambda, obs.spec, obs.basic.a, states, du);

    obs.residual_fit = variant == Variant::ROR_al ? StepRange{layout.train_begin(), layout.train_end()}
                                                  : StepRange{layout.split(), layout.train_end()};
    const DenseMatrix res_states = rs.span(obs.residual_fit.begin, obs.residual_fit.end);
    const DenseMatrix delta_s =
        targets.middleRows(obs.residual_fit.begin, obs.residual_fit.size()).transpose() -
        s_hat.middleRows(obs.residual_fit.begin - layout.washout, obs.residual_fit.size()).transpose();
    if (variant == Variant::RORA)
        res.bank = build_attention(res_states, cfg.attention, substream_seed(obs.spec.seed, "centers.res"));
    res.readout = fit_readout(res_states, delta_s, obs.spec.beta, kind, detail::bank_ptr(res.bank));
    obs.residual = std::move(res);
    return obs;
}

}  // namespace rolab
