#pragma once

// Traditional reservoir observer: random layers, leaky-tanh state update,
// ridge-trained affine readout, open-loop inference. Also the two baselines
// sized against the enhanced observers: RO-2d (twice the nodes) and P-RC
// (states concatenated with their element-wise squares).

#include <cmath>
#include <cstdint>
#include <string>

#include "rolab/attention.hpp"
#include "rolab/error.hpp"
#include "rolab/numerics.hpp"
#include "rolab/rng.hpp"

namespace rolab {

struct ReservoirSpec {
    Eigen::Index d = 400;
    double density = 0.05;
    double alpha = 1.0;
    double xi = 1.0;
    double rho = 1.0;
    double gamma = 1.0;
    double beta = 1e-8;
    std::uint64_t seed = 0;

    void validate() const {
        if (d < 1) throw ConfigError("reservoir: d must be at least 1");
        if (!(density > 0.0 && density <= 1.0)) throw ConfigError("reservoir: density must lie in (0, 1]");
        if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("reservoir: alpha must lie in (0, 1]");
        if (!(rho > 0.0)) throw ConfigError("reservoir: rho must be positive");
        if (!(beta >= 0.0)) throw ConfigError("reservoir: beta must be nonnegative");
        if (!(gamma >= 0.0)) throw ConfigError("reservoir: gamma must be nonnegative");
        if (!std::isfinite(xi)) throw ConfigError("reservoir: xi must be finite");
    }
};

struct ReservoirWeights {
    SparseMatrix a;     // d x d
    DenseMatrix w_in;   // d x n

    Eigen::Index dim() const { return a.rows(); }
    Eigen::Index n_inputs() const { return w_in.cols(); }
};

/// Erdos-Renyi graph with edge probability `density` and weights uniform in
/// [-1, 1], rescaled to spectral radius rho. Resampled up to 10 times if it
/// comes out empty or nilpotent.
inline SparseMatrix random_recurrent_matrix(Eigen::Index d, double density, double rho, std::uint64_t seed) {
    Rng rng(seed);
    for (int attempt = 0; attempt < 10; ++attempt) {
        std::vector<Triplet> trips;
        trips.reserve(static_cast<std::size_t>(static_cast<double>(d * d) * density * 1.2) + 8);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) {
                const double u = uniform(rng, 0.0, 1.0);
                const double w = uniform(rng, -1.0, 1.0);
                if (u < density || density >= 1.0) trips.emplace_back(i, j, w);
            }
        if (trips.empty()) continue;
        SparseMatrix m(d, d);
        m.setFromTriplets(trips.begin(), trips.end());
        m.makeCompressed();
        const SpectralRadius sr = spectral_radius(m);
        if (!(sr.value > 1e-12)) continue;
        SparseMatrix out = m * (rho / sr.value);
        out.makeCompressed();
        return out;
    }
    throw DegenerateInput("random_recurrent_matrix: density too low to produce a usable graph");
}

inline DenseMatrix random_input_matrix(Eigen::Index d, Eigen::Index n, double gamma, std::uint64_t seed) {
    Rng rng(seed);
    DenseMatrix w(d, n);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < n; ++j) w(i, j) = uniform(rng, -gamma, gamma);
    return w;
}

/// Layers for the basic reservoir, drawn from the "A" and "W_in" substreams
/// of spec.seed.
inline ReservoirWeights build_reservoir(const ReservoirSpec& spec, Eigen::Index n_inputs) {
    spec.validate();
    if (n_inputs < 1) throw ConfigError("build_reservoir: need at least one input");
    ReservoirWeights w;
    w.a = random_recurrent_matrix(spec.d, spec.density, spec.rho, substream_seed(spec.seed, "A"));
    w.w_in = random_input_matrix(spec.d, n_inputs, spec.gamma, substream_seed(spec.seed, "W_in"));
    return w;
}

/// Same spec with twice the nodes and a seed derived from the original.
inline ReservoirSpec ro_2d_spec(const ReservoirSpec& spec) {
    ReservoirSpec out = spec;
    out.d = spec.d * 2;
    out.seed = substream_seed(spec.seed, "ro2d");
    return out;
}

/// Reservoir states r(k) for k in [start_step, start_step + cols). State k is
/// produced by inputs up to k - 1 and pairs with target sample k.
struct StateSequence {
    DenseMatrix states;  // d x n
    Eigen::Index start_step = 0;

    Eigen::Index size() const { return states.cols(); }
    Eigen::Index end_step() const { return start_step + states.cols(); }

    /// Columns for absolute steps [begin, end).
    auto span(Eigen::Index begin, Eigen::Index end) const {
        if (begin < start_step || end > end_step() || begin > end)
            throw DimensionError("state sequence: requested span outside recorded steps");
        return states.middleCols(begin - start_step, end - begin);
    }
};

/// r(k+1) = (1 - alpha) r(k) + alpha tanh(A r(k) + W_in u(k) + xi 1), r(0) = 0.
///
/// `inputs` holds one sample per row. Returns r(k) for k in [washout, N).
inline StateSequence drive(const ReservoirWeights& w, const ReservoirSpec& spec, const DenseMatrix& inputs,
                           Eigen::Index washout) {
    const Eigen::Index n = inputs.rows();
    if (inputs.cols() != w.n_inputs()) throw DimensionError("drive: input width differs from W_in");
    if (washout < 0 || washout >= n) throw ConfigError("drive: washout must be smaller than the input length");
    if (!inputs.allFinite()) throw DegenerateInput("drive: non-finite input");

    const Eigen::Index d = w.dim();
    StateSequence out;
    out.start_step = washout;
    out.states.resize(d, n - washout);
    Vector r = Vector::Zero(d);
    Vector pre(d);
    for (Eigen::Index k = 0; k < n; ++k) {
        if (k >= washout) out.states.col(k - washout) = r;
        if (k + 1 == n) break;
        pre.noalias() = w.a * r;
        pre.noalias() += w.w_in * inputs.row(k).transpose();
        pre.array() += spec.xi;
        r = (1.0 - spec.alpha) * r + spec.alpha * pre.array().tanh().matrix();
        if (!r.allFinite()) throw Divergence("drive: non-finite reservoir state", static_cast<std::size_t>(k + 1));
    }
    return out;
}

enum class FeatureKind { state, attention_augmented, polynomial };

inline std::string to_string(FeatureKind k) {
    switch (k) {
        case FeatureKind::state: return "state";
        case FeatureKind::attention_augmented: return "attention_augmented";
        case FeatureKind::polynomial: return "polynomial";
    }
    return "?";
}

inline FeatureKind feature_kind_from_string(const std::string& s) {
    if (s == "state") return FeatureKind::state;
    if (s == "attention_augmented") return FeatureKind::attention_augmented;
    if (s == "polynomial") return FeatureKind::polynomial;
    throw ConfigError("unknown feature kind '" + s + "'");
}

/// Regression features for a block of states (one state per column).
inline DenseMatrix make_features(const DenseMatrix& states, FeatureKind kind, const AttentionBank* bank = nullptr) {
    switch (kind) {
        case FeatureKind::state:
            return states;
        case FeatureKind::polynomial: {
            DenseMatrix f(2 * states.rows(), states.cols());
            f.topRows(states.rows()) = states;
            f.bottomRows(states.rows()) = states.array().square().matrix();
            return f;
        }
        case FeatureKind::attention_augmented:
            if (bank == nullptr) throw ConfigError("attention features need an attention bank");
            return attention_features(*bank, states);
    }
    return states;
}

struct Readout {
    DenseMatrix w_out;  // m x k
    Vector bias;        // m
    FeatureKind feature_kind = FeatureKind::state;

    Eigen::Index n_targets() const { return w_out.rows(); }
};

/// Ridge readout from states to targets (one sample per column in both).
inline Readout fit_readout(const DenseMatrix& states, const DenseMatrix& targets, double beta, FeatureKind kind,
                           const AttentionBank* bank = nullptr) {
    if (states.cols() != targets.cols()) throw DimensionError("fit_readout: states and targets are misaligned");
    RidgeProblem p{make_features(states, kind, bank), targets, beta};
    RidgeSolution sol = centered_ridge_fit(p);
    return Readout{std::move(sol.weights), std::move(sol.bias), kind};
}

/// s_hat = W_out features(r) + b, one estimate per column.
inline DenseMatrix apply_readout(const Readout& ro, const DenseMatrix& states, const AttentionBank* bank = nullptr) {
    const DenseMatrix f = make_features(states, ro.feature_kind, bank);
    if (f.rows() != ro.w_out.cols()) throw DimensionError("apply_readout: feature dimension differs from readout");
    return (ro.w_out * f).colwise() + ro.bias;
}

/// Open-loop inference of the plain observer: estimates for steps
/// [washout, N), one sample per row.
inline DenseMatrix infer(const ReservoirWeights& w, const ReservoirSpec& spec, const Readout& ro, const DenseMatrix& inputs,
                         Eigen::Index washout, const AttentionBank* bank = nullptr) {
    const StateSequence s = drive(w, spec, inputs, washout);
    return apply_readout(ro, s.states, bank).transpose();
}

}  // namespace rolab
