#pragma once

// Gaussian radial-basis attention over a reduced reservoir state space.
//
// States are centered with the training mean and projected on the leading
// left singular vectors of the centered training state matrix; the attention
// vector is the unnormalized mean of the centers weighted by their Gaussian
// similarity to the current reduced state.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <variant>
#include <vector>

#include "rolab/error.hpp"
#include "rolab/numerics.hpp"
#include "rolab/rng.hpp"

namespace rolab {

struct AutoRank {};
struct FixedRank {
    Eigen::Index h = 10;
};
using RankMode = std::variant<AutoRank, FixedRank>;

struct AttentionBank {
    DenseMatrix u_h;      // d x h, orthonormal columns
    Vector state_mean;    // d, training-span mean used for centering
    DenseMatrix centers;  // h x n_c, one reduced state per column
    double sigma = 1.0;

    Eigen::Index dim() const { return u_h.cols(); }
    Eigen::Index n_centers() const { return centers.cols(); }
};

inline double attention_weight(const Vector& l, const Vector& c, double sigma) {
    if (l.size() != c.size()) throw DimensionError("attention_weight: dimension mismatch");
    return std::exp(-(l - c).squaredNorm() / (2.0 * sigma * sigma));
}

/// g = (1/N_c) sum_i phi_i(l) c_i
inline Vector attention_vector(const Vector& l, const AttentionBank& bank) {
    if (bank.n_centers() < 1) throw DegenerateInput("attention_vector: empty bank");
    if (l.size() != bank.dim()) throw DimensionError("attention_vector: dimension mismatch");
    Vector g = Vector::Zero(bank.dim());
    for (Eigen::Index i = 0; i < bank.n_centers(); ++i)
        g += attention_weight(l, bank.centers.col(i), bank.sigma) * bank.centers.col(i);
    return g / static_cast<double>(bank.n_centers());
}

/// l(t) = U_h^T (r(t) - r_mean) for every column.
inline DenseMatrix reduce_states(const AttentionBank& bank, const DenseMatrix& states) {
    if (states.rows() != bank.u_h.rows()) throw DimensionError("reduce_states: state dimension mismatch");
    return bank.u_h.transpose() * (states.colwise() - bank.state_mean);
}

/// p(t) = [l(t); g(t)] for every column (2h x n).
inline DenseMatrix attention_features(const AttentionBank& bank, const DenseMatrix& states) {
    const DenseMatrix l = reduce_states(bank, states);
    const Eigen::Index h = bank.dim();
    DenseMatrix p(2 * h, l.cols());
    p.topRows(h) = l;
    const double inv2s2 = 1.0 / (2.0 * bank.sigma * bank.sigma);
    const double inv_nc = 1.0 / static_cast<double>(bank.n_centers());
    // squared distances via ||l||^2 - 2 l.c + ||c||^2 (n x n_c)
    const Vector l2 = l.colwise().squaredNorm().transpose();
    const Vector c2 = bank.centers.colwise().squaredNorm().transpose();
    DenseMatrix dist = -2.0 * (l.transpose() * bank.centers);
    dist.colwise() += l2;
    dist.rowwise() += c2.transpose();
    const DenseMatrix phi = (-(dist.array().max(0.0)) * inv2s2).exp().matrix();  // n x n_c
    p.bottomRows(h) = (bank.centers * phi.transpose()) * inv_nc;
    return p;
}

struct AttentionOptions {
    Eigen::Index n_centers = 50;
    double sigma = 1.0;
    RankMode rank = AutoRank{};
};

/// Builds U_h from the centered training states and draws n_c distinct
/// training instants as centers.
inline AttentionBank build_attention(const DenseMatrix& training_states, const AttentionOptions& opt, std::uint64_t seed) {
    const Eigen::Index span = training_states.cols();
    if (opt.n_centers < 1) throw ConfigError("build_attention: need at least one center");
    if (opt.n_centers > span) throw DegenerateInput("build_attention: more centers than training states");
    if (!(opt.sigma > 0.0)) throw ConfigError("build_attention: sigma must be positive");
    if (span < 2) throw DegenerateInput("build_attention: need at least two training states");

    AttentionBank bank;
    bank.sigma = opt.sigma;
    bank.state_mean = training_states.rowwise().mean();
    const DenseMatrix centered = training_states.colwise() - bank.state_mean;
    const Eigen::Index full = std::min(centered.rows(), centered.cols());

    Eigen::Index h = 0;
    if (const auto* fixed = std::get_if<FixedRank>(&opt.rank)) {
        h = fixed->h;
        if (h < 1 || h > full) throw ConfigError("build_attention: fixed h out of range");
        bank.u_h = truncated_svd(centered, h).u_h;
    } else {
        TruncatedSvd svd = truncated_svd(centered, full);
        h = svht_rank(svd.singulars, centered.rows(), centered.cols());
        bank.u_h = svd.u_h.leftCols(h);
    }

    // Partial Fisher-Yates: the first n_c entries are a uniform sample
    // without replacement.
    Rng rng(seed);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(span));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (Eigen::Index i = 0; i < opt.n_centers; ++i) {
        const auto j = i + static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(span - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    const DenseMatrix reduced = bank.u_h.transpose() * centered;
    bank.centers.resize(h, opt.n_centers);
    for (Eigen::Index i = 0; i < opt.n_centers; ++i) bank.centers.col(i) = reduced.col(idx[static_cast<std::size_t>(i)]);
    return bank;
}

}  // namespace rolab
