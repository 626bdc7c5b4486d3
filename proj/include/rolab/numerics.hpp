#pragma once

// Matrix primitives shared by every observer variant: spectral radius of the
// sparse recurrent matrices, centered ridge regression for readouts, truncated
// SVD and the optimal hard threshold used to size the attention subspace.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "rolab/error.hpp"
#include "rolab/rng.hpp"

namespace rolab {

using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

namespace detail {

inline bool all_finite(const DenseMatrix& m) { return m.allFinite(); }

inline bool all_finite(const SparseMatrix& m) {
    for (Eigen::Index k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it)
            if (!std::isfinite(it.value())) return false;
    return true;
}

}  // namespace detail

struct SpectralRadius {
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
};

struct PowerIterationOptions {
    double rel_tol = 1e-10;
    int max_iterations = 10000;
    /// Krylov block used for the Ritz estimate at every restart. A block of
    /// one is plain power iteration; larger blocks resolve complex-conjugate
    /// and cyclic dominant eigenvalues, which are the norm for random graphs.
    int krylov_dim = 8;
    std::uint64_t seed = 0x5eed;
};

/// Largest eigenvalue modulus of a square sparse matrix.
///
/// Restarted power iteration: each restart applies the matrix krylov_dim
/// times to the current unit vector, takes the Ritz values of the small
/// Hessenberg projection, and continues from the last normalized iterate.
/// Convergence is declared when the max-modulus Ritz value changes by less
/// than rel_tol (relative) across three consecutive restarts.
inline SpectralRadius spectral_radius(const SparseMatrix& m, const PowerIterationOptions& opt = {}) {
    if (m.rows() != m.cols()) throw DimensionError("spectral_radius: matrix is not square");
    if (!detail::all_finite(m)) throw DegenerateInput("spectral_radius: non-finite entries");
    const Eigen::Index n = m.rows();
    SpectralRadius out;
    if (n == 0 || m.nonZeros() == 0) {
        out.converged = true;
        return out;
    }

    Rng rng(opt.seed);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(rng, -1.0, 1.0);
    v.normalize();

    const int k = static_cast<int>(std::min<Eigen::Index>(std::max(1, opt.krylov_dim), n));
    DenseMatrix basis(n, k + 1);
    DenseMatrix hess = DenseMatrix::Zero(k + 1, k);

    double prev = -1.0;
    int stable = 0;
    int applied = 0;
    while (applied < opt.max_iterations) {
        // Arnoldi with modified Gram-Schmidt; stops early on an invariant subspace.
        hess.setZero();
        basis.col(0) = v;
        int dim = k;
        for (int j = 0; j < k; ++j) {
            Vector w = m * basis.col(j);
            ++applied;
            for (int i = 0; i <= j; ++i) {
                hess(i, j) = basis.col(i).dot(w);
                w -= hess(i, j) * basis.col(i);
            }
            const double norm = w.norm();
            hess(j + 1, j) = norm;
            if (norm <= 1e-14 * std::max(1.0, hess.col(j).head(j + 1).norm())) {
                dim = j + 1;
                break;
            }
            basis.col(j + 1) = w / norm;
        }

        double estimate = 0.0;
        Eigen::EigenSolver<DenseMatrix> es(hess.topLeftCorner(dim, dim), false);
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
            estimate = std::max(estimate, std::abs(es.eigenvalues()[i]));

        out.value = estimate;
        out.iterations = applied;
        if (dim < k) {
            // Exact invariant subspace: Ritz values are eigenvalues.
            out.converged = true;
            return out;
        }
        if (prev >= 0.0 && std::abs(estimate - prev) <= opt.rel_tol * std::max(estimate, 1e-300)) {
            if (++stable >= 3) {
                out.converged = true;
                return out;
            }
        } else {
            stable = 0;
        }
        prev = estimate;

        // Restart from the power iterate m^k v.
        Vector next = v;
        for (int j = 0; j < k; ++j) {
            next = m * next;
            ++applied;
            const double nn = next.norm();
            if (nn == 0.0) {
                out.converged = true;
                return out;
            }
            next /= nn;
        }
        v = next;
    }
    return out;
}

/// Rescales m so that its spectral radius equals rho.
inline SparseMatrix scale_to_radius(const SparseMatrix& m, double rho, const PowerIterationOptions& opt = {}) {
    if (!(rho > 0.0)) throw ConfigError("scale_to_radius: rho must be positive");
    const SpectralRadius sr = spectral_radius(m, opt);
    if (!(sr.value > 0.0)) throw DegenerateInput("scale_to_radius: matrix has zero spectral radius");
    SparseMatrix out = m * (rho / sr.value);
    out.makeCompressed();
    return out;
}

/// Columns of states and targets are time samples.
struct RidgeProblem {
    DenseMatrix states;   // k x T
    DenseMatrix targets;  // m x T
    double beta = 0.0;
};

struct RidgeSolution {
    DenseMatrix weights;  // m x k
    Vector bias;          // m
};

/// Tikhonov-regularized affine regression with separately fitted bias.
///
/// weights = S R^T (R R^T + beta I)^-1 and bias = s_mean - weights r_mean,
/// where R and S are the column-centered states and targets. The symmetric
/// system is factorized with pivoted LDL^T; no inverse is formed.
inline RidgeSolution centered_ridge_fit(const RidgeProblem& p) {
    const Eigen::Index t = p.states.cols();
    if (p.targets.cols() != t) throw DimensionError("centered_ridge_fit: states and targets differ in sample count");
    if (t < 2) throw DegenerateInput("centered_ridge_fit: need at least two samples");
    if (!(p.beta >= 0.0)) throw ConfigError("centered_ridge_fit: beta must be nonnegative");
    if (!p.states.allFinite() || !p.targets.allFinite())
        throw DegenerateInput("centered_ridge_fit: non-finite data");

    const Vector r_mean = p.states.rowwise().mean();
    const Vector s_mean = p.targets.rowwise().mean();
    const DenseMatrix r = p.states.colwise() - r_mean;
    const DenseMatrix s = p.targets.colwise() - s_mean;

    const Eigen::Index k = r.rows();
    DenseMatrix gram = DenseMatrix::Zero(k, k);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(r);
    gram.diagonal().array() += p.beta;
    const DenseMatrix cross = r * s.transpose();  // k x m

    Eigen::LDLT<DenseMatrix, Eigen::Lower> ldlt(gram);
    if (ldlt.info() != Eigen::Success) throw IllConditioned("centered_ridge_fit: factorization failed");
    if (p.beta == 0.0) {
        const double scale = std::max(gram.diagonal().maxCoeff(), std::numeric_limits<double>::min());
        const double eps = std::numeric_limits<double>::epsilon();
        const auto d = ldlt.vectorD();
        if (!ldlt.isPositive() || d.minCoeff() <= static_cast<double>(k) * eps * scale || ldlt.rcond() < eps * k)
            throw IllConditioned("centered_ridge_fit: singular Gram matrix at beta = 0");
    }

    RidgeSolution sol;
    sol.weights = ldlt.solve(cross).transpose();
    sol.bias = s_mean - sol.weights * r_mean;
    return sol;
}

/// Objective sum_t ||W r(t) + b - s(t)||^2 + beta Tr(W W^T).
inline double ridge_objective(const RidgeProblem& p, const DenseMatrix& w, const Vector& b) {
    const DenseMatrix resid = (w * p.states).colwise() + b - p.targets;
    return resid.squaredNorm() + p.beta * w.squaredNorm();
}

struct TruncatedSvd {
    DenseMatrix u_h;   // rows x h, orthonormal columns
    Vector singulars;  // all min(rows, cols) singular values, descending
};

/// Leading h left singular vectors and the full singular spectrum.
inline TruncatedSvd truncated_svd(const DenseMatrix& r, Eigen::Index h) {
    const Eigen::Index full = std::min(r.rows(), r.cols());
    if (h < 1 || h > full) throw ConfigError("truncated_svd: h out of range");
    Eigen::BDCSVD<DenseMatrix> svd(r, Eigen::ComputeThinU);
    TruncatedSvd out;
    out.u_h = svd.matrixU().leftCols(h);
    out.singulars = svd.singularValues();
    return out;
}

/// Cubic approximation of the Gavish-Donoho coefficient for unknown noise.
inline double svht_omega(double aspect) {
    return 0.56 * aspect * aspect * aspect - 0.95 * aspect * aspect + 1.82 * aspect + 1.43;
}

/// Number of singular values above the optimal hard threshold
/// omega(aspect) * median(singulars), clamped to [1, len].
inline Eigen::Index svht_rank(const Vector& singulars, Eigen::Index rows, Eigen::Index cols) {
    if (singulars.size() == 0) throw DegenerateInput("svht_rank: empty singular list");
    if (rows < 1 || cols < 1) throw ConfigError("svht_rank: shape must be positive");
    const double aspect = static_cast<double>(std::min(rows, cols)) / static_cast<double>(std::max(rows, cols));

    std::vector<double> sorted(singulars.data(), singulars.data() + singulars.size());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    const double tau = svht_omega(aspect) * median;

    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < singulars.size(); ++i)
        if (singulars[i] > tau) ++count;
    return std::clamp<Eigen::Index>(count, 1, singulars.size());
}

}  // namespace rolab
