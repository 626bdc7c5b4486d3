#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "rolab/attention.hpp"
#include "rolab/dynamics.hpp"
#include "rolab/numerics.hpp"
#include "rolab/reservoir.hpp"
#include "rolab/rng.hpp"

using namespace rolab;

namespace {

DenseMatrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    Rng rng(seed);
    DenseMatrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = uniform(rng, -1.0, 1.0);
    return m;
}

double dense_spectral_radius(const SparseMatrix& m) {
    Eigen::EigenSolver<DenseMatrix> es(DenseMatrix(m), false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

// ---------------------------------------------------------------------------
// numerics

TEST(SpectralRadius, MatchesDenseEigensolver) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const SparseMatrix a = random_recurrent_matrix(200, 0.05, 1.0, seed);
        // rescaled so the radius is not the construction value
        const SparseMatrix b = a * 2.7;
        const double oracle = dense_spectral_radius(b);
        EXPECT_NEAR(spectral_radius(b).value, oracle, 1e-8 * oracle);
    }
}

TEST(SpectralRadius, DiagonalAndNilpotent) {
    SparseMatrix d(3, 3);
    d.insert(0, 0) = 0.5;
    d.insert(1, 1) = -2.0;
    d.insert(2, 2) = 1.0;
    EXPECT_NEAR(spectral_radius(d).value, 2.0, 1e-10);

    SparseMatrix n(3, 3);
    n.insert(0, 1) = 1.0;
    n.insert(1, 2) = 1.0;
    // eigenvalues of a 3x3 Jordan block move by O(eps^(1/3)) under rounding
    EXPECT_NEAR(spectral_radius(n).value, 0.0, 1e-4);
}

TEST(SpectralRadius, ScaleToRadius) {
    const SparseMatrix a = random_recurrent_matrix(150, 0.1, 1.0, 9) * 3.0;
    const SparseMatrix s = scale_to_radius(a, 0.9);
    EXPECT_NEAR(dense_spectral_radius(s), 0.9, 1e-8);
}

TEST(Ridge, MatchesNormalEquations) {
    RidgeProblem p{random_matrix(12, 80, 4), random_matrix(2, 80, 5), 0.3};
    const RidgeSolution s = centered_ridge_fit(p);
    // oracle: augmented least squares [W b] with unpenalized bias via explicit centering
    const Vector rm = p.states.rowwise().mean(), sm = p.targets.rowwise().mean();
    const DenseMatrix r = p.states.colwise() - rm, t = p.targets.colwise() - sm;
    const DenseMatrix g = r * r.transpose() + p.beta * DenseMatrix::Identity(12, 12);
    const DenseMatrix w = (t * r.transpose()) * g.inverse();
    EXPECT_LT((s.weights - w).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((s.bias - (sm - w * rm)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Ridge, GradientVanishesAtSolution) {
    RidgeProblem p{random_matrix(8, 60, 6), random_matrix(3, 60, 7), 1e-2};
    const RidgeSolution s = centered_ridge_fit(p);
    const DenseMatrix resid = (s.weights * p.states).colwise() + s.bias - p.targets;
    const DenseMatrix gw = resid * p.states.transpose() + p.beta * s.weights;
    const Vector gb = resid.rowwise().sum();
    EXPECT_LT(gw.cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT(gb.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Ridge, BetaZeroSingularThrows) {
    DenseMatrix st = random_matrix(5, 40, 8);
    st.row(4) = st.row(3);
    RidgeProblem p{st, random_matrix(1, 40, 9), 0.0};
    EXPECT_THROW(centered_ridge_fit(p), IllConditioned);
    p.beta = 1e-6;
    EXPECT_NO_THROW(centered_ridge_fit(p));
}

TEST(Ridge, RejectsMisalignedInput) {
    RidgeProblem p{random_matrix(5, 40, 8), random_matrix(1, 39, 9), 1.0};
    EXPECT_THROW(centered_ridge_fit(p), DimensionError);
}

TEST(Svd, OrthonormalBasisAndSpectrum) {
    const DenseMatrix m = random_matrix(300, 120, 10);
    const TruncatedSvd s = truncated_svd(m, 40);
    EXPECT_LT((s.u_h.transpose() * s.u_h - DenseMatrix::Identity(40, 40)).cwiseAbs().maxCoeff(), 1e-8);
    ASSERT_EQ(s.singulars.size(), 120);
    for (Eigen::Index i = 1; i < s.singulars.size(); ++i) EXPECT_GE(s.singulars[i - 1], s.singulars[i]);
    EXPECT_NEAR(s.singulars.squaredNorm(), m.squaredNorm(), 1e-8 * m.squaredNorm());
}

TEST(Svd, SvhtRecoversPlantedRank) {
    // rank-5 signal well above isotropic noise
    const DenseMatrix signal = 20.0 * random_matrix(200, 5, 11) * random_matrix(5, 400, 12);
    const DenseMatrix noisy = signal + 0.1 * random_matrix(200, 400, 13);
    const TruncatedSvd s = truncated_svd(noisy, 200);
    EXPECT_EQ(svht_rank(s.singulars, 200, 400), 5);
}

TEST(Svd, SvhtOmegaPolynomial) {
    for (double b : {0.1, 0.5, 1.0}) EXPECT_NEAR(svht_omega(b), 0.56 * b * b * b - 0.95 * b * b + 1.82 * b + 1.43, 1e-12);
}

// ---------------------------------------------------------------------------
// dynamics

TEST(Ode, Rk4StepMatchesHandExpansion) {
    const OdeSystemSpec spec = OdeSystemSpec::standard(OdeKind::rossler);
    const double a = spec.param("a"), b = spec.param("b"), c = spec.param("c");
    auto f = [&](const std::array<double, 3>& s) {
        return std::array<double, 3>{-s[1] - s[2], s[0] + a * s[1], b + s[2] * (s[0] - c)};
    };
    const std::array<double, 3> s0{1.0, -2.0, 0.5};
    const double h = 0.01;
    auto add = [](std::array<double, 3> x, const std::array<double, 3>& y, double k) {
        for (int i = 0; i < 3; ++i) x[i] += k * y[i];
        return x;
    };
    const auto k1 = f(s0), k2 = f(add(s0, k1, h / 2)), k3 = f(add(s0, k2, h / 2)), k4 = f(add(s0, k3, h));
    std::array<double, 3> oracle{};
    for (int i = 0; i < 3; ++i) oracle[i] = s0[i] + h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    const auto got = rk4_step(OdeField(spec), s0, h);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(got[i], oracle[i], 1e-15);
}

TEST(Ode, Rk4FourthOrderConvergence) {
    const OdeSystemSpec spec = OdeSystemSpec::standard(OdeKind::lorenz);
    const OdeField f(spec);
    auto integrate = [&](int n) {
        State3 s{1.0, 1.0, 1.0};
        for (int i = 0; i < n; ++i) s = rk4_step(f, s, 0.1 / n);
        return s;
    };
    const State3 ref = integrate(8192);
    auto err = [&](int n) {
        const State3 s = integrate(n);
        double e = 0.0;
        for (int i = 0; i < 3; ++i) e = std::max(e, std::abs(s[i] - ref[i]));
        return e;
    };
    for (int n : {8, 16, 32}) EXPECT_NEAR(std::log2(err(n) / err(2 * n)), 4.0, 0.1) << "n = " << n;
}

TEST(Ode, LorenzSignSymmetry) {
    const OdeSystemSpec sys = OdeSystemSpec::standard(OdeKind::lorenz);
    OdeRunOptions a, b;
    a.washout_steps = b.washout_steps = 0;
    a.init = State3{0.4, 2.0, 15.0};
    b.init = State3{-0.4, -2.0, 15.0};
    const Trajectory x = simulate_ode(sys, 1000, 0.05, a), y = simulate_ode(sys, 1000, 0.05, b);
    EXPECT_LE((x.values.col(0) + y.values.col(0)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((x.values.col(1) + y.values.col(1)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((x.values.col(2) - y.values.col(2)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Ode, ChuaFieldAndOddSymmetry) {
    const OdeSystemSpec c = OdeSystemSpec::standard(OdeKind::chua);
    const OdeField f(c);
    const double a = c.param("a"), b = c.param("b"), c1 = c.param("c1"), c2 = c.param("c2"), c3 = c.param("c3");
    const State3 p{0.7, -0.2, 0.4}, q{-0.7, 0.2, -0.4};
    const double g = c1 * 0.7 + c2 * 0.49 + c3 * 0.343;
    const State3 fp = f(p), fq = f(q);
    EXPECT_NEAR(fp[0], a * (-0.2 - g), 1e-14);
    EXPECT_NEAR(fp[1], 0.7 + 0.2 + 0.4, 1e-14);
    EXPECT_NEAR(fp[2], b * -0.2, 1e-14);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(fp[i], -fq[i], 1e-14);
}

TEST(Ode, SeededInitialConditions) {
    const OdeSystemSpec sys = OdeSystemSpec::standard(OdeKind::rossler);
    OdeRunOptions o;
    o.seed = 5;
    const Trajectory a = simulate_ode(sys, 200, 0.1, o), b = simulate_ode(sys, 200, 0.1, o);
    EXPECT_EQ(a.values, b.values);
    o.seed = 6;
    EXPECT_NE(a.values, simulate_ode(sys, 200, 0.1, o).values);
    o.init_half_width = 0.0;
    EXPECT_THROW(simulate_ode(sys, 10, 0.1, o), ConfigError);
}

TEST(Ode, DivergenceIsReported) {
    OdeSystemSpec sys = OdeSystemSpec::standard(OdeKind::lorenz);
    OdeRunOptions o;
    o.init = State3{1e200, 1e200, 1e200};
    o.washout_steps = 0;
    EXPECT_THROW(simulate_ode(sys, 100, 0.05, o), Divergence);
}

TEST(Ks, SpatialMeanConserved) {
    KsSpec spec;
    KsRunOptions o;
    o.washout_steps = 0;
    std::vector<double> y0(64);
    for (int i = 0; i < 64; ++i) y0[static_cast<std::size_t>(i)] = 0.7 + std::cos(2 * std::numbers::pi * i / 64.0) + 0.1 * std::sin(6 * std::numbers::pi * i / 64.0);
    o.init = y0;
    const Trajectory t = simulate_ks(spec, 1001, o);
    const Vector m = t.values.rowwise().mean();
    EXPECT_LE((m.array() - 0.7).abs().maxCoeff(), 1e-8);
}

TEST(Ks, LinearModeDecaysAtAnalyticRate) {
    // a tiny single mode evolves linearly: amplitude ~ exp((q^2 - q^4) t)
    KsSpec spec;
    spec.domain_length = 22.0;
    KsRunOptions o;
    o.washout_steps = 0;
    const int k = 5;
    const double q = 2 * std::numbers::pi * k / spec.domain_length;
    std::vector<double> y0(64);
    for (int i = 0; i < 64; ++i) y0[static_cast<std::size_t>(i)] = 1e-8 * std::cos(2 * std::numbers::pi * k * i / 64.0);
    o.init = y0;
    const Trajectory t = simulate_ks(spec, 41, o);
    const double ratio = t.values.row(40).cwiseAbs().maxCoeff() / t.values.row(0).cwiseAbs().maxCoeff();
    EXPECT_NEAR(std::log(ratio), (q * q - q * q * q * q) * 40 * spec.dt, 1e-6);
}

TEST(Ks, BoundedChaos) {
    KsRunOptions o;
    o.seed = 3;
    const Trajectory t = simulate_ks(KsSpec{}, 2000, o);
    EXPECT_TRUE(t.values.allFinite());
    EXPECT_LT(t.values.cwiseAbs().maxCoeff(), 10.0);
    EXPECT_GT(t.values.cwiseAbs().maxCoeff(), 0.5);
}

TEST(Normalization, ReferenceWindowOnly) {
    DenseMatrix v(6, 1);
    v << 1, 3, 1, 3, 100, -100;
    const NormalizationStats st = normalization_stats(v, {0, 4});
    EXPECT_DOUBLE_EQ(st.mean[0], 2.0);
    EXPECT_DOUBLE_EQ(st.scale[0], 1.0);
    const DenseMatrix n = apply_normalization(v, st);
    EXPECT_DOUBLE_EQ(n(4, 0), 98.0);
    EXPECT_EQ(invert_normalization(n, st), v);
    DenseMatrix c = DenseMatrix::Constant(5, 1, 2.0);
    EXPECT_THROW(normalization_stats(c, {0, 5}), DegenerateInput);
    EXPECT_THROW(normalization_stats(v, {0, 7}), ConfigError);
}

TEST(Noise, BoundedAndSeeded) {
    Trajectory t;
    t.values = DenseMatrix::Zero(5000, 2);
    t.var_names = {"a", "b"};
    const Trajectory n = add_uniform_noise(t, {0.1}, 4);
    EXPECT_LE(n.values.cwiseAbs().maxCoeff(), 0.1);
    EXPECT_GT(n.values.cwiseAbs().maxCoeff(), 0.09);
    EXPECT_NEAR(n.values.mean(), 0.0, 0.005);
    EXPECT_EQ(n.values, add_uniform_noise(t, {0.1}, 4).values);
    EXPECT_EQ(add_uniform_noise(t, {0.0}, 4).values, t.values);
}

TEST(TrajectoryCsv, RoundTripIsBitwise) {
    OdeRunOptions o;
    o.seed = 8;
    const Trajectory t = simulate_ode(OdeSystemSpec::standard(OdeKind::chua), 300, 0.1, o);
    std::stringstream ss;
    write_trajectory_csv(ss, t);
    const Trajectory r = read_trajectory_csv(ss);
    EXPECT_EQ(r.var_names, t.var_names);
    EXPECT_EQ(r.values, t.values);
    EXPECT_DOUBLE_EQ(r.dt, t.dt);
}

// ---------------------------------------------------------------------------
// reservoir

TEST(Reservoir, LayerStatistics) {
    ReservoirSpec s;
    s.seed = 21;
    const ReservoirWeights w = build_reservoir(s, 2);
    EXPECT_NEAR(static_cast<double>(w.a.nonZeros()) / (400.0 * 400.0), 0.05, 0.005);
    EXPECT_NEAR(dense_spectral_radius(w.a), 1.0, 1e-8);
    EXPECT_LE(w.w_in.cwiseAbs().maxCoeff(), s.gamma);
    EXPECT_EQ(w.w_in.rows(), 400);
    EXPECT_EQ(w.w_in.cols(), 2);
    const ReservoirWeights again = build_reservoir(s, 2);
    EXPECT_EQ(DenseMatrix(again.a), DenseMatrix(w.a));
    EXPECT_EQ(again.w_in, w.w_in);
}

TEST(Reservoir, SpecValidation) {
    ReservoirSpec s;
    s.alpha = 0.0;
    EXPECT_THROW(s.validate(), ConfigError);
    s = {};
    s.density = 1.5;
    EXPECT_THROW(s.validate(), ConfigError);
    s = {};
    s.beta = -1.0;
    EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Reservoir, DriveMatchesDirectRecurrence) {
    ReservoirSpec s;
    s.d = 50;
    s.alpha = 0.7;
    s.xi = 0.3;
    s.seed = 22;
    const ReservoirWeights w = build_reservoir(s, 1);
    const DenseMatrix u = random_matrix(120, 1, 23);
    const StateSequence seq = drive(w, s, u, 20);
    const DenseMatrix a(w.a);
    Vector r = Vector::Zero(50);
    for (Eigen::Index k = 0; k < 120; ++k) {
        if (k >= 20) {
            EXPECT_LT((seq.states.col(k - 20) - r).cwiseAbs().maxCoeff(), 1e-13) << "step " << k;
        }
        const Vector pre = (a * r + w.w_in * u(k, 0) + Vector::Constant(50, s.xi)).eval();
        r = ((1 - s.alpha) * r.array() + s.alpha * pre.array().tanh()).matrix();
    }
    EXPECT_EQ(seq.start_step, 20);
    EXPECT_EQ(seq.size(), 100);
}

TEST(Reservoir, StateBoundedByOne) {
    ReservoirSpec s;
    s.seed = 24;
    const ReservoirWeights w = build_reservoir(s, 1);
    const StateSequence seq = drive(w, s, 5.0 * random_matrix(500, 1, 25), 0);
    EXPECT_LE(seq.states.cwiseAbs().maxCoeff(), 1.0);
}

TEST(Reservoir, ReadoutRecoversLinearMap) {
    const DenseMatrix st = random_matrix(10, 200, 26);
    DenseMatrix w_true = random_matrix(2, 10, 27);
    const DenseMatrix tg = (w_true * st).colwise() + Vector::Constant(2, 0.5);
    const Readout ro = fit_readout(st, tg, 1e-12, FeatureKind::state);
    EXPECT_LT((ro.w_out - w_true).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((apply_readout(ro, st) - tg).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Reservoir, PolynomialFeatures) {
    DenseMatrix st(2, 1);
    st << 0.5, -2.0;
    const DenseMatrix f = make_features(st, FeatureKind::polynomial);
    ASSERT_EQ(f.rows(), 4);
    EXPECT_DOUBLE_EQ(f(2, 0), 0.25);
    EXPECT_DOUBLE_EQ(f(3, 0), 4.0);
}

TEST(Reservoir, TwoDimensionalBaselineSpec) {
    ReservoirSpec s;
    const ReservoirSpec d2 = ro_2d_spec(s);
    EXPECT_EQ(d2.d, 2 * s.d);
    EXPECT_DOUBLE_EQ(d2.rho, s.rho);
    EXPECT_NE(d2.seed, s.seed);
}

// ---------------------------------------------------------------------------
// attention

TEST(Attention, WeightClosedForm) {
    Vector l(2), c(2);
    l << 1.0, 2.0;
    c << 0.0, 0.0;
    EXPECT_NEAR(attention_weight(l, c, 1.5), std::exp(-5.0 / (2 * 2.25)), 1e-15);
    EXPECT_DOUBLE_EQ(attention_weight(c, c, 0.3), 1.0);
}

TEST(Attention, FeaturesMatchNaiveLoop) {
    const DenseMatrix states = random_matrix(40, 120, 31);
    AttentionOptions o;
    o.n_centers = 15;
    o.sigma = 0.8;
    o.rank = FixedRank{6};
    const AttentionBank bank = build_attention(states, o, 32);
    const DenseMatrix test = random_matrix(40, 10, 33);
    const DenseMatrix p = attention_features(bank, test);
    for (Eigen::Index t = 0; t < test.cols(); ++t) {
        const Vector l = bank.u_h.transpose() * (test.col(t) - bank.state_mean);
        Vector g = Vector::Zero(6);
        for (Eigen::Index i = 0; i < 15; ++i) {
            const double d2 = (l - bank.centers.col(i)).squaredNorm();
            g += std::exp(-d2 / (2 * 0.64)) * bank.centers.col(i);
        }
        g /= 15.0;
        EXPECT_LT((p.col(t).head(6) - l).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((p.col(t).tail(6) - g).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((attention_vector(l, bank) - g).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Attention, CentersAreDistinctTrainingStates) {
    const DenseMatrix states = random_matrix(20, 60, 34);
    AttentionOptions o;
    o.n_centers = 60;
    o.rank = FixedRank{20};
    const AttentionBank bank = build_attention(states, o, 35);
    const DenseMatrix reduced = bank.u_h.transpose() * (states.colwise() - bank.state_mean);
    std::set<Eigen::Index> used;
    for (Eigen::Index i = 0; i < 60; ++i)
        for (Eigen::Index t = 0; t < 60; ++t)
            if ((reduced.col(t) - bank.centers.col(i)).norm() < 1e-12) used.insert(t);
    EXPECT_EQ(used.size(), 60u);
    o.n_centers = 61;
    EXPECT_THROW(build_attention(states, o, 35), DegenerateInput);
}

TEST(Attention, AutoRankUsesHardThreshold) {
    const DenseMatrix low = 10.0 * random_matrix(50, 3, 36) * random_matrix(3, 300, 37) + 0.01 * random_matrix(50, 300, 38);
    const AttentionBank bank = build_attention(low, AttentionOptions{}, 39);
    EXPECT_EQ(bank.dim(), 3);
}
