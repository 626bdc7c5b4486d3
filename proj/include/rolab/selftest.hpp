#pragma once

// Property suite run by `selftest` and by the acceptance binary.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "rolab/config.hpp"
#include "rolab/harness.hpp"
#include "rolab/infotheory.hpp"
#include "rolab/tables.hpp"

namespace rolab {

namespace selftest {

inline DenseMatrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    Rng rng(seed);
    DenseMatrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = uniform(rng, -1.0, 1.0);
    return m;
}

inline std::string sci(double v) {
    std::ostringstream s;
    s.precision(3);
    s << std::scientific << v;
    return s.str();
}

/// Ridge solution beats 200 random perturbations of weights and bias.
inline Check ridge_optimality() {
    RidgeProblem p{random_matrix(30, 300, 1), random_matrix(3, 300, 2), 1e-2};
    p.targets += 0.5 * p.states.topRows(3);
    const RidgeSolution sol = centered_ridge_fit(p);
    const double j0 = ridge_objective(p, sol.weights, sol.bias);
    Rng rng(3);
    int worse = 0;
    double min_gain = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 200; ++k) {
        const double eps = std::pow(10.0, uniform(rng, -6.0, -2.0));
        const DenseMatrix dw = eps * random_matrix(3, 30, 100 + static_cast<std::uint64_t>(k));
        const Vector db = eps * random_matrix(3, 1, 1000 + static_cast<std::uint64_t>(k)).col(0);
        const double j = ridge_objective(p, sol.weights + dw, sol.bias + db);
        min_gain = std::min(min_gain, (j - j0) / j0);
        if (j < j0 * (1.0 - 1e-13)) ++worse;
    }
    return {"C11", "ridge solution is optimal under perturbation", worse == 0,
            std::to_string(worse) + "/200 perturbations lower the objective; smallest relative increase " + sci(min_gain)};
}

/// Two different initial states under the same input sequence converge.
inline Check echo_state_contraction() {
    ReservoirSpec spec;
    spec.rho = 0.9;
    spec.seed = 11;
    const ReservoirWeights w = build_reservoir(spec, 1);
    const DenseMatrix u = random_matrix(1000, 1, 12);
    Vector a = random_matrix(spec.d, 1, 13).col(0), b = random_matrix(spec.d, 1, 14).col(0);
    const double d0 = (a - b).norm();
    auto step = [&](Vector& r, Eigen::Index k) {
        Vector pre = w.a * r + w.w_in * u.row(k).transpose();
        pre.array() += spec.xi;
        r = (1.0 - spec.alpha) * r + spec.alpha * pre.array().tanh().matrix();
    };
    for (Eigen::Index k = 0; k < u.rows(); ++k) {
        step(a, k);
        step(b, k);
    }
    const double ratio = (a - b).norm() / d0;
    return {"C11", "echo-state contraction at rho = 0.9", ratio < 1e-6,
            "state distance shrinks by " + sci(ratio) + " over 1000 steps"};
}

inline Check svd_orthonormality() {
    const TruncatedSvd s = truncated_svd(random_matrix(400, 200, 21), 60);
    const double err = (s.u_h.transpose() * s.u_h - DenseMatrix::Identity(60, 60)).cwiseAbs().maxCoeff();
    return {"C11", "SVD basis orthonormal to 1e-8", err <= 1e-8, "max |U^T U - I| = " + sci(err)};
}

/// Rossler x input: one shared reservoir, training and test blocks.
struct RosslerFixture {
    DenseMatrix train_states, test_states, train_targets, test_targets;
};

inline RosslerFixture rossler_fixture() {
    const ExperimentConfig cfg = preset_config("rossler");
    OdeRunOptions ro;
    ro.seed = 31;
    const Trajectory tr = simulate_ode(cfg.ode, 1500, cfg.dt, ro);
    const DenseMatrix u = apply_normalization(tr.values.leftCols(1), normalization_stats(tr.values.leftCols(1), {100, 500}));
    ReservoirSpec spec = cfg.reservoir;
    spec.seed = 32;
    const StateSequence st = drive(build_reservoir(spec, 1), spec, u, 100);
    RosslerFixture f;
    f.train_states = st.span(100, 500);
    f.test_states = st.span(500, 1500);
    f.train_targets = tr.values.middleRows(100, 400).rightCols(2).transpose();
    f.test_targets = tr.values.middleRows(500, 1000).rightCols(2).transpose();
    return f;
}

inline Check grbf_range(const RosslerFixture& f) {
    AttentionOptions ao;
    ao.rank = FixedRank{10};
    const AttentionBank bank = build_attention(f.train_states, ao, 41);
    const DenseMatrix l = reduce_states(bank, f.test_states);
    double lo = 1.0, hi = 0.0;
    for (Eigen::Index t = 0; t < l.cols(); ++t)
        for (Eigen::Index i = 0; i < bank.n_centers(); ++i) {
            const double phi = attention_weight(l.col(t), bank.centers.col(i), bank.sigma);
            lo = std::min(lo, phi);
            hi = std::max(hi, phi);
        }
    const double self = attention_weight(bank.centers.col(0), bank.centers.col(0), bank.sigma);
    return {"C11", "GRBF weights lie in (0, 1] and equal 1 at a center", lo > 0.0 && hi <= 1.0 && self == 1.0,
            "range [" + sci(lo) + ", " + sci(hi) + "], phi(c, c) = " + sci(self)};
}

/// With sigma very large the attention half of the features is constant,
/// so ROA reduces to a ridge readout on the rank-h reduced states.
inline Check grbf_wide_limit(const RosslerFixture& f) {
    AttentionOptions ao;
    ao.rank = FixedRank{20};
    ao.sigma = 1e8;
    const AttentionBank bank = build_attention(f.train_states, ao, 42);
    const double beta = 1e-8;
    const Readout roa = fit_readout(f.train_states, f.train_targets, beta, FeatureKind::attention_augmented, &bank);
    const double e_roa = (apply_readout(roa, f.test_states, &bank) - f.test_targets).squaredNorm();
    const Readout ro = fit_readout(reduce_states(bank, f.train_states), f.train_targets, beta, FeatureKind::state);
    const double e_ro = (apply_readout(ro, reduce_states(bank, f.test_states)) - f.test_targets).squaredNorm();
    const double rel = std::abs(e_roa - e_ro) / e_ro;
    return {"C11", "ROA with sigma -> infinity matches rank-h RO within 5%", rel <= 0.05,
            "relative MSE difference " + sci(rel)};
}

inline Check ks_mean_conservation() {
    KsSpec spec;
    KsRunOptions o;
    o.washout_steps = 0;
    std::vector<double> y0 = ks_random_init(spec.grid_points, 51);
    for (std::size_t i = 0; i < y0.size(); ++i) y0[i] += 0.3 + 0.5 * std::sin(2.0 * std::numbers::pi * i / y0.size());
    o.init = y0;
    const Trajectory tr = simulate_ks(spec, 1001, o);
    const Vector means = tr.values.rowwise().mean();
    const double drift = (means.array() - means[0]).abs().maxCoeff();
    return {"C11", "KS spatial mean conserved to 1e-8 over 1000 steps", drift <= 1e-8, "max drift " + sci(drift)};
}

inline Check lorenz_symmetry() {
    const OdeSystemSpec sys = OdeSystemSpec::standard(OdeKind::lorenz);
    OdeRunOptions a, b;
    a.washout_steps = b.washout_steps = 0;
    a.init = State3{1.3, -0.7, 20.0};
    b.init = State3{-1.3, 0.7, 20.0};
    const Trajectory ta = simulate_ode(sys, 1000, 0.05, a), tb = simulate_ode(sys, 1000, 0.05, b);
    const double err = std::max({(ta.values.col(0) + tb.values.col(0)).cwiseAbs().maxCoeff(),
                                 (ta.values.col(1) + tb.values.col(1)).cwiseAbs().maxCoeff(),
                                 (ta.values.col(2) - tb.values.col(2)).cwiseAbs().maxCoeff()});
    return {"C11", "Lorenz (x, y, z) -> (-x, -y, z) symmetry to 1e-9", err <= 1e-9, "max deviation " + sci(err)};
}

inline std::vector<Check> te_properties() {
    std::vector<Check> out;
    Rng rng(61);
    double min_te = std::numeric_limits<double>::infinity();
    double self_max = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        Symbols a(5000), b(5000);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = static_cast<std::uint32_t>(uniform_index(rng, 8));
            b[i] = i > 0 && uniform(rng, 0.0, 1.0) < 0.3 ? a[i - 1] : static_cast<std::uint32_t>(uniform_index(rng, 8));
        }
        for (int l = 1; l <= 3; ++l) {
            TeSpec s;
            s.l = l;
            s.k = 1 + trial % 2;
            min_te = std::min({min_te, transfer_entropy_symbols(a, b, s).nats, transfer_entropy_symbols(b, a, s).nats});
        }
        TeSpec s;
        self_max = std::max(self_max, transfer_entropy_symbols(a, a, s).nats);
    }
    out.push_back({"C11", "TE is nonnegative", min_te >= 0.0, "smallest estimate " + sci(min_te)});
    out.push_back({"C11", "TE(I -> I) = 0", self_max == 0.0, "largest estimate " + sci(self_max)});

    Symbols j(50000), i(50000);
    for (auto& v : j) v = static_cast<std::uint32_t>(uniform_index(rng, 8));
    i[0] = 0;
    for (std::size_t t = 1; t < i.size(); ++t) i[t] = j[t - 1];
    const double te = transfer_entropy_symbols(i, j, TeSpec{}).nats;
    const double rel = std::abs(te - std::log(8.0)) / std::log(8.0);
    out.push_back({"C11", "shift-by-one TE = ln 8 within 2%", rel <= 0.02, "TE " + sci(te) + " nats, relative error " + sci(rel)});
    return out;
}

/// Same experiment twice, serially and on two workers: identical numbers.
inline Check determinism() {
    ExperimentConfig c = preset_config("rossler");
    c.n_runs = 3;
    c.inference_len = 500;
    c.variants = {Variant::RO, Variant::RORA};
    c.threads = 1;
    const ExperimentReport a = run_experiment(c);
    c.threads = 2;
    const ExperimentReport b = run_experiment(c);
    bool same = a.runs.size() == b.runs.size();
    for (std::size_t r = 0; same && r < a.runs.size(); ++r) {
        const auto &x = a.runs[r], &y = b.runs[r];
        same = x.error == y.error && x.data_hash == y.data_hash && x.layer_seed == y.layer_seed &&
               x.variants.size() == y.variants.size();
        for (std::size_t v = 0; same && v < x.variants.size(); ++v)
            same = x.variants[v].mse.size() == y.variants[v].mse.size() &&
                   std::memcmp(x.variants[v].mse.data(), y.variants[v].mse.data(),
                               sizeof(double) * static_cast<std::size_t>(x.variants[v].mse.size())) == 0;
    }
    return {"C11", "bitwise determinism under a fixed master seed", same && a.completed() == 3,
            same ? "3 runs, 2 variants identical across thread counts" : "reports differ"};
}

}  // namespace selftest

/// Runs the property suite; the last check is the wall-time budget.
inline std::vector<Check> run_selftest(const std::function<void(const Check&)>& on_check = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Check> out;
    auto add = [&](Check c) {
        if (on_check) on_check(c);
        out.push_back(std::move(c));
    };
    add(selftest::ridge_optimality());
    add(selftest::echo_state_contraction());
    add(selftest::svd_orthonormality());
    {
        const auto f = selftest::rossler_fixture();
        add(selftest::grbf_range(f));
        add(selftest::grbf_wide_limit(f));
    }
    add(selftest::ks_mean_conservation());
    add(selftest::lorenz_symmetry());
    for (auto& c : selftest::te_properties()) add(std::move(c));
    add(selftest::determinism());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    add({"C11", "property suite within 2 minutes", secs < 120.0, selftest::sci(secs) + " s"});
    return out;
}

}  // namespace rolab
