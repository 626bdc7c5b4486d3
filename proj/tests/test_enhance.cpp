#include <gtest/gtest.h>

#include <cmath>

#include "rolab/config.hpp"
#include "rolab/enhance.hpp"
#include "rolab/harness.hpp"

using namespace rolab;

namespace {

const std::vector<Variant> kAll{Variant::RO, Variant::ROR, Variant::ROR_al, Variant::ROA, Variant::RORA, Variant::RO2d, Variant::PRC};

/// Rossler x input, prepared the way the harness does it, with a shorter
/// inference window to keep the tests quick.
struct Fixture {
    ExperimentConfig cfg;
    RunData data;
    TrainingLayout layout;
};

const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture x;
        x.cfg = preset_config("rossler");
        x.cfg.inference_len = 300;
        x.data = prepare_run(x.cfg, 0);
        x.layout = training_layout(x.cfg);
        return x;
    }();
    return f;
}

TrainedObserver train(Variant v, const DenseMatrix& inputs, const DenseMatrix& targets, const ObserverConfig* oc = nullptr) {
    const Fixture& f = fixture();
    const ObserverConfig cfg = oc ? *oc : observer_config(f.cfg, f.data.layer_seed);
    return train_observer(v, cfg, inputs, targets, f.layout, f.data.links);
}

TrainedObserver train(Variant v) { return train(v, fixture().data.inputs, fixture().data.targets); }

}  // namespace

TEST(Variant, NamesRoundTrip) {
    for (Variant v : kAll) EXPECT_EQ(variant_from_string(to_string(v)), v);
    EXPECT_EQ(variant_from_string("ROR_al"), Variant::ROR_al);
    EXPECT_THROW(variant_from_string("RORX"), ConfigError);
    EXPECT_TRUE(has_residual(Variant::RORA));
    EXPECT_FALSE(has_residual(Variant::ROA));
    EXPECT_TRUE(has_attention(Variant::ROA));
    EXPECT_FALSE(has_attention(Variant::ROR));
}

TEST(Observer, FitIntervals) {
    const auto& L = fixture().layout;
    const TrainedObserver ror = train(Variant::ROR), al = train(Variant::ROR_al), ro = train(Variant::RO);
    EXPECT_EQ(ror.basic_fit.begin, L.train_begin());
    EXPECT_EQ(ror.basic_fit.end, L.split());
    EXPECT_EQ(ror.residual_fit.begin, L.split());
    EXPECT_EQ(ror.residual_fit.end, L.train_end());
    EXPECT_EQ(al.basic_fit.end, L.train_end());
    EXPECT_EQ(al.residual_fit.begin, L.train_begin());
    EXPECT_EQ(ro.basic_fit.end, L.train_end());
    EXPECT_FALSE(ro.residual.has_value());
}

TEST(Observer, StructurePerVariant) {
    EXPECT_TRUE(train(Variant::ROA).basic_bank.has_value());
    const TrainedObserver rora = train(Variant::RORA);
    ASSERT_TRUE(rora.residual.has_value());
    EXPECT_TRUE(rora.basic_bank.has_value());
    EXPECT_TRUE(rora.residual->bank.has_value());
    EXPECT_FALSE(train(Variant::ROR).residual->bank.has_value());
    EXPECT_EQ(train(Variant::RO2d).basic.dim(), 2 * fixture().cfg.reservoir.d);
    EXPECT_EQ(train(Variant::PRC).basic_readout.feature_kind, FeatureKind::polynomial);
    EXPECT_EQ(train(Variant::PRC).basic_readout.w_out.cols(), 2 * fixture().cfg.reservoir.d);
}

TEST(Observer, EstimateIsBasicPlusCorrection) {
    const auto& d = fixture().data;
    for (Variant v : kAll) {
        const ObserverOutput o = run_observer(train(v), d.inputs);
        EXPECT_EQ(o.start_step, fixture().layout.washout);
        EXPECT_EQ(o.estimate.rows(), d.inputs.rows() - fixture().layout.washout);
        EXPECT_LT((o.estimate - o.basic - o.correction).cwiseAbs().maxCoeff(), 1e-14) << to_string(v);
        if (!has_residual(v)) {
            EXPECT_EQ(o.correction.cwiseAbs().maxCoeff(), 0.0);
        }
    }
}

TEST(Observer, NoTargetDataAfterTraining) {
    // Scrambling targets after the training span leaves every trained
    // observer, and hence every inference output, unchanged.
    const auto& d = fixture().data;
    DenseMatrix scrambled = d.targets;
    const Eigen::Index end = fixture().layout.train_end();
    scrambled.bottomRows(scrambled.rows() - end).setConstant(1e6);
    for (Variant v : {Variant::RO, Variant::ROR, Variant::RORA}) {
        const ObserverOutput a = run_observer(train(v), d.inputs);
        const ObserverOutput b = run_observer(train(v, d.inputs, scrambled), d.inputs);
        EXPECT_EQ(a.estimate, b.estimate) << to_string(v);
    }
}

TEST(Observer, ResidualModuleIgnoresSecondHalfInBasicFit) {
    // ROR's basic readout sees only [W, W+T/2): targets in the second half
    // change the residual readout but not the basic one.
    const auto& d = fixture().data;
    DenseMatrix t2 = d.targets;
    const auto& L = fixture().layout;
    t2.middleRows(L.split(), L.train_end() - L.split()).array() += 0.5;
    const TrainedObserver a = train(Variant::ROR), b = train(Variant::ROR, d.inputs, t2);
    EXPECT_EQ(a.basic_readout.w_out, b.basic_readout.w_out);
    EXPECT_NE(a.residual->readout.w_out, b.residual->readout.w_out);
}

TEST(Observer, InferenceIsCausal) {
    const auto& d = fixture().data;
    const TrainedObserver obs = train(Variant::RORA);
    DenseMatrix u = d.inputs;
    const Eigen::Index k = 700;
    u.bottomRows(u.rows() - k).array() += 3.0;
    const ObserverOutput a = run_observer(obs, d.inputs), b = run_observer(obs, u);
    // state at step k depends on inputs up to k - 1; the residual input at k uses u(k)
    const Eigen::Index rows = k - obs.washout;
    EXPECT_EQ(a.basic.topRows(rows + 1), b.basic.topRows(rows + 1));
    EXPECT_EQ(a.estimate.topRows(rows), b.estimate.topRows(rows));
    EXPECT_NE(a.estimate.row(rows + 1), b.estimate.row(rows + 1));
}

TEST(Observer, InputResidualsInNormalizedUnits) {
    DenseMatrix u(2, 1), est(2, 2);
    u << 0.5, -1.0;
    est << 3.0, 9.0, 1.0, 9.0;
    const std::vector<InputLink> links{{0, 2.0, 4.0}};
    const DenseMatrix du = input_residuals(u, est, links);
    EXPECT_DOUBLE_EQ(du(0, 0), 0.5 - 0.25);
    EXPECT_DOUBLE_EQ(du(1, 0), -1.0 + 0.25);
    EXPECT_THROW(input_residuals(u, est, {{5, 0.0, 1.0}}), DimensionError);
}

TEST(Observer, DriveResidualMatchesRecurrence) {
    ReservoirSpec s;
    s.d = 30;
    s.alpha = 0.6;
    s.xi = 0.2;
    s.seed = 3;
    const ReservoirWeights basic = build_reservoir(s, 1);
    const ReservoirWeights res = build_residual_weights(s, basic, ResidualInputWeights::fresh);
    DenseMatrix u = DenseMatrix::Random(80, 1);
    const StateSequence st = drive(basic, s, u, 10);
    const DenseMatrix du = DenseMatrix::Random(st.size(), 1);
    const double lambda = 0.8;
    const StateSequence rs = drive_residual(res, lambda, s, basic.a, st, du);
    const DenseMatrix A(basic.a), B(res.a);
    Vector r = Vector::Zero(30);
    for (Eigen::Index k = 0; k < st.size(); ++k) {
        EXPECT_LT((rs.states.col(k) - r).cwiseAbs().maxCoeff(), 1e-13);
        const Vector pre = lambda * B * r + (1 - lambda) * A * st.states.col(k) + res.w_in * du(k, 0) + Vector::Constant(30, s.xi);
        r = ((1 - s.alpha) * r.array() + s.alpha * pre.array().tanh()).matrix();
    }
    EXPECT_THROW(drive_residual(res, 0.0, s, basic.a, st, du), ConfigError);
    EXPECT_THROW(drive_residual(res, lambda, s, basic.a, st, du.topRows(5)), DimensionError);
}

TEST(Observer, ResidualInputWeightModes) {
    ReservoirSpec s;
    s.d = 40;
    s.seed = 4;
    const ReservoirWeights basic = build_reservoir(s, 2);
    EXPECT_EQ(build_residual_weights(s, basic, ResidualInputWeights::shared).w_in, basic.w_in);
    EXPECT_NE(build_residual_weights(s, basic, ResidualInputWeights::fresh).w_in, basic.w_in);
    EXPECT_NE(DenseMatrix(build_residual_weights(s, basic, ResidualInputWeights::fresh).a), DenseMatrix(basic.a));
}

TEST(Observer, ResidualReadoutReducesInSampleError) {
    // On the interval it is fitted on, the residual readout can only lower
    // the squared error of the basic estimate (ridge with a tiny penalty).
    const auto& d = fixture().data;
    for (Variant v : {Variant::ROR, Variant::ROR_al, Variant::RORA}) {
        const TrainedObserver obs = train(v);
        const ObserverOutput o = run_observer(obs, d.inputs);
        const auto b = obs.residual_fit.begin - o.start_step, n = obs.residual_fit.size();
        const DenseMatrix tgt = d.targets.middleRows(obs.residual_fit.begin, n);
        const double e_basic = (o.basic.middleRows(b, n) - tgt).squaredNorm();
        const double e_full = (o.estimate.middleRows(b, n) - tgt).squaredNorm();
        EXPECT_LT(e_full, e_basic) << to_string(v);
    }
}

TEST(Observer, RejectsBadLayouts) {
    const auto& d = fixture().data;
    const ObserverConfig oc = observer_config(fixture().cfg, 1);
    EXPECT_THROW(train_observer(Variant::RO, oc, d.inputs, d.targets, {100, 2}, d.links), DegenerateInput);
    EXPECT_THROW(train_observer(Variant::RO, oc, d.inputs, d.targets.topRows(10), {100, 400}, d.links), DimensionError);
    EXPECT_THROW(train_observer(Variant::ROR, oc, d.inputs, d.targets, {100, 400}, {}), ConfigError);
}

TEST(Observer, RoaWithHugeSigmaMatchesReducedRo) {
    // With sigma -> infinity every attention weight is 1, g is constant and
    // ROA collapses to a ridge readout on the rank-h reduced states.
    const auto& f = fixture();
    ObserverConfig oc = observer_config(f.cfg, f.data.layer_seed);
    oc.attention.sigma = 1e9;
    oc.attention.rank = FixedRank{25};
    const TrainedObserver roa = train(Variant::ROA, f.data.inputs, f.data.targets, &oc);
    const ObserverOutput o = run_observer(roa, f.data.inputs);

    const StateSequence st = drive(roa.basic, roa.spec, f.data.inputs, f.layout.washout);
    const DenseMatrix fit = reduce_states(*roa.basic_bank, st.span(roa.basic_fit.begin, roa.basic_fit.end));
    const Readout ro = fit_readout(fit, f.data.targets.middleRows(roa.basic_fit.begin, roa.basic_fit.size()).transpose(),
                                   roa.spec.beta, FeatureKind::state);
    const DenseMatrix est = apply_readout(ro, reduce_states(*roa.basic_bank, st.states)).transpose();
    const Eigen::Index first = f.layout.train_end() - o.start_step, n = f.cfg.inference_len;
    const Vector e_roa = mse(o.estimate.middleRows(first, n), f.data.truth.middleRows(f.layout.train_end(), n));
    const Vector e_ro = mse(est.middleRows(first, n), f.data.truth.middleRows(f.layout.train_end(), n));
    for (Eigen::Index t = 1; t < 3; ++t) EXPECT_NEAR(e_roa[t], e_ro[t], 0.05 * e_ro[t]);
}
