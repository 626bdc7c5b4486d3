#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "rolab/report.hpp"
#include "rolab/serialize.hpp"
#include "rolab/tables.hpp"

using namespace rolab;

namespace {

ExperimentConfig small(const std::string& preset = "rossler") {
    ExperimentConfig c = preset_config(preset);
    c.reservoir.d = 120;
    c.inference_len = 300;
    c.n_runs = 3;
    c.threads = 1;
    c.variants = {Variant::RO, Variant::ROR};
    return c;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

void expect_same_mse(const ExperimentReport& a, const ExperimentReport& b, Variant v) {
    for (std::size_t t = 0; t < a.target_names.size(); ++t) {
        const auto xa = a.run_mse(v, static_cast<Eigen::Index>(t)), xb = b.run_mse(v, static_cast<Eigen::Index>(t));
        ASSERT_EQ(xa.size(), xb.size());
        for (std::size_t i = 0; i < xa.size(); ++i) EXPECT_TRUE(same_bits(xa[i], xb[i])) << to_string(v) << " run " << i;
    }
}

}  // namespace

TEST(Metrics, MsePerColumn) {
    DenseMatrix e(3, 2), t(3, 2);
    e << 1, 0, 2, 0, 3, 0;
    t << 0, 0, 0, 0, 0, 3;
    const Vector m = mse(e, t);
    EXPECT_DOUBLE_EQ(m[0], 14.0 / 3.0);
    EXPECT_DOUBLE_EQ(m[1], 3.0);
    EXPECT_THROW(mse(e, t.topRows(2)), DimensionError);
    EXPECT_THROW(mse(DenseMatrix(0, 2), DenseMatrix(0, 2)), DegenerateInput);
}

TEST(Metrics, ResidualStatsExamples) {
    DenseMatrix r(6, 2);
    r << 0, 1, 0, -1, 0, 1, 0, -1, 0, 1, 0, -1;
    const auto s = residual_stats(r, {{0, 6}, {1, 3}});
    EXPECT_EQ(s[0].mav[0], 0.0);
    EXPECT_EQ(s[0].variance[0], 0.0);
    EXPECT_DOUBLE_EQ(s[0].mav[1], 1.0);
    EXPECT_DOUBLE_EQ(s[0].variance[1], 1.0);
    EXPECT_DOUBLE_EQ(s[1].variance[1], 1.0);  // {-1, 1}
    EXPECT_THROW(residual_stats(r, {{4, 8}}), DimensionError);
    EXPECT_THROW(residual_stats(r, {{2, 2}}), DegenerateInput);
}

TEST(Metrics, PercentReduction) {
    EXPECT_DOUBLE_EQ(percent_reduction(1.0, 4.0), 75.0);
    EXPECT_DOUBLE_EQ(percent_reduction(4.0, 4.0), 0.0);
    EXPECT_LT(percent_reduction(8.0, 4.0), 0.0);
}

TEST(Experiment, ReductionMatchesPerRunMses) {
    const ExperimentReport rep = run_experiment(small());
    ASSERT_EQ(rep.completed(), 3);
    for (Eigen::Index t = 0; t < 3; ++t) {
        double ro = 0, ror = 0;
        for (const auto& r : rep.runs) {
            ro += r.variants[0].mse[t] / 3.0;
            ror += r.variants[1].mse[t] / 3.0;
        }
        EXPECT_NEAR(rep.reduction(Variant::ROR, t), (1.0 - ror / ro) * 100.0, 1e-10);
    }
    EXPECT_EQ(rep.target_names, (std::vector<std::string>{"x", "y", "z"}));
    EXPECT_THROW(rep.target_index("w"), ConfigError);
    EXPECT_THROW(rep.variant_slot(Variant::ROA), ConfigError);
}

TEST(Experiment, PairedSeedsAcrossVariantSets) {
    ExperimentConfig a = small(), b = small();
    a.variants = {Variant::RO};
    b.variants = {Variant::ROA, Variant::RO};
    const ExperimentReport ra = run_experiment(a), rb = run_experiment(b);
    for (std::size_t i = 0; i < ra.runs.size(); ++i) {
        EXPECT_EQ(ra.runs[i].data_hash, rb.runs[i].data_hash);
        EXPECT_EQ(ra.runs[i].layer_seed, rb.runs[i].layer_seed);
    }
    EXPECT_NE(ra.runs[0].data_hash, ra.runs[1].data_hash);
    EXPECT_NE(ra.runs[0].layer_seed, ra.runs[1].layer_seed);
    expect_same_mse(ra, rb, Variant::RO);
}

TEST(Experiment, FixedDataWhenNotRegenerated) {
    ExperimentConfig c = small();
    c.regenerate_data = false;
    c.variants = {Variant::RO};
    const ExperimentReport r = run_experiment(c);
    EXPECT_EQ(r.runs[0].data_hash, r.runs[2].data_hash);
    EXPECT_NE(r.runs[0].layer_seed, r.runs[2].layer_seed);
}

TEST(Experiment, ThreadCountDoesNotChangeResults) {
    ExperimentConfig c = small();
    const ExperimentReport one = run_experiment(c);
    c.threads = 3;
    const ExperimentReport three = run_experiment(c);
    expect_same_mse(one, three, Variant::RO);
    expect_same_mse(one, three, Variant::ROR);
}

TEST(Experiment, LorenzZSquaresTargets) {
    ExperimentConfig c = small("lorenz");
    c.input_vars = {"z"};
    EXPECT_TRUE(detail::squares_targets(c));
    const RunData d = prepare_run(c, 0);
    EXPECT_EQ(d.target_names, (std::vector<std::string>{"x^2", "y^2", "z"}));
    EXPECT_GE(d.truth.leftCols(2).minCoeff(), 0.0);
    c.input_vars = {"x"};
    EXPECT_FALSE(detail::squares_targets(c));
    c.square_targets = SquareTargets::on;
    EXPECT_TRUE(detail::squares_targets(c));
}

TEST(Experiment, NormalizedInputsOnTrainingSpan) {
    const ExperimentConfig c = small();
    const RunData d = prepare_run(c, 1);
    const auto span = d.inputs.middleRows(c.reservoir_washout, c.train_len);
    EXPECT_NEAR(span.mean(), 0.0, 1e-12);
    EXPECT_NEAR(std::sqrt((span.array() - span.mean()).square().mean()), 1.0, 1e-12);
}

TEST(Experiment, OnePointSweepEqualsRun) {
    const ExperimentConfig c = small();
    const SweepCurve s = sweep_hyperparameter(c, "beta", {c.reservoir.beta});
    expect_same_mse(s.points.at(0).report, run_experiment(c), Variant::ROR);
    EXPECT_THROW(sweep_hyperparameter(c, "beta", {}), ConfigError);
    EXPECT_THROW(with_parameter(c, "d", 10.5), ConfigError);
    EXPECT_THROW(with_parameter(c, "lambda", 1.5), ConfigError);
    EXPECT_THROW(with_parameter(c, "bogus", 1.0), ConfigError);
    EXPECT_EQ(with_parameter(c, "n_c", 7).attention.n_centers, 7);
}

TEST(Experiment, ZeroNoiseEqualsNoiseless) {
    const ExperimentConfig c = small();
    const auto pts = noise_study(c, {0.0, 1e-2});
    const ExperimentReport clean = run_experiment(c);
    expect_same_mse(pts[0].report, clean, Variant::RO);
    expect_same_mse(pts[0].report, clean, Variant::ROR);
    EXPECT_NE(pts[1].report.runs[0].variants[0].mse[0], clean.runs[0].variants[0].mse[0]);
    EXPECT_THROW(noise_study(c, {-1.0}), ConfigError);
}

TEST(Experiment, NoiseLeavesTruthClean) {
    ExperimentConfig c = small();
    const RunData clean = prepare_run(c, 0);
    c.noise.eta = 0.1;
    const RunData noisy = prepare_run(c, 0);
    EXPECT_EQ(noisy.truth, clean.truth);
    EXPECT_NE(noisy.targets, clean.targets);
    EXPECT_LE((noisy.targets - clean.targets).cwiseAbs().maxCoeff(), 0.1 + 1e-12);
}

TEST(Config, JsonRoundTripForPresets) {
    for (const char* p : {"rossler", "lorenz", "chua", "ks", "ks_desk"}) {
        const ExperimentConfig c = preset_config(p);
        const Json j = to_json(c);
        EXPECT_EQ(to_json(config_from_json(j)).dump(), j.dump()) << p;
    }
}

TEST(Config, PresetValues) {
    const ExperimentConfig r = preset_config("rossler"), l = preset_config("lorenz"), c = preset_config("chua"),
                           k = preset_config("ks");
    EXPECT_EQ(r.reservoir.d, 400);
    EXPECT_DOUBLE_EQ(r.dt, 0.1);
    EXPECT_EQ(r.train_len, 400);
    EXPECT_DOUBLE_EQ(r.residual.lambda, 0.9);
    EXPECT_DOUBLE_EQ(l.dt, 0.05);
    EXPECT_EQ(l.train_len, 800);
    EXPECT_EQ(c.train_len, 1000);
    EXPECT_DOUBLE_EQ(c.residual.lambda, 0.5);
    EXPECT_EQ(k.reservoir.d, 1000);
    EXPECT_EQ(k.train_len, 30000);
    EXPECT_DOUBLE_EQ(k.reservoir.beta, 1e-10);
    EXPECT_DOUBLE_EQ(k.dt, 0.25);
    EXPECT_THROW(preset_config("duffing"), ConfigError);
}

TEST(Config, OverridesAndErrors) {
    const ExperimentConfig c = config_from_json(Json::parse(R"({"preset": "lorenz", "train_len": 50, "reservoir": {"d": 64}})"));
    EXPECT_EQ(c.system, SystemKind::lorenz);
    EXPECT_EQ(c.train_len, 50);
    EXPECT_EQ(c.reservoir.d, 64);
    EXPECT_DOUBLE_EQ(c.dt, 0.05);
    EXPECT_THROW(config_from_json(Json::parse(R"({"variants": ["RO", "XYZ"]})")), ConfigError);
    EXPECT_THROW(config_from_json(Json::parse(R"({"square_targets": "maybe"})")), ConfigError);
    EXPECT_THROW(config_from_json(Json::parse(R"({"n_runs": 0})")), ConfigError);
    EXPECT_THROW(config_from_json(Json::parse(R"({"train_len": "long"})")), ConfigError);
    EXPECT_THROW(config_from_json(Json::parse(R"({"residual": {"lambda": 0}})")), ConfigError);
}

TEST(Report, RunsCsvRoundTripIsLossless) {
    ExperimentConfig c = small();
    c.variants = {Variant::RO, Variant::RORA};
    const ExperimentReport rep = run_experiment(c);
    std::stringstream ss;
    write_runs_csv(ss, rep);
    const ExperimentReport back = read_runs_csv(ss, c);
    EXPECT_EQ(back.target_names, rep.target_names);
    EXPECT_EQ(back.input_names, rep.input_names);
    ASSERT_EQ(back.runs.size(), rep.runs.size());
    for (std::size_t i = 0; i < rep.runs.size(); ++i) {
        const RunResult &a = rep.runs[i], &b = back.runs[i];
        EXPECT_EQ(a.data_hash, b.data_hash);
        EXPECT_EQ(a.data_seed, b.data_seed);
        EXPECT_EQ(a.layer_seed, b.layer_seed);
        ASSERT_EQ(a.variants.size(), b.variants.size());
        for (std::size_t v = 0; v < a.variants.size(); ++v) {
            EXPECT_EQ(a.variants[v].variant, b.variants[v].variant);
            for (Eigen::Index t = 0; t < 3; ++t) {
                EXPECT_TRUE(same_bits(a.variants[v].mse[t], b.variants[v].mse[t]));
                EXPECT_TRUE(same_bits(a.variants[v].mse_normalized[t], b.variants[v].mse_normalized[t]));
            }
            ASSERT_EQ(a.variants[v].residuals.has_value(), b.variants[v].residuals.has_value());
            if (a.variants[v].residuals) {
                EXPECT_EQ(a.variants[v].residuals->fit_interval.begin, b.variants[v].residuals->fit_interval.begin);
                EXPECT_EQ(a.variants[v].residuals->fit_mav, b.variants[v].residuals->fit_mav);
                EXPECT_EQ(a.variants[v].residuals->inference_variance, b.variants[v].residuals->inference_variance);
            }
        }
    }
    std::stringstream bad("run,mse\n1,2\n");
    EXPECT_THROW(read_runs_csv(bad), Error);
}

TEST(Report, FailedRunIsRecordedNotFatal) {
    ExperimentReport rep = run_experiment(small());
    rep.runs[1].error = "diverged, \"badly\"";
    rep.runs[1].variants.clear();
    std::stringstream ss;
    write_runs_csv(ss, rep);
    const ExperimentReport back = read_runs_csv(ss, rep.config);
    EXPECT_TRUE(back.partial());
    EXPECT_EQ(back.completed(), 2);
    EXPECT_EQ(back.runs[1].error, rep.runs[1].error);
    EXPECT_EQ(back.run_mse(Variant::RO, 0).size(), 2u);
}

TEST(Report, SummaryJsonCarriesMeansAndReductions) {
    const ExperimentReport rep = run_experiment(small());
    const Json j = summary_json(rep);
    const std::string s = j.dump();
    EXPECT_NE(s.find("\"ROR\""), std::string::npos);
    std::stringstream ss;
    write_summary_csv(ss, rep);
    EXPECT_NE(ss.str().find("ROR"), std::string::npos);
    EXPECT_TRUE(json_number(NAN).is_null());
}

TEST(Report, SvgIsWellFormed) {
    PlotSpec spec;
    spec.title = "a < b & c";
    spec.log_y = true;
    const std::string svg = svg_line_plot({{"one", {1, 2, 3}, {1e-3, 1e-2, 1e-1}}, {"two", {1, 2, 3}, {2e-3, 0.5, 3}}}, spec);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
    EXPECT_NE(svg.find("a &lt; b &amp; c"), std::string::npos);
    EXPECT_EQ(svg.find("a < b"), std::string::npos);
    std::size_t lines = 0;
    for (std::size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++lines;
    EXPECT_EQ(lines, 2u);
    EXPECT_EQ(svg.find("nan"), std::string::npos);
}

TEST(Report, CsvQuoting) {
    std::stringstream ss(csv::quote("a,b") + "," + csv::quote("say \"hi\"") + ",plain\n");
    std::vector<std::string> cells;
    ASSERT_TRUE(csv::read_record(ss, cells));
    EXPECT_EQ(cells, (std::vector<std::string>{"a,b", "say \"hi\"", "plain"}));
    for (double v : {0.1, 1.0 / 3.0, 6.02e23, -5e-300}) EXPECT_TRUE(same_bits(csv::to_double(csv::num(v)), v));
}

TEST(Container, SaveLoadReproducesInference) {
    const ExperimentConfig c = small();
    const RunData d = prepare_run(c, 0);
    std::uint64_t seed = 0;
    const Trajectory raw = run_trajectory(c, 0, nullptr, seed);
    for (Variant v : {Variant::RO, Variant::RORA, Variant::PRC}) {
        const ObserverContainer box = train_container(v, c, d);
        const std::string path = ::testing::TempDir() + "obs_" + to_string(v) + ".json";
        save_container(path, box);
        const ObserverContainer back = load_container(path);
        const Trajectory a = apply_container(box, raw), b = apply_container(back, raw);
        EXPECT_EQ(a.values, b.values) << to_string(v);
        EXPECT_EQ(a.var_names, b.var_names);
        // the raw path matches the harness path on the same data
        const ObserverOutput o = run_observer(box.observer, d.inputs);
        EXPECT_LT((a.values - o.estimate).cwiseAbs().maxCoeff(), 1e-12) << to_string(v);
    }
    Json bad = to_json(train_container(Variant::RO, c, d));
    bad["version"] = 99;
    EXPECT_THROW(container_from_json(bad), Error);
}

TEST(Tables, CacheMergeEqualsFullRun) {
    ExperimentCache cache;
    ExperimentConfig c = small();
    const auto first = cache.get(c, {Variant::RO});
    const auto merged = cache.get(c, {Variant::RO, Variant::ROA, Variant::ROR});
    EXPECT_EQ(cache.size(), 1u);
    EXPECT_EQ(cache.get(c, {Variant::ROA}).get(), merged.get());
    c.variants = {Variant::RO, Variant::ROA, Variant::ROR};
    const ExperimentReport full = run_experiment(c);
    for (Variant v : c.variants) expect_same_mse(*merged, full, v);
    EXPECT_EQ(first->config.variants.size(), 1u);
}

TEST(Tables, PublishedReductionsMatchPublishedMses) {
    // Printed MSEs carry three significant figures, so the recomputed
    // reductions agree with the printed ones to within 1.5 points.
    for (const auto* table : {&published::table2(), &published::table3(), &published::table4()}) {
        const auto& ro = table->front();
        for (std::size_t m = 1; m < table->size(); ++m)
            for (std::size_t k = 0; k < 6; ++k)
                EXPECT_NEAR(percent_reduction((*table)[m].mse[k], ro.mse[k]), (*table)[m].reduction[k], 1.5)
                    << (*table)[m].method << " column " << k;
    }
    for (const auto* table : {&published::table5_is1(), &published::table5_is20()}) {
        for (std::size_t m = 1; m < table->size(); ++m)
            for (std::size_t k = 0; k < 4; ++k)
                EXPECT_NEAR(percent_reduction((*table)[m].mse[k], table->front().mse[k]), (*table)[m].reduction[k], 1.5);
    }
}

TEST(Tables, FormatIncludesEveryRow) {
    TableReport t;
    t.id = "X";
    t.title = "demo";
    t.columns = {"x->y"};
    t.rows.push_back({"x", "RO", {1e-3}, {2e-3}, {published::nan}, {published::nan}});
    t.checks.push_back({"C0", "demo check", false, "detail"});
    const std::string s = format_table(t);
    EXPECT_NE(s.find("RO"), std::string::npos);
    EXPECT_NE(s.find("FAIL"), std::string::npos);
    EXPECT_FALSE(t.passed());
    EXPECT_THROW(reproduce_table("VI", *std::make_unique<ExperimentCache>(), TableOptions{}), ConfigError);
}
