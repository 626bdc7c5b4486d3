// Command-line front end: simulate, train, infer, table, sweep, noise, te,
// selftest. Output files go to $ROLAB_OUT (default ./rolab_out).

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "rolab/acceptance.hpp"
#include "rolab/config.hpp"
#include "rolab/harness.hpp"
#include "rolab/infotheory.hpp"
#include "rolab/report.hpp"
#include "rolab/selftest.hpp"
#include "rolab/serialize.hpp"
#include "rolab/tables.hpp"

namespace fs = std::filesystem;
using namespace rolab;

namespace {

fs::path output_dir() {
    const char* env = std::getenv("ROLAB_OUT");
    fs::path dir = env && *env ? fs::path(env) : fs::path("rolab_out");
    fs::create_directories(dir);
    return dir;
}

std::string out_path(const std::string& name) { return (output_dir() / name).string(); }

/// Relative output files live in the output directory.
std::string resolve_out(const std::string& out, const std::string& fallback) {
    if (out.empty()) return out_path(fallback);
    return fs::path(out).is_absolute() ? out : out_path(out);
}

/// Input files are looked up as given, then in the output directory.
std::string resolve_in(const std::string& in) {
    if (in.empty() || fs::exists(in) || fs::path(in).is_absolute()) return in;
    const fs::path alt = output_dir() / in;
    return fs::exists(alt) ? alt.string() : in;
}

struct CommonOptions {
    std::string preset = "rossler";
    std::string config_file;
    std::vector<std::string> inputs;
    int runs = -1;
    int threads = -1;
    long long seed = -1;
    std::string h;
    bool quiet = false;

    void add(CLI::App* app) {
        app->add_option("-p,--preset", preset, "preset: rossler, lorenz, chua, ks, ks_desk");
        app->add_option("-c,--config", config_file, "JSON config file (may name a preset)");
        app->add_option("-i,--input", inputs, "measured variables");
        app->add_option("-n,--runs", runs, "number of runs");
        app->add_option("-j,--threads", threads, "worker threads (0 = all cores)");
        app->add_option("-s,--seed", seed, "master seed");
        app->add_option("--rank", h, "attention rank h: auto or a positive integer");
        app->add_flag("-q,--quiet", quiet, "no progress output");
    }

    ExperimentConfig config() const {
        ExperimentConfig c = config_file.empty() ? preset_config(preset) : load_config(config_file);
        if (!inputs.empty()) c.input_vars = inputs;
        if (runs > 0) c.n_runs = runs;
        if (threads >= 0) c.threads = threads;
        if (seed >= 0) c.master_seed = static_cast<std::uint64_t>(seed);
        if (!h.empty()) c.attention.rank = rank_from_json(h == "auto" ? Json("auto") : Json(std::stoll(h)));
        c.validate();
        return c;
    }

    void progress(const std::string& what) const {
        if (!quiet) std::cerr << "  .. " << what << std::endl;
    }
};

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
    if (out.empty()) throw ConfigError("empty value list");
    return out;
}

std::string slug(const std::vector<std::string>& xs) {
    std::string s;
    for (const auto& x : xs) s += (s.empty() ? "" : "-") + x;
    return s.empty() ? "all" : s;
}

void write_experiment(const ExperimentReport& rep, const std::string& stem) {
    write_runs_csv(out_path(stem + "_runs.csv"), rep);
    write_summary_csv(out_path(stem + "_summary.csv"), rep);
    write_json(out_path(stem + "_summary.json"), summary_json(rep));
}

void write_table(const TableReport& t) {
    std::ofstream(out_path("table_" + t.id + ".txt")) << format_table(t);
    write_json(out_path("table_" + t.id + ".json"), table_json(t));
    for (const auto& e : t.experiments) {
        const std::string stem = "table_" + t.id + "_" + e->config.preset + "_" + slug(e->input_names.size() <= 3 ? e->input_names
                                                                                                                   : std::vector<std::string>{"n" + std::to_string(e->input_names.size())});
        write_experiment(*e, stem);
    }
}

// ---------------------------------------------------------------------------

int cmd_simulate(const CommonOptions& co, std::size_t steps, double eta, const std::string& out) {
    ExperimentConfig c = co.config();
    if (steps > 0) {
        c.train_len = static_cast<Eigen::Index>(steps) - c.reservoir_washout - c.inference_len;
        if (c.train_len < 4) {
            c.inference_len = 0;
            c.train_len = static_cast<Eigen::Index>(steps) - c.reservoir_washout;
        }
    }
    std::optional<KsPool> pool;
    if (c.system == SystemKind::ks) pool = make_ks_pool(c);
    std::uint64_t data_seed = 0;
    Trajectory tr = run_trajectory(c, 0, pool ? &*pool : nullptr, data_seed);
    if (eta > 0.0) tr = add_uniform_noise(tr, {eta}, substream_seed(c.master_seed, "noise"));
    const std::string path = resolve_out(out, c.preset + "_trajectory.csv");
    write_trajectory_csv(path, tr);
    std::cout << "wrote " << tr.steps() << " steps of " << tr.vars() << " variables to " << path << "\n";
    return 0;
}

int cmd_train(const CommonOptions& co, const std::string& variant, const std::string& data, int run, const std::string& out) {
    const ExperimentConfig c = co.config();
    RunData d;
    if (data.empty()) {
        d = prepare_run(c, run);
    } else {
        d = prepare_from_trajectory(c, read_trajectory_csv(resolve_in(data)), run);
    }
    const ObserverContainer box = train_container(variant_from_string(variant), c, d);
    const std::string path = resolve_out(out, c.preset + "_" + variant + "_observer.json");
    save_container(path, box);

    // Evaluate on the window after training, as the harness does.
    const ObserverOutput o = run_observer(box.observer, d.inputs);
    const Eigen::Index first = c.reservoir_washout + c.train_len;
    const Eigen::Index len = std::min<Eigen::Index>(c.inference_len, d.truth.rows() - first);
    std::cout << "saved " << variant << " observer to " << path << "\n";
    if (len > 0) {
        const Vector e = mse(o.estimate.middleRows(first - o.start_step, len), d.truth.middleRows(first, len));
        for (std::size_t t = 0; t < d.target_names.size(); ++t)
            std::cout << "  inference MSE " << d.target_names[t] << " = " << e[static_cast<Eigen::Index>(t)] << "\n";
    }
    return 0;
}

int cmd_infer(const std::string& model, const std::string& data, const std::string& out, int plot_steps) {
    const ObserverContainer box = load_container(resolve_in(model));
    const Trajectory measured = read_trajectory_csv(resolve_in(data));
    const Trajectory est = apply_container(box, measured);
    const std::string path = resolve_out(out, "estimates.csv");
    write_trajectory_csv(path, est);
    std::cout << "wrote " << est.steps() << " estimates to " << path << "\n";

    // Compare with any target columns present in the data.
    const Eigen::Index off = static_cast<Eigen::Index>(std::llround((est.t0 - measured.t0) / measured.dt));
    std::vector<PlotSeries> traces;
    for (std::size_t t = 0; t < box.target_names.size(); ++t) {
        std::string name = box.target_names[t];
        const bool sq = name.size() > 2 && name.substr(name.size() - 2) == "^2";
        if (sq) name.resize(name.size() - 2);
        if (std::find(measured.var_names.begin(), measured.var_names.end(), name) == measured.var_names.end()) continue;
        Vector truth = measured.values.col(measured.index_of(name)).segment(off, est.steps());
        if (sq) truth = truth.array().square();
        const Vector e = est.values.col(static_cast<Eigen::Index>(t));
        std::cout << "  MSE " << box.target_names[t] << " = " << (e - truth).squaredNorm() / static_cast<double>(e.size()) << "\n";
        if (traces.size() < 6 && std::find(box.input_names.begin(), box.input_names.end(), name) == box.input_names.end()) {
            PlotSeries a{box.target_names[t] + " target", {}, {}}, b{box.target_names[t] + " estimate", {}, {}};
            for (Eigen::Index i = 0; i < std::min<Eigen::Index>(plot_steps, e.size()); ++i) {
                const double time = est.t0 + static_cast<double>(i) * est.dt;
                a.x.push_back(time), a.y.push_back(truth[i]);
                b.x.push_back(time), b.y.push_back(e[i]);
            }
            traces.push_back(std::move(a));
            traces.push_back(std::move(b));
        }
    }
    if (!traces.empty()) {
        PlotSpec ps;
        ps.title = "estimate against target";
        ps.x_label = "t";
        ps.y_label = "value";
        ps.markers = false;
        write_svg(out_path("traces.svg"), traces, ps);
    }
    return 0;
}

TableOptions table_options(const CommonOptions& co, int runs) {
    TableOptions o;
    o.n_runs = runs;
    if (co.threads >= 0) o.threads = co.threads;
    if (co.seed >= 0) o.master_seed = static_cast<std::uint64_t>(co.seed);
    if (!co.h.empty()) o.rank = rank_from_json(co.h == "auto" ? Json("auto") : Json(std::stoll(co.h)));
    o.progress = [&co](const std::string& w) { co.progress(w); };
    return o;
}

int cmd_table(const CommonOptions& co, std::vector<std::string> which, bool ks_full, std::vector<int> ks_inputs,
              std::vector<std::string> t9) {
    TableOptions o = table_options(co, co.runs > 0 ? co.runs : 20);
    o.ks_full = ks_full;
    if (!ks_inputs.empty()) o.ks_inputs = ks_inputs;
    if (!t9.empty()) o.table9_systems = t9;
    if (which.empty() || (which.size() == 1 && which[0] == "all")) which = table_ids();
    ExperimentCache cache;
    bool ok = true;
    for (const auto& w : which) {
        const TableReport t = reproduce_table(w, cache, o);
        std::cout << format_table(t) << "\n";
        write_table(t);
        ok = ok && t.passed();
    }
    std::cout << (ok ? "all table checks passed" : "some table checks failed") << "\n";
    return ok ? 0 : 1;
}

int cmd_sweep(const CommonOptions& co, const std::string& param, const std::string& values, std::vector<std::string> variants) {
    ExperimentConfig c = co.config();
    if (variants.empty()) variants = {"RO", "RORA"};
    c.variants.clear();
    for (const auto& v : variants) c.variants.push_back(variant_from_string(v));
    const SweepCurve curve = sweep_hyperparameter(c, param, parse_list(values), [&](double v) {
        co.progress(param + " = " + std::to_string(v));
    });
    const std::string stem = "sweep_" + c.preset + "_" + param;
    write_sweep_csv(out_path(stem + ".csv"), curve);
    Json points = Json::array();
    for (const auto& p : curve.points) points.push_back({{"value", p.value}, {"summary", summary_json(p.report)}});
    write_json(out_path(stem + ".json"), {{"param", param}, {"points", points}});
    PlotSpec ps;
    ps.title = "mean MSE against " + param;
    ps.x_label = param;
    ps.y_label = "mean MSE";
    ps.log_y = true;
    ps.log_x = param == "beta";
    write_svg(out_path(stem + ".svg"), sweep_series(curve), ps);
    for (const auto& p : curve.points) {
        std::cout << param << " = " << p.value;
        for (Variant v : p.report.config.variants)
            for (std::size_t t = 0; t < p.report.target_names.size(); ++t)
                std::cout << "  " << to_string(v) << ":" << p.report.target_names[t] << "="
                          << p.report.mean_mse(v, static_cast<Eigen::Index>(t));
        std::cout << "\n";
    }
    return 0;
}

int cmd_noise(const CommonOptions& co, const std::string& etas) {
    const ExperimentConfig c = co.config();
    const auto pts = noise_study(c, parse_list(etas), [&](double e) { co.progress("eta = " + std::to_string(e)); });
    const std::string stem = "noise_" + c.preset + "_" + slug(c.input_vars);
    write_noise_csv(out_path(stem + ".csv"), pts);
    Json points = Json::array();
    for (const auto& p : pts) points.push_back({{"eta", p.eta}, {"summary", summary_json(p.report)}});
    write_json(out_path(stem + ".json"), {{"points", points}});

    std::vector<PlotSeries> mse_s, red_s;
    const auto& first = pts.front().report;
    for (std::size_t t = 0; t < first.target_names.size(); ++t) {
        const auto ti = static_cast<Eigen::Index>(t);
        if (std::find(first.input_names.begin(), first.input_names.end(), first.target_names[t]) != first.input_names.end()) continue;
        PlotSeries m{"RO " + first.target_names[t], {}, {}}, r{"ROR " + first.target_names[t], {}, {}};
        for (const auto& p : pts) {
            if (p.eta <= 0.0) continue;
            m.x.push_back(p.eta), m.y.push_back(p.report.mean_mse(Variant::RO, ti));
            r.x.push_back(p.eta), r.y.push_back(p.report.reduction(Variant::ROR, ti));
        }
        mse_s.push_back(m);
        red_s.push_back(r);
        for (const auto& p : pts)
            std::cout << "eta = " << p.eta << "  " << first.target_names[t] << ": RO " << p.report.mean_mse(Variant::RO, ti)
                      << ", ROR " << p.report.mean_mse(Variant::ROR, ti) << " (" << p.report.reduction(Variant::ROR, ti) << "%)\n";
    }
    PlotSpec a;
    a.title = "RO mean MSE against noise level";
    a.x_label = "eta";
    a.y_label = "mean MSE";
    a.log_x = a.log_y = true;
    write_svg(out_path(stem + "_mse.svg"), mse_s, a);
    PlotSpec b = a;
    b.title = "ROR reduction against noise level";
    b.y_label = "reduction [%]";
    b.log_y = false;
    write_svg(out_path(stem + "_reduction.svg"), red_s, b);
    return 0;
}

int cmd_te(const CommonOptions& co, const std::string& data, std::size_t length, int bins, int l_max) {
    Trajectory tr;
    std::string stem;
    if (!data.empty()) {
        tr = read_trajectory_csv(resolve_in(data));
        stem = "te_" + fs::path(data).stem().string();
    } else {
        const ExperimentConfig c = co.config();
        if (c.system == SystemKind::ks) throw ConfigError("te: use an ODE preset or --data");
        tr = te_trajectory(c.preset, length, c.master_seed);
        stem = "te_" + c.preset;
    }
    TeSpec spec;
    spec.n_bins = bins;
    const auto rows = te_profile(tr, spec, l_max);
    write_te_csv(out_path(stem + ".csv"), rows);
    PlotSpec ps;
    ps.title = "transfer entropy against source history";
    ps.x_label = "l";
    ps.y_label = "T [nats]";
    write_svg(out_path(stem + ".svg"), te_series(rows), ps);
    for (const auto& r : rows)
        std::cout << "T " << r.source << "->" << r.target << " l=" << r.l << " : " << r.nats << " nats\n";
    return 0;
}

int cmd_selftest() {
    const auto checks = run_selftest([](const Check& c) {
        std::cout << "[" << (c.passed ? "PASS" : "FAIL") << "] " << c.description << ": " << c.detail << std::endl;
    });
    Json j = Json::array();
    bool ok = true;
    for (const auto& c : checks) {
        j.push_back({{"description", c.description}, {"passed", c.passed}, {"detail", c.detail}});
        ok = ok && c.passed;
    }
    write_json(out_path("selftest.json"), j);
    std::cout << (ok ? "selftest passed" : "selftest failed") << "\n";
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reservoir observers with residual calibration and attention"};
    app.require_subcommand(1);

    CommonOptions co;

    auto* sim = app.add_subcommand("simulate", "write a trajectory CSV");
    co.add(sim);
    std::size_t steps = 0;
    double eta = 0.0;
    std::string out;
    sim->add_option("--steps", steps, "number of samples (default: washout + training + inference)");
    sim->add_option("--eta", eta, "uniform noise amplitude");
    sim->add_option("-o,--out", out, "output file");

    auto* train = app.add_subcommand("train", "train an observer and save its container");
    co.add(train);
    std::string variant = "RORA", data;
    int run = 0;
    train->add_option("-v,--variant", variant, "RO, ROR, ROR-al, ROA, RORA, RO-2d, P-RC");
    train->add_option("-d,--data", data, "trajectory CSV (generated from the config when absent)");
    train->add_option("-r,--run", run, "run index for the seeds");
    train->add_option("-o,--out", out, "output file");

    auto* inf = app.add_subcommand("infer", "apply an observer container to a trajectory CSV");
    std::string model;
    int plot_steps = 500;
    inf->add_option("-m,--model", model, "observer container")->required();
    inf->add_option("-d,--data", data, "trajectory CSV with the input columns")->required();
    inf->add_option("-o,--out", out, "output file");
    inf->add_option("--plot-steps", plot_steps, "samples shown in traces.svg");

    auto* tab = app.add_subcommand("table", "reproduce comparison tables with pass/fail checks");
    co.add(tab);
    std::vector<std::string> which, t9;
    std::vector<int> ks_inputs;
    bool ks_full = false;
    tab->add_option("which", which, "II, III, IV, V, VIII, IX or all");
    tab->add_flag("--ks-full", ks_full, "also run the full-scale KS preset");
    tab->add_option("--ks-inputs", ks_inputs, "KS input counts (default 2 4 6 8)");
    tab->add_option("--table9-systems", t9, "systems for table IX");

    auto* sw = app.add_subcommand("sweep", "vary one hyperparameter");
    co.add(sw);
    std::string param = "beta", values = "1e-12,1e-11,1e-10,1e-9,1e-8,1e-7,1e-6,1e-5,1e-4";
    std::vector<std::string> variants;
    sw->add_option("--param", param, "d, D, alpha, xi, rho, gamma, beta, lambda, sigma, n_c");
    sw->add_option("--values", values, "comma-separated grid");
    sw->add_option("-v,--variants", variants, "variants (default RO RORA)");

    auto* nz = app.add_subcommand("noise", "RO against ROR under measurement noise");
    co.add(nz);
    std::string etas = "0,1e-4,1e-3,1e-2,1e-1,1";
    nz->add_option("--etas", etas, "comma-separated noise levels");

    auto* te = app.add_subcommand("te", "transfer-entropy profile");
    co.add(te);
    std::size_t length = 100000;
    int bins = 8, l_max = 5;
    te->add_option("-d,--data", data, "trajectory CSV (generated from the preset when absent)");
    te->add_option("--length", length, "samples");
    te->add_option("--bins", bins, "histogram bins");
    te->add_option("--lmax", l_max, "largest source history");

    auto* st = app.add_subcommand("selftest", "property suite");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*sim) return cmd_simulate(co, steps, eta, out);
        if (*train) return cmd_train(co, variant, data, run, out);
        if (*inf) return cmd_infer(model, data, out, plot_steps);
        if (*tab) return cmd_table(co, which, ks_full, ks_inputs, t9);
        if (*sw) return cmd_sweep(co, param, values, variants);
        if (*nz) return cmd_noise(co, etas);
        if (*te) return cmd_te(co, data, length, bins, l_max);
        if (*st) return cmd_selftest();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
