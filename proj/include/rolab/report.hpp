#pragma once

// Report output: per-run CSV (and its reader), summary CSV and JSON, and a
// small SVG line-plot writer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "rolab/config.hpp"
#include "rolab/harness.hpp"
#include "rolab/infotheory.hpp"

namespace rolab {

// ---------------------------------------------------------------------------
// CSV helpers

namespace csv {

inline std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

/// Splits one record, honoring double-quoted cells. Reads more lines from
/// `is` when a quoted cell spans a line break.
inline bool read_record(std::istream& is, std::vector<std::string>& cells) {
    cells.clear();
    std::string line;
    if (!std::getline(is, line)) return false;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0;; ++i) {
        if (i == line.size()) {
            if (quoted) {
                cell += '\n';
                if (!std::getline(is, line)) throw Error("csv: unterminated quoted cell");
                i = static_cast<std::size_t>(-1);
                continue;
            }
            break;
        }
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(cell);
    return true;
}

inline std::string num(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

inline double to_double(const std::string& s) {
    if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::stod(s);
}

inline std::string join(const std::vector<std::string>& xs, char sep) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += sep;
        out += xs[i];
    }
    return out;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (s.empty()) return out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    return out;
}

}  // namespace csv

// ---------------------------------------------------------------------------
// Per-run report CSV

inline const char* runs_csv_header() {
    return "run,data_seed,layer_seed,data_hash,seconds,inputs,squared,variant,target,mse,mse_normalized,"
           "fit_begin,fit_end,inference_begin,inference_end,fit_mav,fit_variance,inference_mav,inference_variance,error";
}

/// One row per (run, variant, target); a failed run is a single row with an
/// empty variant and the error text.
inline void write_runs_csv(std::ostream& os, const ExperimentReport& rep) {
    os << runs_csv_header() << '\n';
    const std::string inputs = csv::quote(csv::join(rep.input_names, ';'));
    for (const RunResult& r : rep.runs) {
        const std::string head = std::to_string(r.run) + ',' + std::to_string(r.data_seed) + ',' +
                                 std::to_string(r.layer_seed) + ',' + std::to_string(r.data_hash) + ',' + csv::num(r.seconds) +
                                 ',' + inputs + ',' + (rep.squared_targets ? "1" : "0") + ',';
        if (!r.ok()) {
            os << head << ",,,,,,,,,,,," << csv::quote(r.error) << '\n';
            continue;
        }
        for (std::size_t s = 0; s < r.variants.size(); ++s) {
            const VariantResult& v = r.variants[s];
            for (std::size_t t = 0; t < rep.target_names.size(); ++t) {
                const auto ti = static_cast<Eigen::Index>(t);
                os << head << to_string(v.variant) << ',' << csv::quote(rep.target_names[t]) << ',' << csv::num(v.mse[ti]) << ','
                   << csv::num(v.mse_normalized[ti]) << ',';
                if (v.residuals) {
                    const auto& z = *v.residuals;
                    os << z.fit_interval.begin << ',' << z.fit_interval.end << ',' << z.inference_interval.begin << ','
                       << z.inference_interval.end << ',' << csv::num(z.fit_mav[ti]) << ',' << csv::num(z.fit_variance[ti]) << ','
                       << csv::num(z.inference_mav[ti]) << ',' << csv::num(z.inference_variance[ti]) << ',';
                } else {
                    os << ",,,,,,,,";
                }
                os << '\n';
            }
        }
    }
}

inline void write_runs_csv(const std::string& path, const ExperimentReport& rep) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    write_runs_csv(f, rep);
}

/// Rebuilds the run-level content of a report from its CSV. The config,
/// which the CSV does not carry, is taken from `config` with its variant
/// list replaced by the variants found in the file.
inline ExperimentReport read_runs_csv(std::istream& is, const ExperimentConfig& config = {}) {
    std::vector<std::string> cells;
    if (!csv::read_record(is, cells) || csv::join(cells, ',') != runs_csv_header())
        throw Error("runs csv: unexpected header");

    ExperimentReport rep;
    rep.config = config;
    rep.config.variants.clear();
    struct Row {
        std::vector<std::string> c;
    };
    std::vector<Row> rows;
    while (csv::read_record(is, cells)) {
        if (cells.size() == 1 && cells[0].empty()) continue;
        if (cells.size() != 20) throw Error("runs csv: expected 20 cells, found " + std::to_string(cells.size()));
        rows.push_back({cells});
    }
    // Names and variants in first-appearance order.
    for (const Row& r : rows) {
        if (rep.input_names.empty() && !r.c[5].empty()) rep.input_names = csv::split(r.c[5], ';');
        rep.squared_targets = r.c[6] == "1";
        if (r.c[7].empty()) continue;
        const Variant v = variant_from_string(r.c[7]);
        if (!rep.has_variant(v)) rep.config.variants.push_back(v);
        if (std::find(rep.target_names.begin(), rep.target_names.end(), r.c[8]) == rep.target_names.end())
            rep.target_names.push_back(r.c[8]);
    }
    const auto m = static_cast<Eigen::Index>(rep.target_names.size());
    for (const Row& row : rows) {
        const auto& c = row.c;
        const int run = std::stoi(c[0]);
        if (rep.runs.empty() || rep.runs.back().run != run) {
            RunResult r;
            r.run = run;
            r.data_seed = std::stoull(c[1]);
            r.layer_seed = std::stoull(c[2]);
            r.data_hash = std::stoull(c[3]);
            r.seconds = csv::to_double(c[4]);
            if (c[7].empty()) r.error = c[19];
            rep.runs.push_back(std::move(r));
        }
        RunResult& r = rep.runs.back();
        if (c[7].empty()) continue;
        const Variant v = variant_from_string(c[7]);
        if (r.variants.empty() || r.variants.back().variant != v) {
            VariantResult vr;
            vr.variant = v;
            vr.mse = Vector::Constant(m, std::numeric_limits<double>::quiet_NaN());
            vr.mse_normalized = vr.mse;
            if (!c[11].empty()) {
                ResidualSummary z;
                z.fit_interval = {std::stol(c[11]), std::stol(c[12])};
                z.inference_interval = {std::stol(c[13]), std::stol(c[14])};
                z.fit_mav = z.fit_variance = z.inference_mav = z.inference_variance = vr.mse;
                vr.residuals = z;
            }
            r.variants.push_back(std::move(vr));
        }
        VariantResult& vr = r.variants.back();
        const auto t = rep.target_index(c[8]);
        vr.mse[t] = csv::to_double(c[9]);
        vr.mse_normalized[t] = csv::to_double(c[10]);
        if (vr.residuals) {
            vr.residuals->fit_mav[t] = csv::to_double(c[15]);
            vr.residuals->fit_variance[t] = csv::to_double(c[16]);
            vr.residuals->inference_mav[t] = csv::to_double(c[17]);
            vr.residuals->inference_variance[t] = csv::to_double(c[18]);
        }
    }
    return rep;
}

inline ExperimentReport read_runs_csv(const std::string& path, const ExperimentConfig& config = {}) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open '" + path + "'");
    return read_runs_csv(f, config);
}

// ---------------------------------------------------------------------------
// Summaries

inline void write_summary_csv(std::ostream& os, const ExperimentReport& rep) {
    os << "variant,target,mean_mse,mean_mse_normalized,reduction_pct,n_completed\n";
    for (Variant v : rep.config.variants)
        for (std::size_t t = 0; t < rep.target_names.size(); ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            os << to_string(v) << ',' << csv::quote(rep.target_names[t]) << ',' << csv::num(rep.mean_mse(v, ti)) << ','
               << csv::num(rep.mean_mse(v, ti, true)) << ','
               << (rep.has_variant(Variant::RO) ? csv::num(rep.reduction(v, ti)) : std::string()) << ',' << rep.completed()
               << '\n';
        }
}

inline void write_summary_csv(const std::string& path, const ExperimentReport& rep) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    write_summary_csv(f, rep);
}

inline Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json summary_json(const ExperimentReport& rep) {
    Json variants = Json::object();
    for (Variant v : rep.config.variants) {
        Json per = Json::object();
        for (std::size_t t = 0; t < rep.target_names.size(); ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            Json e{{"mean_mse", json_number(rep.mean_mse(v, ti))}, {"mean_mse_normalized", json_number(rep.mean_mse(v, ti, true))}};
            if (rep.has_variant(Variant::RO)) e["reduction_pct"] = json_number(rep.reduction(v, ti));
            per[rep.target_names[t]] = e;
        }
        variants[to_string(v)] = per;
    }
    Json errors = Json::array();
    for (const auto& r : rep.runs)
        if (!r.ok()) errors.push_back({{"run", r.run}, {"error", r.error}});
    return Json{{"config", to_json(rep.config)},
                {"inputs", rep.input_names},
                {"targets", rep.target_names},
                {"squared_targets", rep.squared_targets},
                {"mse_units", "target units (normalized values divide by the training-span target variance)"},
                {"n_runs", rep.runs.size()},
                {"n_completed", rep.completed()},
                {"partial", rep.partial()},
                {"wall_seconds", rep.wall_seconds},
                {"variants", variants},
                {"errors", errors}};
}

inline void write_json(const std::string& path, const Json& j) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    f << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// SVG line plots

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    bool markers = true;
    int width = 720;
    int height = 440;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string tick_label(double v, bool log) {
    std::ostringstream s;
    if (log) {
        s << "1e" << static_cast<int>(std::lround(v));
    } else {
        s << std::setprecision(3) << v;
    }
    return s.str();
}

}  // namespace detail

inline std::string svg_line_plot(const std::vector<PlotSeries>& series, const PlotSpec& spec) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    auto tx = [&](double v) { return spec.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            const double a = tx(s.x[i]), b = ty(s.y[i]);
            if (!std::isfinite(a) || !std::isfinite(b)) continue;
            x0 = std::min(x0, a), x1 = std::max(x1, a), y0 = std::min(y0, b), y1 = std::max(y1, b);
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad, y1 += pad;

    const double L = 80, R = 170, T = 40, B = 60;
    const double W = spec.width - L - R, H = spec.height - T - B;
    auto px = [&](double a) { return L + (a - x0) / (x1 - x0) * W; };
    auto py = [&](double b) { return T + (1.0 - (b - y0) / (y1 - y0)) * H; };

    std::ostringstream o;
    o << std::setprecision(6);
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << spec.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << detail::xml_escape(spec.title)
      << "</text>\n";
    o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W << "\" height=\"" << H
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double a = x0 + (x1 - x0) * k / 4.0, b = y0 + (y1 - y0) * k / 4.0;
        o << "<text x=\"" << px(a) << "\" y=\"" << T + H + 18 << "\" text-anchor=\"middle\">" << detail::tick_label(a, spec.log_x)
          << "</text>\n";
        o << "<text x=\"" << L - 6 << "\" y=\"" << py(b) + 4 << "\" text-anchor=\"end\">" << detail::tick_label(b, spec.log_y)
          << "</text>\n";
        o << "<line x1=\"" << L << "\" x2=\"" << L + W << "\" y1=\"" << py(b) << "\" y2=\"" << py(b)
          << "\" stroke=\"#ddd\"/>\n";
    }
    o << "<text x=\"" << L + W / 2 << "\" y=\"" << spec.height - 18 << "\" text-anchor=\"middle\">"
      << detail::xml_escape(spec.x_label) << "</text>\n";
    o << "<text transform=\"translate(18," << T + H / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << detail::xml_escape(spec.y_label) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = palette[k % 8];
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            const double a = tx(s.x[i]), b = ty(s.y[i]);
            if (std::isfinite(a) && std::isfinite(b)) pts.emplace_back(px(a), py(b));
        }
        for (const auto& [a, b] : pts) o << a << ',' << b << ' ';
        o << "\"/>\n";
        if (spec.markers && pts.size() <= 60)
            for (const auto& [a, b] : pts) o << "<circle cx=\"" << a << "\" cy=\"" << b << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        const double ly = T + 14 + 18.0 * static_cast<double>(k);
        o << "<line x1=\"" << L + W + 12 << "\" x2=\"" << L + W + 34 << "\" y1=\"" << ly << "\" y2=\"" << ly << "\" stroke=\""
          << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << L + W + 40 << "\" y=\"" << ly + 4 << "\">" << detail::xml_escape(s.name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

inline void write_svg(const std::string& path, const std::vector<PlotSeries>& series, const PlotSpec& spec) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    f << svg_line_plot(series, spec);
}

// ---------------------------------------------------------------------------
// Sweep, noise and TE outputs

/// For sweeps: mean MSE per variant and target at each grid value.
inline void write_sweep_csv(const std::string& path, const SweepCurve& c) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    f << "param,value,variant,target,mean_mse,mean_mse_normalized,n_completed\n";
    for (const auto& p : c.points)
        for (Variant v : p.report.config.variants)
            for (std::size_t t = 0; t < p.report.target_names.size(); ++t) {
                const auto ti = static_cast<Eigen::Index>(t);
                f << c.param << ',' << csv::num(p.value) << ',' << to_string(v) << ',' << csv::quote(p.report.target_names[t]) << ','
                  << csv::num(p.report.mean_mse(v, ti)) << ',' << csv::num(p.report.mean_mse(v, ti, true)) << ','
                  << p.report.completed() << '\n';
            }
}

inline std::vector<PlotSeries> sweep_series(const SweepCurve& c) {
    std::vector<PlotSeries> out;
    if (c.points.empty()) return out;
    const auto& first = c.points.front().report;
    for (Variant v : first.config.variants)
        for (std::size_t t = 0; t < first.target_names.size(); ++t) {
            PlotSeries s;
            s.name = to_string(v) + " " + first.input_names.front() + "->" + first.target_names[t];
            if (std::find(first.input_names.begin(), first.input_names.end(), first.target_names[t]) != first.input_names.end())
                continue;
            for (const auto& p : c.points) {
                s.x.push_back(p.value);
                s.y.push_back(p.report.mean_mse(v, static_cast<Eigen::Index>(t)));
            }
            out.push_back(std::move(s));
        }
    return out;
}

inline void write_noise_csv(const std::string& path, const std::vector<NoisePoint>& pts) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    f << "eta,target,ro_mean_mse,ror_mean_mse,ror_reduction_pct,n_completed\n";
    for (const auto& p : pts)
        for (std::size_t t = 0; t < p.report.target_names.size(); ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            f << csv::num(p.eta) << ',' << csv::quote(p.report.target_names[t]) << ',' << csv::num(p.report.mean_mse(Variant::RO, ti))
              << ',' << csv::num(p.report.mean_mse(Variant::ROR, ti)) << ',' << csv::num(p.report.reduction(Variant::ROR, ti)) << ','
              << p.report.completed() << '\n';
        }
}

inline std::vector<PlotSeries> te_series(const std::vector<TeEntry>& rows) {
    std::vector<PlotSeries> out;
    for (const auto& r : rows) {
        const std::string name = "T " + r.source + "->" + r.target;
        auto it = std::find_if(out.begin(), out.end(), [&](const PlotSeries& s) { return s.name == name; });
        if (it == out.end()) {
            out.push_back({name, {}, {}});
            it = out.end() - 1;
        }
        it->x.push_back(r.l);
        it->y.push_back(r.nats);
    }
    return out;
}

}  // namespace rolab
