#pragma once

// Benchmark data: Rossler, Lorenz and three-scroll Chua flows integrated with
// fixed-step RK4, the Kuramoto-Sivashinsky equation on a periodic domain by
// ETDRK4, plus normalization, measurement noise and CSV exchange.

#include <fftw3.h>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rolab/error.hpp"
#include "rolab/numerics.hpp"
#include "rolab/rng.hpp"

namespace rolab {

/// Uniformly sampled multivariate series. Row i is the sample at t0 + i*dt.
struct Trajectory {
    double dt = 1.0;
    double t0 = 0.0;
    DenseMatrix values;  // n_steps x n_vars
    std::vector<std::string> var_names;

    Eigen::Index steps() const { return values.rows(); }
    Eigen::Index vars() const { return values.cols(); }

    Eigen::Index index_of(const std::string& name) const {
        for (std::size_t i = 0; i < var_names.size(); ++i)
            if (var_names[i] == name) return static_cast<Eigen::Index>(i);
        throw ConfigError("trajectory has no variable '" + name + "'");
    }

    void validate() const {
        if (!(dt > 0.0)) throw ConfigError("trajectory: dt must be positive");
        if (values.rows() < 2) throw DegenerateInput("trajectory: need at least two samples");
        if (static_cast<Eigen::Index>(var_names.size()) != values.cols())
            throw DimensionError("trajectory: var_names length differs from column count");
        if (!values.allFinite()) throw DegenerateInput("trajectory: non-finite values");
    }
};

// ---------------------------------------------------------------------------
// Low-dimensional flows

enum class OdeKind { rossler, lorenz, chua };

inline std::string to_string(OdeKind k) {
    switch (k) {
        case OdeKind::rossler: return "rossler";
        case OdeKind::lorenz: return "lorenz";
        case OdeKind::chua: return "chua";
    }
    return "?";
}

inline OdeKind ode_kind_from_string(const std::string& s) {
    if (s == "rossler") return OdeKind::rossler;
    if (s == "lorenz") return OdeKind::lorenz;
    if (s == "chua") return OdeKind::chua;
    throw ConfigError("unknown ODE system '" + s + "'");
}

struct OdeSystemSpec {
    OdeKind kind = OdeKind::rossler;
    std::map<std::string, double> params;

    static OdeSystemSpec rossler() { return {OdeKind::rossler, {{"a", 0.5}, {"b", 2.0}, {"c", 4.0}}}; }
    static OdeSystemSpec lorenz() { return {OdeKind::lorenz, {{"a", 10.0}, {"b", 28.0}, {"c", -8.0 / 3.0}}}; }
    static OdeSystemSpec chua() {
        return {OdeKind::chua, {{"a", 12.8}, {"b", -19.1}, {"c1", 0.6}, {"c2", -1.1}, {"c3", 0.45}}};
    }
    static OdeSystemSpec standard(OdeKind k) {
        switch (k) {
            case OdeKind::rossler: return rossler();
            case OdeKind::lorenz: return lorenz();
            case OdeKind::chua: return chua();
        }
        return rossler();
    }

    double param(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end()) throw ConfigError(to_string(kind) + ": missing parameter '" + name + "'");
        return it->second;
    }
};

using State3 = std::array<double, 3>;

/// Vector field of the flow; parameters are resolved once.
class OdeField {
public:
    explicit OdeField(const OdeSystemSpec& spec) : kind_(spec.kind) {
        switch (kind_) {
            case OdeKind::rossler:
            case OdeKind::lorenz:
                p_ = {spec.param("a"), spec.param("b"), spec.param("c"), 0.0, 0.0};
                break;
            case OdeKind::chua:
                p_ = {spec.param("a"), spec.param("b"), spec.param("c1"), spec.param("c2"), spec.param("c3")};
                break;
        }
    }

    State3 operator()(const State3& s) const {
        const double x = s[0], y = s[1], z = s[2];
        switch (kind_) {
            case OdeKind::rossler:
                return {-y - z, x + p_[0] * y, p_[1] + z * (x - p_[2])};
            case OdeKind::lorenz:
                return {p_[0] * (y - x), x * (p_[1] - z) - y, p_[2] * z + x * y};
            case OdeKind::chua: {
                const double g = p_[2] * x + p_[3] * x * std::abs(x) + p_[4] * x * x * x;
                return {p_[0] * (y - g), x - y + z, p_[1] * y};
            }
        }
        return {0, 0, 0};
    }

private:
    OdeKind kind_;
    std::array<double, 5> p_{};
};

/// One classical Runge-Kutta step of size h.
inline State3 rk4_step(const OdeField& f, const State3& s, double h) {
    auto axpy = [](const State3& a, double c, const State3& b) {
        return State3{a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]};
    };
    const State3 k1 = f(s);
    const State3 k2 = f(axpy(s, 0.5 * h, k1));
    const State3 k3 = f(axpy(s, 0.5 * h, k2));
    const State3 k4 = f(axpy(s, h, k3));
    State3 out;
    for (int i = 0; i < 3; ++i) out[i] = s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

struct OdeRunOptions {
    std::optional<State3> init;  // drawn uniform in [-w, w]^3 from seed when absent
    double init_half_width = 1.0;
    std::size_t washout_steps = 1000;
    int substeps = 10;
    std::uint64_t seed = 0;
};

/// Samples n_steps points spaced by dt after discarding washout_steps samples.
inline Trajectory simulate_ode(const OdeSystemSpec& spec, std::size_t n_steps, double dt, const OdeRunOptions& opt = {}) {
    if (!(dt > 0.0)) throw ConfigError("simulate_ode: dt must be positive");
    if (n_steps < 1) throw ConfigError("simulate_ode: n_steps must be at least 1");
    if (opt.substeps < 1) throw ConfigError("simulate_ode: substeps must be at least 1");
    const OdeField field(spec);

    State3 s;
    if (opt.init) {
        s = *opt.init;
    } else {
        Rng rng = make_rng(opt.seed, "data.init");
        if (!(opt.init_half_width > 0.0)) throw ConfigError("simulate_ode: init half-width must be positive");
        for (double& v : s) v = uniform(rng, -opt.init_half_width, opt.init_half_width);
    }

    const double h = dt / opt.substeps;
    Trajectory out;
    out.dt = dt;
    out.var_names = {"x", "y", "z"};
    out.values.resize(static_cast<Eigen::Index>(n_steps), 3);
    const std::size_t total = opt.washout_steps + n_steps;
    for (std::size_t i = 0; i < total; ++i) {
        if (i > 0)
            for (int k = 0; k < opt.substeps; ++k) s = rk4_step(field, s, h);
        if (!std::isfinite(s[0]) || !std::isfinite(s[1]) || !std::isfinite(s[2]))
            throw Divergence("simulate_ode: non-finite state", i);
        if (i >= opt.washout_steps) {
            const auto row = static_cast<Eigen::Index>(i - opt.washout_steps);
            for (int c = 0; c < 3; ++c) out.values(row, c) = s[c];
        }
    }
    out.t0 = static_cast<double>(opt.washout_steps) * dt;
    return out;
}

// ---------------------------------------------------------------------------
// Kuramoto-Sivashinsky  y_t = -y y_x - y_xx - y_xxxx  on [0, L) periodic

struct KsSpec {
    double domain_length = 22.0;
    int grid_points = 64;
    double dt = 0.25;
    int substeps = 1;
    int contour_points = 32;

    void validate() const {
        if (!(domain_length > 0.0)) throw ConfigError("ks: domain length must be positive");
        if (grid_points < 4 || grid_points % 2 != 0) throw ConfigError("ks: grid points must be even and >= 4");
        if (!(dt > 0.0) || substeps < 1) throw ConfigError("ks: invalid time step");
        if (contour_points < 4) throw ConfigError("ks: too few contour points");
    }
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace detail

/// ETDRK4 integrator on the real Fourier modes of the field.
class KsSolver {
public:
    using Complex = std::complex<double>;

    explicit KsSolver(const KsSpec& spec) : spec_(spec) {
        spec_.validate();
        const int q = spec_.grid_points;
        const int modes = q / 2 + 1;
        real_ = fftw_alloc_real(static_cast<std::size_t>(q));
        spec_buf_ = fftw_alloc_complex(static_cast<std::size_t>(modes));
        {
            std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
            forward_ = fftw_plan_dft_r2c_1d(q, real_, spec_buf_, FFTW_ESTIMATE);
            backward_ = fftw_plan_dft_c2r_1d(q, spec_buf_, real_, FFTW_ESTIMATE);
        }

        const double h = spec_.dt / spec_.substeps;
        wavenumber_.resize(modes);
        deriv_.resize(modes);
        e_.resize(modes);
        e2_.resize(modes);
        qcoef_.resize(modes);
        f1_.resize(modes);
        f2_.resize(modes);
        f3_.resize(modes);
        const int m = spec_.contour_points;
        for (int k = 0; k < modes; ++k) {
            const double qk = 2.0 * std::numbers::pi * k / spec_.domain_length;
            wavenumber_[k] = qk;
            // Odd derivative of the Nyquist mode is zero for a real field.
            deriv_[k] = (k == q / 2) ? Complex(0.0, 0.0) : Complex(0.0, qk);
            const double lin = qk * qk - qk * qk * qk * qk;
            e_[k] = std::exp(h * lin);
            e2_[k] = std::exp(0.5 * h * lin);

            // phi-functions by a contour mean around h*lin.
            double sq = 0, s1 = 0, s2 = 0, s3 = 0;
            for (int j = 1; j <= m; ++j) {
                const Complex r = std::exp(Complex(0.0, std::numbers::pi * (j - 0.5) / m));
                const Complex lr = h * lin + r;
                const Complex el = std::exp(lr);
                const Complex lr3 = lr * lr * lr;
                sq += std::real((std::exp(0.5 * lr) - 1.0) / lr);
                s1 += std::real((-4.0 - lr + el * (4.0 - 3.0 * lr + lr * lr)) / lr3);
                s2 += std::real((2.0 + lr + el * (-2.0 + lr)) / lr3);
                s3 += std::real((-4.0 - 3.0 * lr - lr * lr + el * (4.0 - lr)) / lr3);
            }
            qcoef_[k] = h * sq / m;
            f1_[k] = h * s1 / m;
            f2_[k] = h * s2 / m;
            f3_[k] = h * s3 / m;
        }
    }

    KsSolver(const KsSolver&) = delete;
    KsSolver& operator=(const KsSolver&) = delete;

    ~KsSolver() {
        {
            std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
            fftw_destroy_plan(forward_);
            fftw_destroy_plan(backward_);
        }
        fftw_free(real_);
        fftw_free(spec_buf_);
    }

    const KsSpec& spec() const { return spec_; }
    double wavenumber(int k) const { return wavenumber_[static_cast<std::size_t>(k)]; }

    std::vector<Complex> to_spectrum(const std::vector<double>& field) const {
        const int q = spec_.grid_points;
        for (int i = 0; i < q; ++i) real_[i] = field[static_cast<std::size_t>(i)];
        fftw_execute(forward_);
        std::vector<Complex> out(static_cast<std::size_t>(q / 2 + 1));
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = Complex(spec_buf_[k][0], spec_buf_[k][1]);
        return out;
    }

    std::vector<double> to_field(const std::vector<Complex>& v) const {
        const int q = spec_.grid_points;
        for (std::size_t k = 0; k < v.size(); ++k) {
            spec_buf_[k][0] = v[k].real();
            spec_buf_[k][1] = v[k].imag();
        }
        fftw_execute(backward_);
        std::vector<double> out(static_cast<std::size_t>(q));
        for (int i = 0; i < q; ++i) out[static_cast<std::size_t>(i)] = real_[i] / q;
        return out;
    }

    /// Advances the spectrum by one sampling interval.
    void advance(std::vector<Complex>& v) const {
        for (int s = 0; s < spec_.substeps; ++s) step(v);
    }

private:
    // -0.5 d/dx (y^2) in spectral space.
    std::vector<Complex> nonlinear(const std::vector<Complex>& v) const {
        std::vector<double> y = to_field(v);
        for (double& val : y) val = val * val;
        std::vector<Complex> out = to_spectrum(y);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] *= -0.5 * deriv_[k];
        return out;
    }

    void step(std::vector<Complex>& v) const {
        const std::size_t n = v.size();
        const auto nv = nonlinear(v);
        std::vector<Complex> a(n), b(n), c(n);
        for (std::size_t k = 0; k < n; ++k) a[k] = e2_[k] * v[k] + qcoef_[k] * nv[k];
        const auto na = nonlinear(a);
        for (std::size_t k = 0; k < n; ++k) b[k] = e2_[k] * v[k] + qcoef_[k] * na[k];
        const auto nb = nonlinear(b);
        for (std::size_t k = 0; k < n; ++k) c[k] = e2_[k] * a[k] + qcoef_[k] * (2.0 * nb[k] - nv[k]);
        const auto nc = nonlinear(c);
        for (std::size_t k = 0; k < n; ++k)
            v[k] = e_[k] * v[k] + nv[k] * f1_[k] + 2.0 * (na[k] + nb[k]) * f2_[k] + nc[k] * f3_[k];
    }

    KsSpec spec_;
    double* real_ = nullptr;
    fftw_complex* spec_buf_ = nullptr;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
    std::vector<double> wavenumber_;
    std::vector<Complex> deriv_;
    std::vector<double> e_, e2_, qcoef_, f1_, f2_, f3_;
};

struct KsRunOptions {
    std::optional<std::vector<double>> init;  // grid values; random when absent
    std::size_t washout_steps = 1000;
    std::uint64_t seed = 0;
};

/// Random KS initial field: grid values uniform in [-0.5, 0.5], mean removed.
inline std::vector<double> ks_random_init(int grid_points, std::uint64_t seed) {
    Rng rng = make_rng(seed, "data.init");
    std::vector<double> y(static_cast<std::size_t>(grid_points));
    double mean = 0.0;
    for (double& v : y) {
        v = uniform(rng, -0.5, 0.5);
        mean += v;
    }
    mean /= grid_points;
    for (double& v : y) v -= mean;
    return y;
}

inline Trajectory simulate_ks(const KsSpec& spec, std::size_t n_steps, const KsRunOptions& opt = {}) {
    spec.validate();
    if (n_steps < 1) throw ConfigError("simulate_ks: n_steps must be at least 1");
    const int q = spec.grid_points;
    std::vector<double> y0 = opt.init ? *opt.init : ks_random_init(q, opt.seed);
    if (static_cast<int>(y0.size()) != q) throw DimensionError("simulate_ks: init length differs from grid size");

    const KsSolver solver(spec);
    auto v = solver.to_spectrum(y0);

    Trajectory out;
    out.dt = spec.dt;
    out.t0 = static_cast<double>(opt.washout_steps) * spec.dt;
    out.values.resize(static_cast<Eigen::Index>(n_steps), q);
    out.var_names.reserve(static_cast<std::size_t>(q));
    for (int i = 0; i < q; ++i) out.var_names.push_back("y" + std::to_string(i));

    const std::size_t total = opt.washout_steps + n_steps;
    std::vector<double> field = y0;
    for (std::size_t i = 0; i < total; ++i) {
        if (i > 0) {
            solver.advance(v);
            field = solver.to_field(v);
        }
        for (double val : field)
            if (!std::isfinite(val)) throw Divergence("simulate_ks: non-finite field", i);
        if (i >= opt.washout_steps) {
            const auto row = static_cast<Eigen::Index>(i - opt.washout_steps);
            for (int c = 0; c < q; ++c) out.values(row, c) = field[static_cast<std::size_t>(c)];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normalization and noise

struct StepRange {
    Eigen::Index begin = 0;
    Eigen::Index end = 0;  // exclusive

    Eigen::Index size() const { return end - begin; }
};

struct NormalizationStats {
    Vector mean;
    Vector scale;  // population standard deviation
};

/// Applies (x - mean) / scale channel-wise.
inline DenseMatrix apply_normalization(const DenseMatrix& values, const NormalizationStats& st) {
    return (values.rowwise() - st.mean.transpose()).array().rowwise() / st.scale.transpose().array();
}

inline DenseMatrix invert_normalization(const DenseMatrix& values, const NormalizationStats& st) {
    return (values.array().rowwise() * st.scale.transpose().array()).rowwise() + st.mean.transpose().array();
}

inline NormalizationStats normalization_stats(const DenseMatrix& values, StepRange window) {
    if (window.begin < 0 || window.end > values.rows() || window.size() < 1)
        throw ConfigError("normalize: reference window outside the series");
    const auto block = values.middleRows(window.begin, window.size());
    NormalizationStats st;
    st.mean = block.colwise().mean().transpose();
    st.scale = ((block.rowwise() - st.mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
    for (Eigen::Index c = 0; c < st.scale.size(); ++c)
        if (!(st.scale[c] > 0.0)) throw DegenerateInput("normalize: constant channel " + std::to_string(c));
    return st;
}

struct NormalizedTrajectory {
    Trajectory trajectory;
    NormalizationStats stats;
};

/// Standardizes every variable with statistics from reference_window only.
inline NormalizedTrajectory normalize_series(const Trajectory& t, StepRange window) {
    NormalizedTrajectory out;
    out.stats = normalization_stats(t.values, window);
    out.trajectory = t;
    out.trajectory.values = apply_normalization(t.values, out.stats);
    return out;
}

inline Trajectory denormalize_series(const Trajectory& t, const NormalizationStats& st) {
    Trajectory out = t;
    out.values = invert_normalization(t.values, st);
    return out;
}

struct NoiseSpec {
    double eta = 0.0;  // half-width of the uniform perturbation
};

inline Trajectory add_uniform_noise(const Trajectory& t, NoiseSpec noise, std::uint64_t seed) {
    if (!(noise.eta >= 0.0)) throw ConfigError("add_uniform_noise: eta must be nonnegative");
    Trajectory out = t;
    if (noise.eta == 0.0) return out;
    Rng rng = make_rng(seed, "noise");
    for (Eigen::Index i = 0; i < out.values.rows(); ++i)
        for (Eigen::Index j = 0; j < out.values.cols(); ++j) out.values(i, j) += uniform(rng, -noise.eta, noise.eta);
    return out;
}

// ---------------------------------------------------------------------------
// CSV: header "t,<var_names...>", one row per sample, 17 significant digits.

inline void write_trajectory_csv(std::ostream& os, const Trajectory& t) {
    os << "t";
    for (const auto& n : t.var_names) os << ',' << n;
    os << '\n';
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
        os << t.t0 + static_cast<double>(i) * t.dt;
        for (Eigen::Index j = 0; j < t.values.cols(); ++j) os << ',' << t.values(i, j);
        os << '\n';
    }
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& t) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open '" + path + "' for writing");
    write_trajectory_csv(os, t);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        cells.push_back(cell);
    }
    return cells;
}

}  // namespace detail

inline Trajectory read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw Error("trajectory csv: empty input");
    auto header = detail::split_csv_line(line);
    if (header.size() < 2) throw Error("trajectory csv: need a time column and at least one variable");

    Trajectory t;
    t.var_names.assign(header.begin() + 1, header.end());
    std::vector<double> times;
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) throw Error("trajectory csv: ragged row " + std::to_string(rows.size() + 1));
        times.push_back(std::stod(cells[0]));
        std::vector<double> row;
        row.reserve(cells.size() - 1);
        for (std::size_t c = 1; c < cells.size(); ++c) row.push_back(std::stod(cells[c]));
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2) throw DegenerateInput("trajectory csv: need at least two rows");
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.var_names.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    t.t0 = times.front();
    t.dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    return t;
}

inline Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open '" + path + "'");
    return read_trajectory_csv(is);
}

}  // namespace rolab
