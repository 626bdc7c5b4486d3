#pragma once

// Plug-in transfer entropy on equal-width histograms.
//
// T_{J->I} = sum p(i', i^(k), j^(l)) ln[ p(i' | i^(k), j^(l)) / p(i' | i^(k)) ]
// with i' the next target symbol. Counts are taken over joint symbol words
// packed into 64-bit keys and tallied by sorting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <string>
#include <vector>

#include "rolab/dynamics.hpp"
#include "rolab/error.hpp"

namespace rolab {

struct TeSpec {
    int k = 1;
    int l = 1;
    int n_bins = 8;

    void validate() const {
        if (k < 1 || l < 1) throw ConfigError("transfer entropy: history lengths must be at least 1");
        if (n_bins < 2) throw ConfigError("transfer entropy: need at least two bins");
        const double bits = std::log2(static_cast<double>(n_bins)) * (k + l + 1);
        if (bits > 63.0) throw ConfigError("transfer entropy: joint words do not fit in 64 bits");
    }
};

using Symbols = std::vector<std::uint32_t>;

/// Equal-width bins over [min, max]; the maximum falls in the top bin.
inline Symbols discretize(const std::vector<double>& series, int n_bins) {
    if (n_bins < 2) throw ConfigError("discretize: need at least two bins");
    if (series.empty()) throw DegenerateInput("discretize: empty series");
    for (double v : series)
        if (!std::isfinite(v)) throw DegenerateInput("discretize: non-finite value");
    const auto [lo_it, hi_it] = std::minmax_element(series.begin(), series.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) throw DegenerateInput("discretize: constant series");
    const double width = (hi - lo) / n_bins;
    Symbols out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        auto b = static_cast<long>(std::floor((series[i] - lo) / width));
        out[i] = static_cast<std::uint32_t>(std::clamp<long>(b, 0, n_bins - 1));
    }
    return out;
}

namespace detail {

inline std::uint64_t ipow(std::uint64_t b, int e) {
    std::uint64_t r = 1;
    while (e-- > 0) r *= b;
    return r;
}

/// Packs s[t - len + 1 .. t] into a base-n word.
inline std::uint64_t history_word(const Symbols& s, std::size_t t, int len, std::uint64_t base) {
    std::uint64_t w = 0;
    for (int j = len - 1; j >= 0; --j) w = w * base + s[t - static_cast<std::size_t>(j)];
    return w;
}

inline std::size_t count_of(const std::vector<std::uint64_t>& sorted, std::uint64_t key) {
    const auto r = std::equal_range(sorted.begin(), sorted.end(), key);
    return static_cast<std::size_t>(r.second - r.first);
}

}  // namespace detail

struct TeEstimate {
    double nats = 0.0;
    std::size_t n_samples = 0;
};

/// Transfer entropy from symbol sequences. Only time indices t >= offset - 1
/// contribute as "present", so several calls with different l can share one
/// sample set; offset = 0 selects max(k, l).
inline TeEstimate transfer_entropy_symbols(const Symbols& target, const Symbols& source, const TeSpec& spec,
                                           std::size_t offset = 0) {
    spec.validate();
    if (target.size() != source.size()) throw DimensionError("transfer_entropy: series lengths differ");
    const std::size_t hist = static_cast<std::size_t>(std::max(spec.k, spec.l));
    if (offset == 0) offset = hist;
    if (offset < hist) throw ConfigError("transfer_entropy: offset shorter than the histories");
    if (target.size() < offset + 2) throw DegenerateInput("transfer_entropy: series too short for the histories");

    const auto base = static_cast<std::uint64_t>(spec.n_bins);
    const std::uint64_t kspan = detail::ipow(base, spec.k);
    const std::uint64_t lspan = detail::ipow(base, spec.l);
    for (std::size_t i = 0; i < target.size(); ++i)
        if (target[i] >= base || source[i] >= base) throw DimensionError("transfer_entropy: symbol out of range");

    // t indexes the present; i' = target[t + 1].
    const std::size_t n = target.size() - offset;
    std::vector<std::uint64_t> joint(n), past(n), past_src(n), next_past(n);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t t = offset - 1 + s;
        const std::uint64_t ik = detail::history_word(target, t, spec.k, base);
        const std::uint64_t jl = detail::history_word(source, t, spec.l, base);
        const std::uint64_t nx = target[t + 1];
        past[s] = ik;
        past_src[s] = ik * lspan + jl;
        next_past[s] = nx * kspan + ik;
        joint[s] = (nx * kspan + ik) * lspan + jl;
    }
    std::sort(joint.begin(), joint.end());
    std::sort(past.begin(), past.end());
    std::sort(past_src.begin(), past_src.end());
    std::sort(next_past.begin(), next_past.end());

    double acc = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && joint[j] == joint[i]) ++j;
        const std::uint64_t key = joint[i];
        const std::uint64_t jl = key % lspan;
        const std::uint64_t np = key / lspan;
        const std::uint64_t ik = np % kspan;
        const auto c_joint = static_cast<double>(j - i);
        const auto c_past = static_cast<double>(detail::count_of(past, ik));
        const auto c_past_src = static_cast<double>(detail::count_of(past_src, ik * lspan + jl));
        const auto c_next_past = static_cast<double>(detail::count_of(next_past, np));
        acc += c_joint * std::log((c_joint * c_past) / (c_past_src * c_next_past));
        i = j;
    }
    TeEstimate out;
    out.nats = std::max(0.0, acc / static_cast<double>(n));
    out.n_samples = n;
    return out;
}

inline TeEstimate transfer_entropy(const std::vector<double>& target, const std::vector<double>& source,
                                   const TeSpec& spec, std::size_t offset = 0) {
    return transfer_entropy_symbols(discretize(target, spec.n_bins), discretize(source, spec.n_bins), spec, offset);
}

struct TeEntry {
    std::string source;
    std::string target;
    int l = 1;
    double nats = 0.0;
    std::size_t n_samples = 0;
    int n_bins = 8;
};

/// T_{J->I} for every ordered pair of distinct variables and l = 1..l_max,
/// all evaluated on the same set of present indices.
inline std::vector<TeEntry> te_profile(const Trajectory& tr, const TeSpec& base, int l_max = 5) {
    if (tr.vars() < 2) throw DegenerateInput("te_profile: need at least two variables");
    if (l_max < 1) throw ConfigError("te_profile: l_max must be at least 1");
    std::vector<Symbols> sym;
    for (Eigen::Index v = 0; v < tr.vars(); ++v) {
        std::vector<double> col(static_cast<std::size_t>(tr.steps()));
        for (Eigen::Index i = 0; i < tr.steps(); ++i) col[static_cast<std::size_t>(i)] = tr.values(i, v);
        sym.push_back(discretize(col, base.n_bins));
    }
    const auto offset = static_cast<std::size_t>(std::max(base.k, l_max));
    std::vector<TeEntry> out;
    for (Eigen::Index j = 0; j < tr.vars(); ++j)
        for (Eigen::Index i = 0; i < tr.vars(); ++i) {
            if (i == j) continue;
            for (int l = 1; l <= l_max; ++l) {
                TeSpec s = base;
                s.l = l;
                const TeEstimate e = transfer_entropy_symbols(sym[static_cast<std::size_t>(i)],
                                                              sym[static_cast<std::size_t>(j)], s, offset);
                out.push_back({tr.var_names[static_cast<std::size_t>(j)], tr.var_names[static_cast<std::size_t>(i)], l,
                               e.nats, e.n_samples, s.n_bins});
            }
        }
    return out;
}

inline void write_te_csv(const std::string& path, const std::vector<TeEntry>& rows) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    f << "source,target,l,te_nats,n_samples,n_bins\n" << std::setprecision(17);
    for (const auto& r : rows)
        f << r.source << ',' << r.target << ',' << r.l << ',' << r.nats << ',' << r.n_samples << ',' << r.n_bins << '\n';
}

}  // namespace rolab
