#pragma once

// Structure factor, shell averages, peak tracking, coarsening-law fits, scaling collapse and
// ensemble averages.
//
// S(k) = |dx dy * sum_x e^{-i k.x} phi(x)|^2 per mode, so sum_k S(k) / |Omega| = int phi^2.
// Shell values are the mean over the modes of the shell; the zero mode is kept apart as S0.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "vpsim/grid.hpp"

namespace vpsim {

/// Per-mode intensity over the full spectrum, flat index j*nx + i.
struct StructureFactorMap {
    GridPtr grid;
    std::vector<double> S;
};

inline StructureFactorMap structure_factor(const ScalarField& phi, bool subtract_mean = false) {
    const Grid2D& g = *phi.grid;
    ScalarField f = phi;
    if (subtract_mean) {
        const double mean = integrate(phi) / g.area();
        for (double& v : f.data) v -= mean;
    }
    const Spectrum hat = spectral::forward(f);
    StructureFactorMap out{phi.grid, std::vector<double>(g.size())};
    const double w = g.cell_area() * g.cell_area();
    const int nh = g.nxh();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            // modes beyond the half spectrum are conjugates of (-i, -j)
            const int ii = i < nh ? i : g.nx - i;
            const int jj = i < nh ? j : (g.ny - j) % g.ny;
            out.S[static_cast<std::size_t>(j) * g.nx + i] = w * std::norm(hat[static_cast<std::size_t>(jj) * nh + ii]);
        }
    return out;
}

struct ShellProfile {
    std::vector<double> q;   ///< shell centers
    std::vector<double> S;   ///< mean intensity per shell (0 for empty shells)
    std::vector<std::size_t> count;
    double S0 = 0.0;
};

inline ShellProfile shell_average(const StructureFactorMap& map, const ShellBins& bins) {
    ShellProfile p;
    p.S0 = map.S.at(bins.zero_mode);
    p.q = bins.centers();
    p.S.assign(bins.shells.size(), 0.0);
    p.count.assign(bins.shells.size(), 0);
    for (std::size_t s = 0; s < bins.shells.size(); ++s) {
        const auto& modes = bins.shells[s].modes;
        if (modes.empty()) continue;
        double sum = 0.0;
        for (std::size_t n : modes) sum += map.S.at(n);
        p.S[s] = sum / static_cast<double>(modes.size());
        p.count[s] = modes.size();
    }
    return p;
}

struct Peak {
    double q_max = 0.0;
    double S_max = 0.0;
    std::size_t shell = 0;  ///< discrete argmax
};

/// Discrete argmax over non-empty shells (ties toward smaller q), refined by a parabola through
/// log S at the argmax and its two neighbors when they exist and the fit is concave.
inline Peak peak_track(const std::vector<double>& q, const std::vector<double>& S) {
    if (q.size() != S.size() || q.size() < 3) throw Error("peak_track: need at least 3 shells");
    std::size_t best = S.size();
    for (std::size_t s = 0; s < S.size(); ++s)
        if (S[s] > 0.0 && (best == S.size() || S[s] > S[best])) best = s;
    if (best == S.size()) throw Error("peak_track: spectrum is identically zero");
    Peak pk{q[best], S[best], best};
    if (best == 0 || best + 1 >= S.size() || !(S[best - 1] > 0.0) || !(S[best + 1] > 0.0)) return pk;
    const double l = std::log(S[best - 1]), c = std::log(S[best]), r = std::log(S[best + 1]);
    const double curv = l - 2.0 * c + r;
    if (!(curv < 0.0)) return pk;
    const double h = 0.5 * (q[best + 1] - q[best - 1]);
    const double delta = std::clamp(0.5 * (l - r) / curv, -0.5, 0.5);
    pk.q_max = q[best] + delta * h;
    pk.S_max = std::exp(c - 0.25 * (l - r) * delta);
    return pk;
}

inline Peak peak_track(const ShellProfile& p) { return peak_track(p.q, p.S); }

// ---------------------------------------------------------------------------
// Time series

struct StructureFactorSeries {
    std::vector<double> times;
    std::vector<double> q;                ///< shell centers, shared by all frames
    std::vector<std::vector<double>> S;   ///< [frame][shell]
    std::vector<std::vector<double>> S_stderr;  ///< empty unless produced by ensemble_average
    std::vector<double> S0;
    std::vector<double> q_max;
    std::vector<double> S_max;
    std::size_t ensemble_count = 1;

    std::size_t frames() const { return times.size(); }

    void add_frame(double t, const ShellProfile& p) {
        if (q.empty()) q = p.q;
        if (p.q != q) throw Error("structure factor series: shell layout changed between frames");
        times.push_back(t);
        S.push_back(p.S);
        S0.push_back(p.S0);
        const Peak pk = peak_track(p);
        q_max.push_back(pk.q_max);
        S_max.push_back(pk.S_max);
    }

    void add_frame(double t, const ScalarField& phi, const ShellBins& bins, bool subtract_mean = false) {
        add_frame(t, shell_average(structure_factor(phi, subtract_mean), bins));
    }

    /// Recompute q_max and S_max from the stored frames.
    void retrack() {
        q_max.clear();
        S_max.clear();
        for (const auto& frame : S) {
            const Peak pk = peak_track(q, frame);
            q_max.push_back(pk.q_max);
            S_max.push_back(pk.S_max);
        }
    }
};

/// S / S0 per frame; the q = 0 value itself is not part of the shells and stays omitted.
inline std::vector<std::vector<double>> normalized_by_S0(const StructureFactorSeries& s) {
    std::vector<std::vector<double>> out(s.frames());
    for (std::size_t f = 0; f < s.frames(); ++f) {
        if (!(s.S0[f] > 0.0)) throw Error("normalized_by_S0: S0 must be positive");
        out[f].resize(s.q.size());
        for (std::size_t i = 0; i < s.q.size(); ++i) out[f][i] = s.S[f][i] / s.S0[f];
    }
    return out;
}

/// Pointwise mean with standard error over members sharing times and shells.
inline StructureFactorSeries ensemble_average(const std::vector<StructureFactorSeries>& members) {
    if (members.empty()) throw Error("ensemble_average: no members");
    const auto& ref = members.front();
    for (const auto& m : members)
        if (m.times != ref.times || m.q != ref.q) throw Error("ensemble_average: mismatched times or shells");
    const double n = static_cast<double>(members.size());
    StructureFactorSeries out;
    out.times = ref.times;
    out.q = ref.q;
    out.ensemble_count = members.size();
    out.S.assign(ref.frames(), std::vector<double>(ref.q.size(), 0.0));
    out.S_stderr.assign(ref.frames(), std::vector<double>(ref.q.size(), 0.0));
    out.S0.assign(ref.frames(), 0.0);
    for (std::size_t f = 0; f < ref.frames(); ++f) {
        for (const auto& m : members) out.S0[f] += m.S0[f] / n;
        for (std::size_t i = 0; i < ref.q.size(); ++i) {
            double mean = 0.0;
            for (const auto& m : members) mean += m.S[f][i];
            mean /= n;
            double var = 0.0;
            for (const auto& m : members) var += (m.S[f][i] - mean) * (m.S[f][i] - mean);
            out.S[f][i] = mean;
            out.S_stderr[f][i] = members.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
        }
    }
    out.retrack();
    return out;
}

// ---------------------------------------------------------------------------
// Growth law

struct PowerLawFit {
    double exponent = 0.0;
    double stderr_ = 0.0;
    double prefactor = 0.0;  ///< y = prefactor * t^exponent
    std::size_t points = 0;
};

/// Least-squares slope of log y against log t over t in [t_lo, t_hi].
inline PowerLawFit growth_exponent(const std::vector<double>& t, const std::vector<double>& y, double t_lo,
                                   double t_hi) {
    if (t.size() != y.size()) throw Error("growth_exponent: size mismatch");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_lo || t[i] > t_hi) continue;
        if (!(t[i] > 0.0) || !(y[i] > 0.0)) throw Error("growth_exponent: data must be positive");
        lx.push_back(std::log(t[i]));
        ly.push_back(std::log(y[i]));
    }
    const std::size_t n = lx.size();
    if (n < 5) throw Error("growth_exponent: need at least 5 points in the window");
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) throw Error("growth_exponent: window holds a single time");
    PowerLawFit fit;
    fit.exponent = sxy / sxx;
    const double b = my - fit.exponent * mx;
    fit.prefactor = std::exp(b);
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = ly[i] - (b + fit.exponent * lx[i]);
        rss += e * e;
    }
    fit.stderr_ = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    fit.points = n;
    return fit;
}

/// 3-point running median; endpoints are kept.
inline std::vector<double> median3(const std::vector<double>& x) {
    std::vector<double> out = x;
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
        double a = x[i - 1], b = x[i], c = x[i + 1];
        out[i] = std::max(std::min(a, b), std::min(std::max(a, b), c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dynamic scaling

struct CollapseOptions {
    double x_lo = 0.5;
    double x_hi = 3.0;
    std::size_t samples = 2001;
};

struct CollapseResult {
    std::vector<double> x;                  ///< common abscissa q / q_max
    std::vector<std::vector<double>> curves;  ///< S / S_max per selected frame, resampled on x
    std::vector<std::vector<double>> pair_distance;
    double distance = 0.0;                  ///< max over pairs of the L1 difference on [x_lo, x_hi]
};

/// Linear interpolation of (xs, ys) at x; xs ascending; outside the data range is an error.
inline double interpolate_linear(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (x < xs.front() - 1e-12 || x > xs.back() + 1e-12) throw Error("scaling_collapse: window exceeds the resolved q range");
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    if (it == xs.begin()) return ys.front();
    if (it == xs.end()) return ys.back();
    const std::size_t i = static_cast<std::size_t>(it - xs.begin());
    const double w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return (1.0 - w) * ys[i - 1] + w * ys[i];
}

inline CollapseResult scaling_collapse(const StructureFactorSeries& s, const std::vector<std::size_t>& frames,
                                       const CollapseOptions& opt = {}) {
    if (frames.size() < 2) throw Error("scaling_collapse: need at least two frames");
    if (opt.samples < 2 || !(opt.x_hi > opt.x_lo)) throw Error("scaling_collapse: bad window");
    CollapseResult r;
    r.x.resize(opt.samples);
    for (std::size_t i = 0; i < opt.samples; ++i)
        r.x[i] = opt.x_lo + (opt.x_hi - opt.x_lo) * static_cast<double>(i) / static_cast<double>(opt.samples - 1);
    for (std::size_t f : frames) {
        const double qm = s.q_max.at(f), sm = s.S_max.at(f);
        if (!(qm > 0.0) || !(sm > 0.0)) throw Error("scaling_collapse: degenerate peak in frame " + std::to_string(f));
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < s.q.size(); ++i) {
            xs.push_back(s.q[i] / qm);
            ys.push_back(s.S[f][i] / sm);
        }
        std::vector<double> c(opt.samples);
        for (std::size_t i = 0; i < opt.samples; ++i) c[i] = interpolate_linear(xs, ys, r.x[i]);
        r.curves.push_back(std::move(c));
    }
    const std::size_t m = r.curves.size();
    r.pair_distance.assign(m, std::vector<double>(m, 0.0));
    const double h = (opt.x_hi - opt.x_lo) / static_cast<double>(opt.samples - 1);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) {
            double sum = 0.0;
            for (std::size_t i = 0; i < opt.samples; ++i) {
                const double w = (i == 0 || i + 1 == opt.samples) ? 0.5 : 1.0;
                sum += w * std::abs(r.curves[a][i] - r.curves[b][i]);
            }
            r.pair_distance[a][b] = r.pair_distance[b][a] = sum * h;
            r.distance = std::max(r.distance, sum * h);
        }
    return r;
}

}  // namespace vpsim
