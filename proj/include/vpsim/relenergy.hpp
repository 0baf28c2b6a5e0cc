#pragma once

// Relative energy between two states, relative dissipation, residuals of a given smooth
// trajectory inserted into the weak form, and stability reports over trajectory pairs.
//
// The relative energy is the Bregman distance of the modified (convexified) energy
//   E_mod(z) = E_mix + E_bulk + E_kin + int (1/4 |C|^2 + alpha/2 phi^2),
// i.e. E_mod(z) - E_mod(z_hat) - <E_mod'(z_hat), z - z_hat>. |C|^2 is the Frobenius norm.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vpsim/dynamics.hpp"
#include "vpsim/physics.hpp"
#include "vpsim/state.hpp"

namespace vpsim {

inline void require_same_grid(const State& a, const State& b, const char* where) {
    if (!a.grid()->same_layout(*b.grid())) throw Error(std::string(where) + ": states live on different grids");
}

/// f(phi | phi_hat) = f(phi) - f(phi_hat) - f'(phi_hat) (phi - phi_hat), pointwise.
inline ScalarField taylor_remainder_f(const ScalarField& phi, const ScalarField& phi_hat, const ModelParams& p) {
    ScalarField r(phi.grid);
    for (std::size_t n = 0; n < r.size(); ++n) {
        const double a = phi.data[n], b = phi_hat.data[n];
        r.data[n] = potential_f(a, p) - potential_f(b, p) - potential_fprime(b, p) * (a - b);
    }
    return r;
}

/// Modified energy; alpha resolved from params (NaN selects alpha_min + 1).
inline double modified_energy(const State& s, const ModelParams& p) {
    const double alpha = alpha_value(p);
    const Grid2D& g = *s.grid();
    const VectorField gphi = gradient(s.phi);
    double e = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
        const double phi = s.phi.data[n];
        const double gx = gphi.x.data[n], gy = gphi.y.data[n];
        const double a = s.C.c11.data[n], b = s.C.c12.data[n], d = s.C.c22.data[n];
        e += 0.5 * p.c0 * (gx * gx + gy * gy) + potential_f(phi, p) + 0.5 * s.q.data[n] * s.q.data[n] +
             0.5 * (s.v.x.data[n] * s.v.x.data[n] + s.v.y.data[n] * s.v.y.data[n]) +
             0.25 * (a * a + 2.0 * b * b + d * d) + 0.5 * alpha * phi * phi;
    }
    return e * g.cell_area();
}

struct RelativeEnergyReport {
    double t = 0.0;
    double E_grad = 0.0, E_taylor = 0.0, E_q = 0.0, E_v = 0.0, E_C = 0.0, E_alpha = 0.0;
    double E_rel = 0.0;
    double D_mix = 0.0, D_q_relax = 0.0, D_q_diff = 0.0, D_visc = 0.0, D_C_diff = 0.0, D_C_relax = 0.0;
    double D_rel = 0.0;
    double ratio_to_initial = std::numeric_limits<double>::quiet_NaN();
};

inline RelativeEnergyReport relative_energy(const State& z, const State& zh, const ModelParams& p) {
    require_same_grid(z, zh, "relative_energy");
    const double alpha = alpha_value(p);
    const Grid2D& g = *z.grid();
    const double da = g.cell_area();
    ScalarField dphi(z.grid());
    for (std::size_t n = 0; n < g.size(); ++n) dphi.data[n] = z.phi.data[n] - zh.phi.data[n];
    const VectorField gd = gradient(dphi);
    double eg = 0.0, et = 0.0, eq = 0.0, ev = 0.0, ec = 0.0, ea = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
        eg += 0.5 * p.c0 * (gd.x.data[n] * gd.x.data[n] + gd.y.data[n] * gd.y.data[n]);
        const double a = z.phi.data[n], b = zh.phi.data[n];
        et += potential_f(a, p) - potential_f(b, p) - potential_fprime(b, p) * (a - b);
        const double dq = z.q.data[n] - zh.q.data[n];
        eq += 0.5 * dq * dq;
        const double dvx = z.v.x.data[n] - zh.v.x.data[n], dvy = z.v.y.data[n] - zh.v.y.data[n];
        ev += 0.5 * (dvx * dvx + dvy * dvy);
        const double d11 = z.C.c11.data[n] - zh.C.c11.data[n], d12 = z.C.c12.data[n] - zh.C.c12.data[n],
                     d22 = z.C.c22.data[n] - zh.C.c22.data[n];
        ec += 0.25 * (d11 * d11 + 2.0 * d12 * d12 + d22 * d22);
        ea += 0.5 * alpha * dphi.data[n] * dphi.data[n];
    }
    RelativeEnergyReport r;
    r.t = z.t;
    r.E_grad = eg * da;
    r.E_taylor = et * da;
    r.E_q = eq * da;
    r.E_v = ev * da;
    r.E_C = ec * da;
    r.E_alpha = ea * da;
    r.E_rel = r.E_grad + r.E_taylor + r.E_q + r.E_v + r.E_C + r.E_alpha;
    return r;
}

/// Relative dissipation; coefficient functions are evaluated at z (the first argument).
/// Fills the D fields of `into` and returns it.
inline RelativeEnergyReport relative_dissipation(const State& z, const State& zh, const ModelParams& p,
                                                 RelativeEnergyReport into = {}) {
    require_same_grid(z, zh, "relative_dissipation");
    const GridPtr& gp = z.grid();
    const Grid2D& g = *gp;
    const double da = g.cell_area();
    const ScalarField mu = chemical_potential(z.phi, p), muh = chemical_potential(zh.phi, p);
    ScalarField dmu(gp), adq(gp), dq(gp), dvx(gp), dvy(gp), d11(gp), d12(gp), d22(gp);
    for (std::size_t n = 0; n < g.size(); ++n) {
        dmu.data[n] = mu.data[n] - muh.data[n];
        dq.data[n] = z.q.data[n] - zh.q.data[n];
        adq.data[n] = asymmetry_A(z.phi.data[n], p) * dq.data[n];
        dvx.data[n] = z.v.x.data[n] - zh.v.x.data[n];
        dvy.data[n] = z.v.y.data[n] - zh.v.y.data[n];
        d11.data[n] = z.C.c11.data[n] - zh.C.c11.data[n];
        d12.data[n] = z.C.c12.data[n] - zh.C.c12.data[n];
        d22.data[n] = z.C.c22.data[n] - zh.C.c22.data[n];
    }
    const VectorField gmu = gradient(dmu), gaq = gradient(adq), gq = gradient(dq);
    const VectorField gvx = gradient(dvx), gvy = gradient(dvy);
    const VectorField g11 = gradient(d11), g12 = gradient(d12), g22 = gradient(d22);
    double dm = 0.0, dr = 0.0, dd = 0.0, dv = 0.0, dcd = 0.0, dcr = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
        const ParamValues pv = param_functions(z.phi.data[n], p);
        const double fx = pv.n * gmu.x.data[n] - gaq.x.data[n], fy = pv.n * gmu.y.data[n] - gaq.y.data[n];
        dm += fx * fx + fy * fy;
        dr += pv.h1 * dq.data[n] * dq.data[n];
        dd += gq.x.data[n] * gq.x.data[n] + gq.y.data[n] * gq.y.data[n];
        const double sxx = gvx.x.data[n], syy = gvy.y.data[n], sxy = 0.5 * (gvx.y.data[n] + gvy.x.data[n]);
        dv += pv.eta * (sxx * sxx + 2.0 * sxy * sxy + syy * syy);
        auto fro = [](double a, double b, double d) { return a * a + 2.0 * b * b + d * d; };
        dcd += fro(g11.x.data[n], g12.x.data[n], g22.x.data[n]) + fro(g11.y.data[n], g12.y.data[n], g22.y.data[n]);
        const double tr = z.C.c11.data[n] + z.C.c22.data[n];
        dcr += pv.h2 * bulk_B(tr, p) * tr * fro(d11.data[n], d12.data[n], d22.data[n]);
    }
    into.D_mix = 0.5 * dm * da;
    into.D_q_relax = 0.5 * dr * da;
    into.D_q_diff = 0.5 * p.eps1 * dd * da;
    into.D_visc = 0.5 * dv * da;
    into.D_C_diff = 0.5 * 0.5 * p.eps2 * dcd * da;
    into.D_C_relax = 0.5 * dcr * da;
    into.D_rel = into.D_mix + into.D_q_relax + into.D_q_diff + into.D_visc + into.D_C_diff + into.D_C_relax;
    return into;
}

inline RelativeEnergyReport relative_report(const State& z, const State& zh, const ModelParams& p) {
    return relative_dissipation(z, zh, p, relative_energy(z, zh, p));
}

// ---------------------------------------------------------------------------
// Residuals

/// Where the mobility, asymmetry and relaxation coefficients of the residual system are evaluated.
enum class CoefficientSource {
    Hat,   ///< at phi_hat (and C_hat): residuals of an exact solution vanish
    Weak,  ///< at the weak solution's phi and C, mixed-argument form
};

/// Strong-form (Riesz) representatives of the residuals; rates per model time unit.
struct ResidualFields {
    ScalarField phi, mu, q;
    VectorField v;  ///< projected onto divergence-free fields (pressure absorbed)
    ConformationField C;
};

struct ResidualReport {
    double t = 0.0;
    double r_phi = 0.0, r_mu = 0.0, r_q = 0.0, r_v = 0.0, r_C = 0.0;  ///< norms
    double total = 0.0;  ///< ||r_mu||_1^2 + sum of ||r_i||_{-1}^2
};

struct ResidualInputs {
    const State* z_hat = nullptr;
    const State* dt_z_hat = nullptr;            ///< time derivative (model time units), required
    const ScalarField* mu_hat = nullptr;        ///< optional; computed from phi_hat when absent
    const State* z_weak = nullptr;              ///< required for CoefficientSource::Weak
    CoefficientSource source = CoefficientSource::Hat;
};

inline ResidualFields residual_fields(const ResidualInputs& in, const ModelParams& p) {
    if (!in.z_hat) throw Error("residuals: missing state");
    if (!in.dt_z_hat) throw Error("residuals: missing time derivative");
    const State& zh = *in.z_hat;
    const State& dt = *in.dt_z_hat;
    require_same_grid(zh, dt, "residuals");
    const bool weak = in.source == CoefficientSource::Weak;
    if (weak && !in.z_weak) throw Error("residuals: weak-solution coefficients need z_weak");
    const State& zc = weak ? *in.z_weak : zh;
    if (weak) require_same_grid(zh, zc, "residuals");
    const GridPtr& gp = zh.grid();
    const Grid2D& g = *gp;
    const std::size_t N = g.size();

    const ScalarField mu_from_phi = chemical_potential(zh.phi, p);
    const ScalarField& muh = in.mu_hat ? *in.mu_hat : mu_from_phi;

    std::vector<ParamValues> pv(N);
    for (std::size_t n = 0; n < N; ++n) pv[n] = param_functions(zc.phi.data[n], p);

    ResidualFields r;
    // r_mu = mu_hat + c0 lap phi_hat - f'(phi_hat)
    r.mu = ScalarField(gp);
    for (std::size_t n = 0; n < N; ++n) r.mu.data[n] = muh.data[n] - mu_from_phi.data[n];

    const VectorField gmu = gradient(muh), gphi = gradient(zh.phi), gq = gradient(zh.q);
    ScalarField aq(gp);
    for (std::size_t n = 0; n < N; ++n) aq.data[n] = pv[n].A * zh.q.data[n];
    const VectorField gaq = gradient(aq);

    // r_phi = dt phi + v.grad phi - div(n^2 grad mu - n grad(A q))
    {
        VectorField flux(gp);
        for (std::size_t n = 0; n < N; ++n) {
            flux.x.data[n] = pv[n].n2 * gmu.x.data[n] - pv[n].n * gaq.x.data[n];
            flux.y.data[n] = pv[n].n2 * gmu.y.data[n] - pv[n].n * gaq.y.data[n];
        }
        const ScalarField d = divergence(flux);
        r.phi = ScalarField(gp);
        for (std::size_t n = 0; n < N; ++n)
            r.phi.data[n] = dt.phi.data[n] + zh.v.x.data[n] * gphi.x.data[n] + zh.v.y.data[n] * gphi.y.data[n] -
                            d.data[n];
    }
    // r_q = dt q + v.grad q - eps1 lap q + h1 q - A div(grad(A q) - n grad mu)
    {
        VectorField flux(gp);
        for (std::size_t n = 0; n < N; ++n) {
            flux.x.data[n] = gaq.x.data[n] - pv[n].n * gmu.x.data[n];
            flux.y.data[n] = gaq.y.data[n] - pv[n].n * gmu.y.data[n];
        }
        const ScalarField d = divergence(flux);
        const ScalarField lq = laplacian(zh.q);
        r.q = ScalarField(gp);
        for (std::size_t n = 0; n < N; ++n)
            r.q.data[n] = dt.q.data[n] + zh.v.x.data[n] * gq.x.data[n] + zh.v.y.data[n] * gq.y.data[n] -
                          p.eps1 * lq.data[n] + pv[n].h1 * zh.q.data[n] - pv[n].A * d.data[n];
    }
    // r_v = P[dt v + (v.grad)v - div(eta D_S v) - div(trC C) - mu grad phi]
    const VectorField gvx = gradient(zh.v.x), gvy = gradient(zh.v.y);
    {
        ScalarField sxx(gp), sxy(gp), syy(gp);
        for (std::size_t n = 0; n < N; ++n) {
            const double a = zh.C.c11.data[n], b = zh.C.c12.data[n], d = zh.C.c22.data[n], tr = a + d;
            sxx.data[n] = pv[n].eta * gvx.x.data[n] + tr * a;
            sxy.data[n] = pv[n].eta * 0.5 * (gvx.y.data[n] + gvy.x.data[n]) + tr * b;
            syy.data[n] = pv[n].eta * gvy.y.data[n] + tr * d;
        }
        const ScalarField dx = divergence(VectorField(sxx, sxy)), dy = divergence(VectorField(sxy, syy));
        VectorField raw(gp);
        for (std::size_t n = 0; n < N; ++n) {
            const double vx = zh.v.x.data[n], vy = zh.v.y.data[n];
            raw.x.data[n] = dt.v.x.data[n] + vx * gvx.x.data[n] + vy * gvx.y.data[n] - dx.data[n] -
                            muh.data[n] * gphi.x.data[n];
            raw.y.data[n] = dt.v.y.data[n] + vx * gvy.x.data[n] + vy * gvy.y.data[n] - dy.data[n] -
                            muh.data[n] * gphi.y.data[n];
        }
        r.v = leray_project(raw);
    }
    // r_C = dt C + (v.grad)C - (grad v)C - C(grad v)^T - eps2 lap C + relaxation
    {
        const VectorField g11 = gradient(zh.C.c11), g12 = gradient(zh.C.c12), g22 = gradient(zh.C.c22);
        const ScalarField l11 = laplacian(zh.C.c11), l12 = laplacian(zh.C.c12), l22 = laplacian(zh.C.c22);
        r.C = ConformationField(gp, 0.0, 0.0);
        for (std::size_t n = 0; n < N; ++n) {
            const double vx = zh.v.x.data[n], vy = zh.v.y.data[n];
            const double a = zh.C.c11.data[n], b = zh.C.c12.data[n], d = zh.C.c22.data[n];
            const double L11 = gvx.x.data[n], L12 = gvx.y.data[n], L21 = gvy.x.data[n], L22 = gvy.y.data[n];
            const double s11 = 2.0 * (L11 * a + L12 * b);
            const double s12 = L11 * b + L12 * d + a * L21 + b * L22;
            const double s22 = 2.0 * (L21 * b + L22 * d);
            const double trh = a + d;
            double k_tensor, k_identity;
            if (weak) {
                const double trw = zc.C.c11.data[n] + zc.C.c22.data[n];
                k_tensor = pv[n].h2 * bulk_B(trw, p) * trw;
                k_identity = pv[n].h2 * bulk_B(trh, p);
            } else {
                k_tensor = pv[n].h2 * bulk_B(trh, p) * trh;
                k_identity = pv[n].h2 * bulk_B(trh, p);
            }
            r.C.c11.data[n] = dt.C.c11.data[n] + vx * g11.x.data[n] + vy * g11.y.data[n] - s11 -
                              p.eps2 * l11.data[n] + k_tensor * a - k_identity;
            r.C.c12.data[n] = dt.C.c12.data[n] + vx * g12.x.data[n] + vy * g12.y.data[n] - s12 -
                              p.eps2 * l12.data[n] + k_tensor * b;
            r.C.c22.data[n] = dt.C.c22.data[n] + vx * g22.x.data[n] + vy * g22.y.data[n] - s22 -
                              p.eps2 * l22.data[n] + k_tensor * d - k_identity;
        }
    }
    return r;
}

/// Sobolev-type norm with spectral multiplier (1 + |k|^2)^s, scaled so s = 0 gives the L2 norm.
inline double sobolev_norm_squared(const ScalarField& f, double s) {
    const Grid2D& g = *f.grid;
    const Spectrum hat = spectral::forward(f);
    const int nh = g.nxh();
    double sum = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < nh; ++i) {
            const double w = (i == 0 || i == g.nx / 2) ? 1.0 : 2.0;
            const double m = std::pow(1.0 + g.k2(j, i), s);
            sum += w * m * std::norm(hat[static_cast<std::size_t>(j) * nh + i]);
        }
    return sum * g.cell_area() / static_cast<double>(g.size());
}

inline ResidualReport residual_report(const ResidualFields& r, double t = 0.0) {
    ResidualReport rep;
    rep.t = t;
    const double phi2 = sobolev_norm_squared(r.phi, -1.0);
    const double mu2 = sobolev_norm_squared(r.mu, 1.0);
    const double q2 = sobolev_norm_squared(r.q, -1.0);
    const double v2 = sobolev_norm_squared(r.v.x, -1.0) + sobolev_norm_squared(r.v.y, -1.0);
    const double c2 = sobolev_norm_squared(r.C.c11, -1.0) + 2.0 * sobolev_norm_squared(r.C.c12, -1.0) +
                      sobolev_norm_squared(r.C.c22, -1.0);
    rep.r_phi = std::sqrt(phi2);
    rep.r_mu = std::sqrt(mu2);
    rep.r_q = std::sqrt(q2);
    rep.r_v = std::sqrt(v2);
    rep.r_C = std::sqrt(c2);
    rep.total = mu2 + phi2 + q2 + v2 + c2;
    return rep;
}

inline ResidualReport residuals(const ResidualInputs& in, const ModelParams& p) {
    return residual_report(residual_fields(in, p), in.z_hat ? in.z_hat->t : 0.0);
}

/// Time derivative of a stored trajectory at index i by fourth-order finite differences
/// (central in the interior, one-sided near the ends); h is the spacing in model time units.
inline State time_derivative_fd4(const std::vector<State>& traj, std::size_t i, double h) {
    const std::size_t n = traj.size();
    if (n < 5) throw Error("time_derivative_fd4: need at least 5 stored states");
    if (i >= n) throw Error("time_derivative_fd4: index out of range");
    std::size_t base;
    std::vector<double> w;
    if (i >= 2 && i + 2 < n) {
        base = i - 2;
        w = {1.0, -8.0, 0.0, 8.0, -1.0};
    } else if (i < 2) {
        base = 0;
        w = i == 0 ? std::vector<double>{-25.0, 48.0, -36.0, 16.0, -3.0}
                   : std::vector<double>{-3.0, -10.0, 18.0, -6.0, 1.0};
    } else {
        base = n - 5;
        w = i == n - 1 ? std::vector<double>{3.0, -16.0, 36.0, -48.0, 25.0}
                       : std::vector<double>{-1.0, 6.0, -18.0, 10.0, 3.0};
    }
    State d = traj[i];
    auto zero = [](ScalarField& f) { std::fill(f.data.begin(), f.data.end(), 0.0); };
    for (ScalarField* f : {&d.phi, &d.q, &d.v.x, &d.v.y, &d.C.c11, &d.C.c12, &d.C.c22}) zero(*f);
    const double s = 1.0 / (12.0 * h);
    for (std::size_t k = 0; k < 5; ++k) {
        const State& src = traj[base + k];
        const double c = w[k] * s;
        if (c == 0.0) continue;
        auto add = [c](ScalarField& out, const ScalarField& in) {
            for (std::size_t m = 0; m < out.size(); ++m) out.data[m] += c * in.data[m];
        };
        add(d.phi, src.phi);
        add(d.q, src.q);
        add(d.v.x, src.v.x);
        add(d.v.y, src.v.y);
        add(d.C.c11, src.C.c11);
        add(d.C.c12, src.C.c12);
        add(d.C.c22, src.C.c22);
    }
    return d;
}

// ---------------------------------------------------------------------------
// Stability report

struct StabilityReport {
    std::vector<RelativeEnergyReport> rows;
    std::vector<double> cumulative_D;   ///< int_0^t D_rel, trapezoid in model time
    std::vector<double> C_hat;          ///< (E_rel + int D) / E_rel(0); NaN when E_rel(0) = 0
    std::vector<double> residual_rhs;   ///< E_rel(0) + int_0^t residual total; empty without residuals
    std::vector<double> residual_ratio; ///< (E_rel + int D) / residual_rhs
    double C_hat_max = std::numeric_limits<double>::quiet_NaN();
    bool bounded = true;
    std::string verdict;
};

struct StabilityOptions {
    double blowup_threshold = 1e6;  ///< C_hat above this counts as blow-up
};

/// Compares aligned trajectories; `residual_totals` (optional) holds ResidualReport::total per output.
inline StabilityReport stability_report(const std::vector<State>& z, const std::vector<State>& zh,
                                        const ModelParams& p, const std::vector<double>& residual_totals = {},
                                        const StabilityOptions& opt = {}) {
    if (z.size() != zh.size() || z.empty()) throw Error("stability_report: trajectories must be non-empty and equally long");
    if (!residual_totals.empty() && residual_totals.size() != z.size())
        throw Error("stability_report: one residual total per output is required");
    for (std::size_t i = 0; i < z.size(); ++i)
        if (std::abs(z[i].t - zh[i].t) > 1e-9 * std::max(1.0, std::abs(z[i].t)))
            throw Error("stability_report: misaligned output times at index " + std::to_string(i));
    StabilityReport rep;
    const double unit = time_unit(p);
    double cum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        RelativeEnergyReport r = relative_report(z[i], zh[i], p);
        if (i > 0) {
            const double h = (z[i].t - z[i - 1].t) * unit;
            cum += 0.5 * h * (rep.rows.back().D_rel + r.D_rel);
        }
        rep.rows.push_back(r);
        rep.cumulative_D.push_back(cum);
    }
    const double e0 = rep.rows.front().E_rel;
    for (std::size_t i = 0; i < z.size(); ++i) {
        auto& r = rep.rows[i];
        r.ratio_to_initial = e0 > 0.0 ? r.E_rel / e0 : std::numeric_limits<double>::quiet_NaN();
        const double lhs = r.E_rel + rep.cumulative_D[i];
        const double c = e0 > 0.0 ? lhs / e0 : std::numeric_limits<double>::quiet_NaN();
        rep.C_hat.push_back(c);
        if (!std::isnan(c)) rep.C_hat_max = std::isnan(rep.C_hat_max) ? c : std::max(rep.C_hat_max, c);
        if (e0 > 0.0 && (!std::isfinite(c) || c > opt.blowup_threshold)) rep.bounded = false;
    }
    if (!residual_totals.empty()) {
        double racc = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            if (i > 0) racc += 0.5 * (z[i].t - z[i - 1].t) * unit * (residual_totals[i - 1] + residual_totals[i]);
            const double rhs = e0 + racc;
            rep.residual_rhs.push_back(rhs);
            const double lhs = rep.rows[i].E_rel + rep.cumulative_D[i];
            rep.residual_ratio.push_back(rhs > 0.0 ? lhs / rhs : (lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity()));
        }
    }
    if (e0 == 0.0) {
        double worst = 0.0;
        for (const auto& r : rep.rows) worst = std::max(worst, r.E_rel);
        rep.verdict = "identical initial data; max E_rel = " + std::to_string(worst);
    } else {
        rep.verdict = rep.bounded ? "bounded: C_hat_max = " + std::to_string(rep.C_hat_max)
                                  : "blow-up: C_hat exceeded threshold";
    }
    return rep;
}

}  // namespace vpsim
