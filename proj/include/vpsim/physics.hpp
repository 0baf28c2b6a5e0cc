#pragma once

// Potentials, parameter functions, chemical potential, free energy and dissipation.

#include <cmath>
#include <limits>
#include <string>

#include "vpsim/grid.hpp"
#include "vpsim/state.hpp"

namespace vpsim {

enum class Potential { FloryHuggins, GinzburgLandau };
enum class MobilityKind { Degenerate, Constant };
enum class RelaxationKind { InverseSquare, Constant };
enum class AsymmetryKind { Tanh, Constant };
enum class BulkModulusKind { Trace, Constant };

struct ModelParams {
    double c0 = 1.0;
    double eps1 = 0.0;
    double eps2 = 1e-2;
    double alpha = std::numeric_limits<double>::quiet_NaN();  ///< NaN selects alpha_min + 1
    double chi = 28.0 / 11.0;
    Potential potential = Potential::FloryHuggins;
    double phi_star = 0.5;
    double a_steepness = 1e3;
    bool simple_fluid = false;

    MobilityKind mobility = MobilityKind::Degenerate;  ///< n^2 = phi^2 (1 - phi^2)
    double mobility_const = 0.25;
    RelaxationKind h1_kind = RelaxationKind::InverseSquare;  ///< h1 = 1 / (h1_scale phi^2)
    double h1_scale = 50.0;
    double h1_const = 0.08;
    RelaxationKind h2_kind = RelaxationKind::InverseSquare;  ///< h2 = 1 / (h2_scale phi^2)
    double h2_scale = 10.0;
    double h2_const = 0.4;
    AsymmetryKind a_kind = AsymmetryKind::Tanh;
    double a_const = 0.5;
    double eta0 = 2.0;  ///< eta = eta0 + eta2 phi^2
    double eta2 = 1.0;
    BulkModulusKind b_kind = BulkModulusKind::Trace;

    double delta_phi = 1e-6;  ///< clamp for log / cot / 1/phi^2 evaluation

    void validate() const {
        auto bad = [](const std::string& m) { throw Error("model params: " + m); };
        if (!(c0 > 0.0)) bad("c0 must be > 0");
        if (!(eps2 > 0.0)) bad("eps2 must be > 0");
        if (!(eps1 >= 0.0)) bad("eps1 must be >= 0");
        if (!(phi_star > 0.0 && phi_star < 1.0)) bad("phi_star must lie in (0, 1)");
        if (!(delta_phi > 0.0 && delta_phi < 0.1)) bad("delta_phi must lie in (0, 0.1)");
        if (!std::isnan(alpha) && !(alpha >= 0.0)) bad("alpha must be >= 0");
        if (mobility == MobilityKind::Constant && !(mobility_const > 0.0)) bad("mobility_const must be > 0");
        if (!(eta0 > 0.0) || eta2 < 0.0) bad("eta0 must be > 0 and eta2 >= 0");
    }

    double clamp(double phi) const { return std::clamp(phi, delta_phi, 1.0 - delta_phi); }
};

// ---------------------------------------------------------------------------
// Potential

inline double potential_f(double phi, const ModelParams& p) {
    if (p.potential == Potential::GinzburgLandau) {
        const double w = phi * (1.0 - phi);
        return 0.25 * w * w;
    }
    const double c = p.clamp(phi);
    return c * std::log(c) + (1.0 - c) * std::log1p(-c) + p.chi * c * (1.0 - c);
}

inline double potential_fprime(double phi, const ModelParams& p) {
    if (p.potential == Potential::GinzburgLandau) return 0.5 * phi * (1.0 - phi) * (1.0 - 2.0 * phi);
    const double c = p.clamp(phi);
    return std::log(c) - std::log1p(-c) + p.chi * (1.0 - 2.0 * c);
}

inline double potential_fsecond(double phi, const ModelParams& p) {
    if (p.potential == Potential::GinzburgLandau) return 0.5 * (1.0 - 6.0 * phi + 6.0 * phi * phi);
    const double c = p.clamp(phi);
    return 1.0 / c + 1.0 / (1.0 - c) - 2.0 * p.chi;
}

/// max(0, -min f''); both potentials attain min f'' at phi = 1/2.
inline double alpha_min(const ModelParams& p) { return std::max(0.0, -potential_fsecond(0.5, p)); }

inline double alpha_value(const ModelParams& p) { return std::isnan(p.alpha) ? alpha_min(p) + 1.0 : p.alpha; }

/// max |f''| sampled over [lo, hi].
inline double curvature_bound(const ModelParams& p, double lo, double hi, int samples = 2001) {
    double m = 0.0;
    for (int s = 0; s < samples; ++s) {
        const double phi = lo + (hi - lo) * s / (samples - 1);
        m = std::max(m, std::abs(potential_fsecond(phi, p)));
    }
    return m;
}

// ---------------------------------------------------------------------------
// Parameter functions

struct ParamValues {
    double n2, n, h1, h2, A, dA, eta;
};

inline double asymmetry_A(double phi, const ModelParams& p) {
    if (p.simple_fluid) return 0.0;
    if (p.a_kind == AsymmetryKind::Constant) return p.a_const;
    const double c = p.clamp(phi);
    const double arg = p.a_steepness * (1.0 / std::tan(pi * p.phi_star) - 1.0 / std::tan(pi * c));
    return 0.5 * (1.0 + std::tanh(arg));
}

inline ParamValues param_functions(double phi, const ModelParams& p) {
    const double c = p.clamp(phi);
    ParamValues v{};
    v.n2 = p.mobility == MobilityKind::Degenerate ? c * c * (1.0 - c * c) : p.mobility_const;
    v.n = std::sqrt(v.n2);
    v.h1 = p.h1_kind == RelaxationKind::InverseSquare ? 1.0 / (p.h1_scale * c * c) : p.h1_const;
    v.h2 = p.h2_kind == RelaxationKind::InverseSquare ? 1.0 / (p.h2_scale * c * c) : p.h2_const;
    v.A = asymmetry_A(phi, p);
    if (p.simple_fluid || p.a_kind == AsymmetryKind::Constant) {
        v.dA = 0.0;
    } else {
        const double arg = p.a_steepness * (1.0 / std::tan(pi * p.phi_star) - 1.0 / std::tan(pi * c));
        const double sech = 1.0 / std::cosh(arg);
        const double s = std::sin(pi * c);
        v.dA = 0.5 * sech * sech * p.a_steepness * pi / (s * s);
    }
    v.eta = p.eta0 + p.eta2 * c * c;
    return v;
}

inline double bulk_B(double trC, const ModelParams& p) { return p.b_kind == BulkModulusKind::Trace ? trC : 1.0; }

/// Majorants of n^2, eta and A over [0, 1], used by the implicit part of the stepper.
inline double mobility_majorant(const ModelParams& p) {
    return p.mobility == MobilityKind::Degenerate ? 0.25 : p.mobility_const;
}
inline double viscosity_majorant(const ModelParams& p) { return p.eta0 + p.eta2; }
inline double asymmetry_majorant(const ModelParams& p) {
    if (p.simple_fluid) return 0.0;
    return p.a_kind == AsymmetryKind::Constant ? std::abs(p.a_const) : 1.0;
}

// ---------------------------------------------------------------------------
// Field-level quantities

inline ScalarField chemical_potential(const ScalarField& phi, const ModelParams& p) {
    ScalarField mu = laplacian(phi);
    for (std::size_t n = 0; n < mu.size(); ++n) mu.data[n] = -p.c0 * mu.data[n] + potential_fprime(phi.data[n], p);
    return mu;
}

struct EnergyReport {
    double t = 0.0;
    double E_mix = 0.0, E_bulk = 0.0, E_kin = 0.0, E_el = 0.0, E_total = 0.0;
    double D_mix = 0.0, D_q_relax = 0.0, D_q_diff = 0.0, D_visc = 0.0;
    double D_C_diff_offdiag = 0.0, D_C_relax = 0.0, D_trC_diff = 0.0;
    double min_eig_C = 0.0;
    double mass = 0.0;

    double D_total() const {
        return D_mix + D_q_relax + D_q_diff + D_visc + D_C_diff_offdiag + D_C_relax + D_trC_diff;
    }
};

inline void require_spd(const ConformationField& C, const char* where) {
    const double lo = min_eigenvalue_C(C);
    if (!(lo > 0.0))
        throw SpdLossError(std::string(where) + ": conformation tensor not positive definite (min eigenvalue " +
                               std::to_string(lo) + ")",
                           lo);
}

/// Energy part of the report: E_mix, E_bulk, E_kin, E_el and their sum.
inline EnergyReport free_energy(const State& s, const ModelParams& p) {
    require_spd(s.C, "free_energy");
    const Grid2D& g = *s.grid();
    const double da = g.cell_area();
    EnergyReport r;
    r.t = s.t;
    const VectorField gphi = gradient(s.phi);
    double mix = 0.0, bulk = 0.0, kin = 0.0, el = 0.0, m = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
        const double gx = gphi.x.data[n], gy = gphi.y.data[n];
        mix += 0.5 * p.c0 * (gx * gx + gy * gy) + potential_f(s.phi.data[n], p);
        bulk += 0.5 * s.q.data[n] * s.q.data[n];
        kin += 0.5 * (s.v.x.data[n] * s.v.x.data[n] + s.v.y.data[n] * s.v.y.data[n]);
        const double a = s.C.c11.data[n], b = s.C.c12.data[n], d = s.C.c22.data[n];
        const Eig2 e = sym2_eigenvalues(a, b, d);
        const double tr = a + d;
        el += 0.25 * tr * tr - 0.5 * (std::log(e.lo) + std::log(e.hi));
        m += s.phi.data[n];
    }
    r.E_mix = mix * da;
    r.E_bulk = bulk * da;
    r.E_kin = kin * da;
    r.E_el = el * da;
    r.E_total = r.E_mix + r.E_bulk + r.E_kin + r.E_el;
    r.min_eig_C = min_eigenvalue_C(s.C);
    r.mass = m * da;
    return r;
}

/// Dissipation part of the report. Each term is the integral of a pointwise nonnegative density.
///
/// The C relaxation term is (1/2) h2 B(trC) trC tr(T + T^-1 - 2I), T = trC*C: the rate at which
/// the relaxation -h2 B (trC C - I) drains E_el = int 1/4 (trC)^2 - 1/2 tr ln C.
/// In simple-fluid mode q and C are frozen and their terms are zero.
inline EnergyReport dissipation(const State& s, const ModelParams& p) {
    require_spd(s.C, "dissipation");
    const GridPtr& gp = s.grid();
    const Grid2D& g = *gp;
    const double da = g.cell_area();
    EnergyReport r;
    r.t = s.t;

    const ScalarField mu = chemical_potential(s.phi, p);
    const VectorField gmu = gradient(mu);
    ScalarField aq(gp);
    for (std::size_t n = 0; n < g.size(); ++n) aq.data[n] = asymmetry_A(s.phi.data[n], p) * s.q.data[n];
    const VectorField gaq = gradient(aq);

    const VectorField gvx = gradient(s.v.x);
    const VectorField gvy = gradient(s.v.y);

    double d_mix = 0.0, d_qr = 0.0, d_visc = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
        const ParamValues pv = param_functions(s.phi.data[n], p);
        const double fx = pv.n * gmu.x.data[n] - gaq.x.data[n];
        const double fy = pv.n * gmu.y.data[n] - gaq.y.data[n];
        d_mix += fx * fx + fy * fy;
        d_qr += pv.h1 * s.q.data[n] * s.q.data[n];
        const double dxx = gvx.x.data[n], dyy = gvy.y.data[n];
        const double dxy = 0.5 * (gvx.y.data[n] + gvy.x.data[n]);
        d_visc += pv.eta * (dxx * dxx + 2.0 * dxy * dxy + dyy * dyy);
    }
    r.D_mix = d_mix * da;
    r.D_visc = d_visc * da;
    r.min_eig_C = min_eigenvalue_C(s.C);
    r.mass = integrate(s.phi);
    if (p.simple_fluid) return r;

    r.D_q_relax = d_qr * da;
    if (p.eps1 > 0.0) {
        const VectorField gq = gradient(s.q);
        double d = 0.0;
        for (std::size_t n = 0; n < g.size(); ++n) d += gq.x.data[n] * gq.x.data[n] + gq.y.data[n] * gq.y.data[n];
        r.D_q_diff = p.eps1 * d * da;
    }

    const VectorField g11 = gradient(s.C.c11), g12 = gradient(s.C.c12), g22 = gradient(s.C.c22);
    double d_off = 0.0, d_rel = 0.0, d_tr = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
        const double a = s.C.c11.data[n], b = s.C.c12.data[n], d = s.C.c22.data[n];
        const double det = a * d - b * b;
        // C^-1 = [[d, -b], [-b, a]] / det
        const double ia = d / det, ib = -b / det, id = a / det;
        auto term = [&](double pa, double pb, double pd) {
            // M = C^-1 dC ; tr(M M)
            const double m11 = ia * pa + ib * pb, m12 = ia * pb + ib * pd;
            const double m21 = ib * pa + id * pb, m22 = ib * pb + id * pd;
            return m11 * m11 + 2.0 * m12 * m21 + m22 * m22;
        };
        d_off += term(g11.x.data[n], g12.x.data[n], g22.x.data[n]) + term(g11.y.data[n], g12.y.data[n], g22.y.data[n]);
        const double tr = a + d;
        // T = tr*C, tr T = tr^2, tr T^-1 = tr(C^-1)/tr
        const double trT = tr * tr;
        const double trTinv = (ia + id) / tr;
        const ParamValues pv = param_functions(s.phi.data[n], p);
        d_rel += 0.5 * pv.h2 * bulk_B(tr, p) * tr * (trT + trTinv - 4.0);
        const double gtx = g11.x.data[n] + g22.x.data[n], gty = g11.y.data[n] + g22.y.data[n];
        d_tr += gtx * gtx + gty * gty;
    }
    r.D_C_diff_offdiag = 0.5 * p.eps2 * d_off * da;
    r.D_C_relax = d_rel * da;
    r.D_trC_diff = 0.5 * p.eps2 * d_tr * da;
    return r;
}

/// Energy and dissipation in one report.
inline EnergyReport energy_report(const State& s, const ModelParams& p) {
    EnergyReport e = free_energy(s, p);
    const EnergyReport d = dissipation(s, p);
    e.D_mix = d.D_mix;
    e.D_q_relax = d.D_q_relax;
    e.D_q_diff = d.D_q_diff;
    e.D_visc = d.D_visc;
    e.D_C_diff_offdiag = d.D_C_diff_offdiag;
    e.D_C_relax = d.D_C_relax;
    e.D_trC_diff = d.D_trC_diff;
    return e;
}

}  // namespace vpsim
