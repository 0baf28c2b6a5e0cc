#pragma once

// First-order IMEX pseudospectral integrator for the coupled (phi, q, v, C) system.
//
// Stiff linear operators are implicit and diagonal in Fourier space:
//   phi : nbar2 * (c0 |k|^4 + s |k|^2)        (constant-coefficient majorant + optional stabilization)
//   q   : (eps1 + Abar^2) |k|^2
//   v   : (etabar / 2) |k|^2
//   C   : eps2 |k|^2
// Everything else is explicit at time n. The relaxation terms -h1 q and
// -h2 B (trC C - I) are applied afterwards as pointwise linearly implicit updates.
//
// Transport terms that carry energy are written so that the discrete exchange terms cancel
// exactly under the spectral derivative: phi in divergence form, q and v in skew-symmetric
// form, and the capillary force as -phi grad(mu) (equal to mu grad(phi) up to a pressure gradient).

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "vpsim/grid.hpp"
#include "vpsim/physics.hpp"
#include "vpsim/state.hpp"

namespace vpsim {

/// One t_FE in model time units: c0 / eta0, eta0 the phi-independent part of eta.
inline double time_unit(const ModelParams& p) { return p.c0 / p.eta0; }

struct StepperConfig {
    double dt = 0.1;  ///< t_FE units
    double stabilization_s = 0.0;  ///< NaN: max|f''| on [0.05, 0.95]; nonzero values weaken energy decay
    double nbar2 = std::numeric_limits<double>::quiet_NaN();            ///< NaN: max n^2 on [0, 1]
    double etabar = std::numeric_limits<double>::quiet_NaN();           ///< NaN: max eta on [0, 1]
    long output_every = 100;
    long snapshot_every = 0;  ///< 0 disables snapshots
    double t_end = 0.0;
    bool dealias = false;  ///< collocation keeps the semi-discrete energy identity exact
    bool spd_floor = false;
    double spd_floor_value = 1e-8;
    bool simple_fluid_evolve_q = false;

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw Error("stepper: dt must be > 0");
        if (!std::isnan(stabilization_s) && !(stabilization_s >= 0.0)) throw Error("stepper: stabilization_s must be >= 0");
        if (output_every < 1) throw Error("stepper: output_every must be >= 1");
        if (snapshot_every < 0) throw Error("stepper: snapshot_every must be >= 0");
        if (!(t_end >= 0.0)) throw Error("stepper: t_end must be >= 0");
    }
};

inline double default_stabilization(const ModelParams& p) { return curvature_bound(p, 0.05, 0.95); }

/// Resolved implicit-operator coefficients.
struct ImplicitCoefficients {
    double s, nbar2, etabar, abar2;
};

inline ImplicitCoefficients implicit_coefficients(const ModelParams& p, const StepperConfig& c) {
    ImplicitCoefficients k{};
    k.s = std::isnan(c.stabilization_s) ? default_stabilization(p) : c.stabilization_s;
    k.nbar2 = std::isnan(c.nbar2) ? mobility_majorant(p) : c.nbar2;
    k.etabar = std::isnan(c.etabar) ? viscosity_majorant(p) : c.etabar;
    const double a = asymmetry_majorant(p);
    k.abar2 = a * a;
    return k;
}

// ---------------------------------------------------------------------------
// Explicit tendencies

struct TendencyOptions {
    bool dealias = false;
    bool evolve_q = true;  ///< forced false in simple-fluid mode unless requested
    bool evolve_C = true;
};

/// Spectral explicit tendencies (model time units):
///   phi : full right-hand side
///   q   : transport + A-coupling (no eps1 Laplacian, no relaxation)
///   v   : full right-hand side before projection (viscous part uses the true eta)
///   C   : transport + stretching (no eps2 Laplacian, no relaxation)
struct Tendencies {
    Spectrum phi, q, vx, vy, c11, c12, c22;
    bool has_q = false, has_C = false;
};

namespace detail {

inline void mul_i_k(const Grid2D& g, const Spectrum& in, Spectrum& dx, Spectrum& dy) {
    const int nh = g.nxh();
    dx.resize(in.size());
    dy.resize(in.size());
    for (int j = 0; j < g.ny; ++j) {
        const double ky = g.ky_odd(j);
        for (int i = 0; i < nh; ++i) {
            const std::size_t n = static_cast<std::size_t>(j) * nh + i;
            dx[n] = Complex(-g.kx_odd(i) * in[n].imag(), g.kx_odd(i) * in[n].real());
            dy[n] = Complex(-ky * in[n].imag(), ky * in[n].real());
        }
    }
}

/// Physical-space gradient of a field given its spectrum.
inline void grad_from_hat(const Grid2D& g, const Spectrum& hat, RealBuffer& gx, RealBuffer& gy) {
    Spectrum dx, dy;
    mul_i_k(g, hat, dx, dy);
    gx.resize(g.size());
    gy.resize(g.size());
    g.inverse(dx, gx);
    g.inverse(dy, gy);
}

inline Spectrum fwd(const Grid2D& g, const RealBuffer& f) {
    Spectrum out;
    g.forward(f, out);
    return out;
}

}  // namespace detail

inline Tendencies explicit_tendencies(const State& s, const ModelParams& p, const TendencyOptions& opt) {
    const Grid2D& g = *s.grid();
    const std::size_t N = g.size(), M = g.spectral_size();
    const int nh = g.nxh();
    const bool evolve_q = opt.evolve_q;
    const bool evolve_C = opt.evolve_C && !p.simple_fluid;
    const bool elastic_stress = !p.simple_fluid;

    Tendencies out;
    out.has_q = evolve_q;
    out.has_C = evolve_C;

    // chemical potential
    const Spectrum phi_hat = detail::fwd(g, s.phi.data);
    Spectrum lap_hat(M);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < nh; ++i) {
            const std::size_t n = static_cast<std::size_t>(j) * nh + i;
            lap_hat[n] = -g.k2(j, i) * phi_hat[n];
        }
    RealBuffer mu(N);
    g.inverse(lap_hat, mu);
    for (std::size_t n = 0; n < N; ++n) mu[n] = -p.c0 * mu[n] + potential_fprime(s.phi.data[n], p);
    RealBuffer mux, muy;
    detail::grad_from_hat(g, detail::fwd(g, mu), mux, muy);

    std::vector<ParamValues> pv(N);
    for (std::size_t n = 0; n < N; ++n) pv[n] = param_functions(s.phi.data[n], p);

    // A q and its gradient
    RealBuffer aq(N), aqx(N, 0.0), aqy(N, 0.0);
    bool any_aq = false;
    for (std::size_t n = 0; n < N; ++n) {
        aq[n] = pv[n].A * s.q.data[n];
        any_aq = any_aq || aq[n] != 0.0;
    }
    if (any_aq) detail::grad_from_hat(g, detail::fwd(g, aq), aqx, aqy);

    // phi: div(n^2 grad mu - n grad(Aq) - v phi)
    RealBuffer jx(N), jy(N);
    for (std::size_t n = 0; n < N; ++n) {
        jx[n] = pv[n].n2 * mux[n] - pv[n].n * aqx[n] - s.v.x.data[n] * s.phi.data[n];
        jy[n] = pv[n].n2 * muy[n] - pv[n].n * aqy[n] - s.v.y.data[n] * s.phi.data[n];
    }
    out.phi = spectral::div(g, detail::fwd(g, jx), detail::fwd(g, jy));

    // velocity gradient
    const Spectrum vx_hat = detail::fwd(g, s.v.x.data), vy_hat = detail::fwd(g, s.v.y.data);
    RealBuffer l11, l12, l21, l22;  // l_ab = d v_a / d x_b
    detail::grad_from_hat(g, vx_hat, l11, l12);
    detail::grad_from_hat(g, vy_hat, l21, l22);

    // q: A div(grad(Aq) - n grad mu) - 1/2 (v.grad q + div(v q))
    if (evolve_q) {
        RealBuffer gx(N), gy(N);
        for (std::size_t n = 0; n < N; ++n) {
            gx[n] = aqx[n] - pv[n].n * mux[n];
            gy[n] = aqy[n] - pv[n].n * muy[n];
        }
        RealBuffer coupling(N, 0.0);
        if (!p.simple_fluid) {
            Spectrum dg = spectral::div(g, detail::fwd(g, gx), detail::fwd(g, gy));
            g.inverse(dg, coupling);
        }
        RealBuffer qx, qy;
        detail::grad_from_hat(g, detail::fwd(g, s.q.data), qx, qy);
        RealBuffer local(N), fqx(N), fqy(N);
        for (std::size_t n = 0; n < N; ++n) {
            local[n] = pv[n].A * coupling[n] - 0.5 * (s.v.x.data[n] * qx[n] + s.v.y.data[n] * qy[n]);
            fqx[n] = s.v.x.data[n] * s.q.data[n];
            fqy[n] = s.v.y.data[n] * s.q.data[n];
        }
        out.q = detail::fwd(g, local);
        const Spectrum dvq = spectral::div(g, detail::fwd(g, fqx), detail::fwd(g, fqy));
        for (std::size_t n = 0; n < M; ++n) out.q[n] -= 0.5 * dvq[n];
    }

    // v: div(eta D_S v + trC C - 1/2 v(x)v) - 1/2 (v.grad)v - phi grad mu
    {
        RealBuffer sxx(N), sxy(N), syy(N), bx(N), by(N);
        for (std::size_t n = 0; n < N; ++n) {
            const double vx = s.v.x.data[n], vy = s.v.y.data[n];
            const double eta = pv[n].eta;
            sxx[n] = eta * l11[n] - 0.5 * vx * vx;
            sxy[n] = eta * 0.5 * (l12[n] + l21[n]) - 0.5 * vx * vy;
            syy[n] = eta * l22[n] - 0.5 * vy * vy;
            if (elastic_stress) {
                const double tr = s.C.c11.data[n] + s.C.c22.data[n];
                sxx[n] += tr * s.C.c11.data[n];
                sxy[n] += tr * s.C.c12.data[n];
                syy[n] += tr * s.C.c22.data[n];
            }
            bx[n] = -0.5 * (vx * l11[n] + vy * l12[n]) - s.phi.data[n] * mux[n];
            by[n] = -0.5 * (vx * l21[n] + vy * l22[n]) - s.phi.data[n] * muy[n];
        }
        const Spectrum sxx_h = detail::fwd(g, sxx), sxy_h = detail::fwd(g, sxy), syy_h = detail::fwd(g, syy);
        out.vx = spectral::div(g, sxx_h, sxy_h);
        out.vy = spectral::div(g, sxy_h, syy_h);
        const Spectrum bx_h = detail::fwd(g, bx), by_h = detail::fwd(g, by);
        for (std::size_t n = 0; n < M; ++n) {
            out.vx[n] += bx_h[n];
            out.vy[n] += by_h[n];
        }
    }

    // C: -(v.grad)C + L C + C L^T
    if (evolve_C) {
        RealBuffer a_x, a_y, b_x, b_y, d_x, d_y;
        detail::grad_from_hat(g, detail::fwd(g, s.C.c11.data), a_x, a_y);
        detail::grad_from_hat(g, detail::fwd(g, s.C.c12.data), b_x, b_y);
        detail::grad_from_hat(g, detail::fwd(g, s.C.c22.data), d_x, d_y);
        RealBuffer r11(N), r12(N), r22(N);
        for (std::size_t n = 0; n < N; ++n) {
            const double vx = s.v.x.data[n], vy = s.v.y.data[n];
            const double a = s.C.c11.data[n], b = s.C.c12.data[n], d = s.C.c22.data[n];
            r11[n] = -(vx * a_x[n] + vy * a_y[n]) + 2.0 * (l11[n] * a + l12[n] * b);
            r12[n] = -(vx * b_x[n] + vy * b_y[n]) + l11[n] * b + l12[n] * d + a * l21[n] + b * l22[n];
            r22[n] = -(vx * d_x[n] + vy * d_y[n]) + 2.0 * (l21[n] * b + l22[n] * d);
        }
        out.c11 = detail::fwd(g, r11);
        out.c12 = detail::fwd(g, r12);
        out.c22 = detail::fwd(g, r22);
    }

    if (opt.dealias) {
        for (Spectrum* h : {&out.phi, &out.q, &out.vx, &out.vy, &out.c11, &out.c12, &out.c22})
            if (!h->empty()) spectral::apply_dealias(g, *h);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Leray projection

inline void leray_project_hat(const Grid2D& g, Spectrum& ux, Spectrum& uy) {
    const int nh = g.nxh();
    for (int j = 0; j < g.ny; ++j) {
        const double ky = g.ky_odd(j);
        for (int i = 0; i < nh; ++i) {
            const double kx = g.kx_odd(i);
            const double kk = kx * kx + ky * ky;
            if (kk == 0.0) continue;
            const std::size_t n = static_cast<std::size_t>(j) * nh + i;
            const Complex kdotu = kx * ux[n] + ky * uy[n];
            ux[n] -= kx * kdotu / kk;
            uy[n] -= ky * kdotu / kk;
        }
    }
}

inline VectorField leray_project(const VectorField& v) {
    const Grid2D& g = *v.x.grid;
    Spectrum ux = spectral::forward(v.x), uy = spectral::forward(v.y);
    leray_project_hat(g, ux, uy);
    return {spectral::inverse(v.x.grid, std::move(ux)), spectral::inverse(v.x.grid, std::move(uy))};
}

// ---------------------------------------------------------------------------
// Full right-hand sides (model time units)

inline TendencyOptions rhs_options(const ModelParams& p, bool dealias) {
    TendencyOptions o;
    o.dealias = dealias;
    o.evolve_q = true;
    o.evolve_C = !p.simple_fluid;
    return o;
}

inline ScalarField rhs_phi(const State& s, const ModelParams& p, bool dealias = false) {
    Tendencies t = explicit_tendencies(s, p, rhs_options(p, dealias));
    return spectral::inverse(s.grid(), std::move(t.phi));
}

/// q_t = -v.grad q - h1 q + A div(grad(Aq) - n grad mu) + eps1 lap q
inline ScalarField rhs_q(const State& s, const ModelParams& p, bool dealias = false) {
    const Grid2D& g = *s.grid();
    Tendencies t = explicit_tendencies(s, p, rhs_options(p, dealias));
    const Spectrum q_hat = spectral::forward(s.q);
    const int nh = g.nxh();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < nh; ++i) {
            const std::size_t n = static_cast<std::size_t>(j) * nh + i;
            t.q[n] -= p.eps1 * g.k2(j, i) * q_hat[n];
        }
    ScalarField r = spectral::inverse(s.grid(), std::move(t.q));
    for (std::size_t n = 0; n < r.size(); ++n) r.data[n] -= param_functions(s.phi.data[n], p).h1 * s.q.data[n];
    return r;
}

/// Velocity tendency before projection.
inline VectorField rhs_v(const State& s, const ModelParams& p, bool dealias = false) {
    Tendencies t = explicit_tendencies(s, p, rhs_options(p, dealias));
    return {spectral::inverse(s.grid(), std::move(t.vx)), spectral::inverse(s.grid(), std::move(t.vy))};
}

/// C_t = -(v.grad)C + (grad v)C + C(grad v)^T - h2 B(trC)(trC C - I) + eps2 lap C
inline ConformationField rhs_C(const State& s, const ModelParams& p, bool dealias = false) {
    const Grid2D& g = *s.grid();
    TendencyOptions o = rhs_options(p, dealias);
    o.evolve_C = true;
    // explicit_tendencies skips C in simple-fluid mode; the transport terms are still defined there
    ModelParams pc = p;
    pc.simple_fluid = false;
    Tendencies t = explicit_tendencies(s, pc, o);
    const int nh = g.nxh();
    auto add_diffusion = [&](Spectrum& rate, const ScalarField& c) {
        const Spectrum h = spectral::forward(c);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < nh; ++i) {
                const std::size_t n = static_cast<std::size_t>(j) * nh + i;
                rate[n] -= p.eps2 * g.k2(j, i) * h[n];
            }
    };
    add_diffusion(t.c11, s.C.c11);
    add_diffusion(t.c12, s.C.c12);
    add_diffusion(t.c22, s.C.c22);
    ConformationField r;
    r.c11 = spectral::inverse(s.grid(), std::move(t.c11));
    r.c12 = spectral::inverse(s.grid(), std::move(t.c12));
    r.c22 = spectral::inverse(s.grid(), std::move(t.c22));
    for (std::size_t n = 0; n < r.c11.size(); ++n) {
        const double a = s.C.c11.data[n], b = s.C.c12.data[n], d = s.C.c22.data[n];
        const double tr = a + d;
        const double k = param_functions(s.phi.data[n], p).h2 * bulk_B(tr, p);
        r.c11.data[n] -= k * (tr * a - 1.0);
        r.c12.data[n] -= k * (tr * b);
        r.c22.data[n] -= k * (tr * d - 1.0);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Stepper

/// Rates (model time units) added explicitly to each equation; used for manufactured solutions.
using Forcing = std::function<State(const State& current, double t_model)>;

class Stepper {
public:
    Stepper(GridPtr grid, ModelParams params, StepperConfig cfg)
        : grid_(std::move(grid)), params_(std::move(params)), cfg_(cfg) {
        params_.validate();
        cfg_.validate();
        coeff_ = implicit_coefficients(params_, cfg_);
        dt_model_ = cfg_.dt * time_unit(params_);
        const Grid2D& g = *grid_;
        const std::size_t M = g.spectral_size();
        const int nh = g.nxh();
        s_phi_.resize(M);
        s_q_.resize(M);
        s_v_.resize(M);
        inv_phi_.resize(M);
        inv_q_.resize(M);
        inv_v_.resize(M);
        inv_C_.resize(M);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < nh; ++i) {
                const std::size_t n = static_cast<std::size_t>(j) * nh + i;
                const double k2 = g.k2(j, i);
                s_phi_[n] = coeff_.nbar2 * (params_.c0 * k2 * k2 + coeff_.s * k2);
                s_q_[n] = coeff_.abar2 * k2;
                s_v_[n] = 0.5 * coeff_.etabar * k2;
                inv_phi_[n] = 1.0 / (1.0 + dt_model_ * s_phi_[n]);
                inv_q_[n] = 1.0 / (1.0 + dt_model_ * (params_.eps1 * k2 + s_q_[n]));
                inv_v_[n] = 1.0 / (1.0 + dt_model_ * s_v_[n]);
                inv_C_[n] = 1.0 / (1.0 + dt_model_ * params_.eps2 * k2);
            }
    }

    const ModelParams& params() const { return params_; }
    const StepperConfig& config() const { return cfg_; }
    const ImplicitCoefficients& coefficients() const { return coeff_; }
    double dt_model() const { return dt_model_; }

    void set_forcing(Forcing f) { forcing_ = std::move(f); }

    bool evolves_q() const { return !params_.simple_fluid || cfg_.simple_fluid_evolve_q; }
    bool evolves_C() const { return !params_.simple_fluid; }

    /// Advance by one step in place.
    void advance(State& s) const {
        const Grid2D& g = *grid_;
        if (!g.same_layout(*s.grid())) throw Error("step: state grid does not match stepper grid");
        const std::size_t M = g.spectral_size();
        const double dt = dt_model_;

        TendencyOptions opt;
        opt.dealias = cfg_.dealias;
        opt.evolve_q = evolves_q();
        opt.evolve_C = evolves_C();
        Tendencies rate = explicit_tendencies(s, params_, opt);

        if (forcing_) {
            const State f = forcing_(s, s.t * time_unit(params_));
            auto add = [&](Spectrum& r, const ScalarField& src) {
                if (r.empty()) return;
                const Spectrum h = spectral::forward(src);
                for (std::size_t n = 0; n < M; ++n) r[n] += h[n];
            };
            add(rate.phi, f.phi);
            add(rate.q, f.q);
            add(rate.vx, f.v.x);
            add(rate.vy, f.v.y);
            add(rate.c11, f.C.c11);
            add(rate.c12, f.C.c12);
            add(rate.c22, f.C.c22);
        }

        // phi
        Spectrum phi_hat = spectral::forward(s.phi);
        const Complex mass_mode = phi_hat[0];
        for (std::size_t n = 0; n < M; ++n)
            phi_hat[n] = (phi_hat[n] * (1.0 + dt * s_phi_[n]) + dt * rate.phi[n]) * inv_phi_[n];
        if (!forcing_) phi_hat[0] = mass_mode;

        // v
        Spectrum vx_hat = spectral::forward(s.v.x), vy_hat = spectral::forward(s.v.y);
        for (std::size_t n = 0; n < M; ++n) {
            vx_hat[n] = (vx_hat[n] * (1.0 + dt * s_v_[n]) + dt * rate.vx[n]) * inv_v_[n];
            vy_hat[n] = (vy_hat[n] * (1.0 + dt * s_v_[n]) + dt * rate.vy[n]) * inv_v_[n];
        }
        leray_project_hat(g, vx_hat, vy_hat);
        if (!forcing_) vx_hat[0] = vy_hat[0] = 0.0;

        Spectrum q_hat, c11_hat, c12_hat, c22_hat;
        if (rate.has_q) {
            q_hat = spectral::forward(s.q);
            for (std::size_t n = 0; n < M; ++n)
                q_hat[n] = (q_hat[n] * (1.0 + dt * s_q_[n]) + dt * rate.q[n]) * inv_q_[n];
        }
        if (rate.has_C) {
            c11_hat = spectral::forward(s.C.c11);
            c12_hat = spectral::forward(s.C.c12);
            c22_hat = spectral::forward(s.C.c22);
            for (std::size_t n = 0; n < M; ++n) {
                c11_hat[n] = (c11_hat[n] + dt * rate.c11[n]) * inv_C_[n];
                c12_hat[n] = (c12_hat[n] + dt * rate.c12[n]) * inv_C_[n];
                c22_hat[n] = (c22_hat[n] + dt * rate.c22[n]) * inv_C_[n];
            }
        }

        if (cfg_.dealias) {
            for (Spectrum* h : {&phi_hat, &vx_hat, &vy_hat, &q_hat, &c11_hat, &c12_hat, &c22_hat})
                if (!h->empty()) spectral::apply_dealias(g, *h);
        }

        // Relaxation coefficients use phi at time n.
        std::vector<double> h1, h2;
        if (rate.has_q || rate.has_C) {
            h1.resize(g.size());
            h2.resize(g.size());
            for (std::size_t n = 0; n < g.size(); ++n) {
                const ParamValues pv = param_functions(s.phi.data[n], params_);
                h1[n] = pv.h1;
                h2[n] = pv.h2;
            }
        }

        g.inverse(phi_hat, s.phi.span());
        g.inverse(vx_hat, s.v.x.span());
        g.inverse(vy_hat, s.v.y.span());
        if (rate.has_q) {
            g.inverse(q_hat, s.q.span());
            for (std::size_t n = 0; n < g.size(); ++n) s.q.data[n] /= 1.0 + dt * h1[n];
        }
        if (rate.has_C) {
            g.inverse(c11_hat, s.C.c11.span());
            g.inverse(c12_hat, s.C.c12.span());
            g.inverse(c22_hat, s.C.c22.span());
            for (std::size_t n = 0; n < g.size(); ++n) {
                double& a = s.C.c11.data[n];
                double& b = s.C.c12.data[n];
                double& d = s.C.c22.data[n];
                const double tr = a + d;
                const double k = dt * h2[n] * bulk_B(tr, params_);
                const double den = 1.0 / (1.0 + k * tr);
                a = (a + k) * den;
                b = b * den;
                d = (d + k) * den;
            }
            if (cfg_.spd_floor) apply_spd_floor(s.C, cfg_.spd_floor_value);
        }
        s.t += cfg_.dt;
        check(s);
    }

    /// Abort on non-finite fields or phi outside [-10 delta, 1 + 10 delta].
    void check(const State& s) const {
        const double margin = 10.0 * params_.delta_phi;
        for (double v : s.phi.data) {
            if (!std::isfinite(v)) throw BlowUpError("step: non-finite phi at t=" + std::to_string(s.t));
            if (v < -margin || v > 1.0 + margin)
                throw BlowUpError("step: phi=" + std::to_string(v) + " left the admissible range at t=" +
                                  std::to_string(s.t));
        }
        for (const ScalarField* f : {&s.q, &s.v.x, &s.v.y, &s.C.c11, &s.C.c12, &s.C.c22})
            if (!all_finite(*f)) throw BlowUpError("step: non-finite field at t=" + std::to_string(s.t));
    }

    static void apply_spd_floor(ConformationField& C, double floor) {
        for (std::size_t n = 0; n < C.c11.size(); ++n) {
            const double a = C.c11.data[n], b = C.c12.data[n], d = C.c22.data[n];
            const Eig2 e = sym2_eigenvalues(a, b, d);
            if (e.lo >= floor) continue;
            // eigenvector of the smaller eigenvalue
            double ux = b, uy = e.lo - a;
            if (std::hypot(ux, uy) < 1e-300) {
                ux = e.lo - d;
                uy = b;
            }
            double nrm = std::hypot(ux, uy);
            if (nrm < 1e-300) {
                ux = 1.0;
                uy = 0.0;
                nrm = 1.0;
            }
            ux /= nrm;
            uy /= nrm;
            const double lo = std::max(e.lo, floor), hi = std::max(e.hi, floor);
            // C = lo u u^T + hi w w^T, w = (-uy, ux)
            C.c11.data[n] = lo * ux * ux + hi * uy * uy;
            C.c12.data[n] = (lo - hi) * ux * uy;
            C.c22.data[n] = lo * uy * uy + hi * ux * ux;
        }
    }

private:
    GridPtr grid_;
    ModelParams params_;
    StepperConfig cfg_;
    ImplicitCoefficients coeff_{};
    double dt_model_ = 0.0;
    std::vector<double> s_phi_, s_q_, s_v_;
    std::vector<double> inv_phi_, inv_q_, inv_v_, inv_C_;
    Forcing forcing_;
};

inline State step(const State& s, const ModelParams& p, const StepperConfig& cfg) {
    State out = s;
    Stepper(s.grid(), p, cfg).advance(out);
    return out;
}

// ---------------------------------------------------------------------------
// Run loop

struct RunSinks {
    std::function<void(const EnergyReport&, long step)> on_energy;
    std::function<void(const State&, long step)> on_snapshot;
    std::function<void(const State&, long step)> on_step;
};

/// Steps from state.t to cfg.t_end. Energy reports at step 0 and every output_every steps,
/// snapshots at step 0 and every snapshot_every steps (when enabled). `first_step` lets a
/// resumed run keep the global step numbering.
inline State run(State s, const ModelParams& p, const StepperConfig& cfg, const RunSinks& sinks = {},
                 long first_step = 0) {
    const Stepper stepper(s.grid(), p, cfg);
    const long total = std::max(0L, static_cast<long>(std::llround(cfg.t_end / cfg.dt)));
    auto emit = [&](long k) {
        if (sinks.on_energy && k % cfg.output_every == 0) sinks.on_energy(energy_report(s, p), k);
        if (sinks.on_snapshot && cfg.snapshot_every > 0 && k % cfg.snapshot_every == 0) sinks.on_snapshot(s, k);
    };
    if (first_step == 0) emit(0);
    for (long k = first_step + 1; k <= total; ++k) {
        stepper.advance(s);
        if (sinks.on_step) sinks.on_step(s, k);
        emit(k);
    }
    return s;
}

}  // namespace vpsim
