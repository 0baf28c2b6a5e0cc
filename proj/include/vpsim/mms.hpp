#pragma once

// Manufactured-solution temporal convergence study.
//
// z_hat(t) below is smooth, periodic on [0, 2pi]^2 and has a divergence-free velocity. The
// forcing F(t) = residual of z_hat at t makes z_hat an exact solution of the forced system, so
// the stepper error at the final time measures the time discretization alone (the spatial
// error of low-mode fields on a spectral grid is at round-off level).

#include <cmath>
#include <vector>

#include "vpsim/dynamics.hpp"
#include "vpsim/relenergy.hpp"

namespace vpsim {

struct ManufacturedSolution {
    /// State and its model-time derivative at model time tau.
    static State value(const GridPtr& g, double tau) { return build(g, tau, false); }
    static State rate(const GridPtr& g, double tau) { return build(g, tau, true); }

private:
    static State build(const GridPtr& g, double tau, bool derivative) {
        // a = cos tau, b = 1 + sin tau; constant parts drop out of the derivative
        const double a = derivative ? -std::sin(tau) : std::cos(tau);
        const double b = derivative ? std::cos(tau) : 1.0 + std::sin(tau);
        const double base_phi = derivative ? 0.0 : 0.5;
        const double base_C = derivative ? 0.0 : kPeterlinLambda;
        State s;
        s.t = 0.0;
        s.phi = sample(g, [&](double x, double y) {
            return base_phi + 0.03 * a * std::sin(x) * std::cos(y) + 0.01 * b * std::cos(2 * y);
        });
        s.q = sample(g, [&](double x, double y) { return 0.05 * b * std::cos(x) * std::sin(y); });
        // stream function 0.05 b sin x sin y
        s.v = VectorField(sample(g, [&](double x, double y) { return 0.05 * b * std::sin(x) * std::cos(y); }),
                          sample(g, [&](double x, double y) { return -0.05 * b * std::cos(x) * std::sin(y); }));
        s.C = ConformationField(g);
        s.C.c11 = sample(g, [&](double x, double) { return base_C + 0.02 * a * std::cos(x); });
        s.C.c12 = sample(g, [&](double x, double y) { return 0.01 * a * std::sin(x + y); });
        s.C.c22 = sample(g, [&](double, double y) { return base_C + 0.02 * a * std::sin(y); });
        return s;
    }
};

/// Residual of the manufactured solution, packed as a forcing state (mu residual is zero).
inline State manufactured_forcing(const GridPtr& g, const ModelParams& p, double tau) {
    const State z = ManufacturedSolution::value(g, tau);
    const State dz = ManufacturedSolution::rate(g, tau);
    ResidualInputs in;
    in.z_hat = &z;
    in.dt_z_hat = &dz;
    const ResidualFields r = residual_fields(in, p);
    State f = z;
    f.phi = r.phi;
    f.q = r.q;
    f.v = r.v;
    f.C = r.C;
    return f;
}

inline double max_abs_difference(const State& a, const State& b) {
    double e = 0.0;
    auto scan = [&](const ScalarField& x, const ScalarField& y) {
        for (std::size_t n = 0; n < x.size(); ++n) e = std::max(e, std::abs(x.data[n] - y.data[n]));
    };
    scan(a.phi, b.phi);
    scan(a.q, b.q);
    scan(a.v.x, b.v.x);
    scan(a.v.y, b.v.y);
    scan(a.C.c11, b.C.c11);
    scan(a.C.c12, b.C.c12);
    scan(a.C.c22, b.C.c22);
    return e;
}

struct MmsRow {
    int n = 0;           ///< grid nodes per direction
    long steps = 0;
    double dt_model = 0.0;
    double error = 0.0;  ///< max-norm over all fields at the final time
    double order = std::numeric_limits<double>::quiet_NaN();  ///< against the previous row of the same grid
};

struct MmsOptions {
    std::vector<int> grids{32, 64, 128};
    std::vector<long> steps{100, 200, 400, 800};
    double t_model_end = 0.5;
};

/// Forced runs from z_hat(0) to z_hat(T) for every grid and step count.
inline std::vector<MmsRow> mms_study(const ModelParams& p, const StepperConfig& base, const MmsOptions& opt) {
    std::vector<MmsRow> rows;
    for (int n : opt.grids) {
        const GridPtr g = make_grid(n, n, 2.0 * pi, 2.0 * pi);
        const State exact = ManufacturedSolution::value(g, opt.t_model_end);
        for (std::size_t k = 0; k < opt.steps.size(); ++k) {
            StepperConfig cfg = base;
            cfg.dt = opt.t_model_end / static_cast<double>(opt.steps[k]) / time_unit(p);
            Stepper st(g, p, cfg);
            st.set_forcing([&](const State&, double tau) { return manufactured_forcing(g, p, tau); });
            State s = ManufacturedSolution::value(g, 0.0);
            for (long i = 0; i < opt.steps[k]; ++i) st.advance(s);
            MmsRow r{n, opt.steps[k], st.dt_model(), max_abs_difference(s, exact)};
            if (k > 0) r.order = std::log(rows.back().error / r.error) / std::log(static_cast<double>(opt.steps[k]) / opt.steps[k - 1]);
            rows.push_back(r);
        }
    }
    return rows;
}

}  // namespace vpsim
