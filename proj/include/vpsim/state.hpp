#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "vpsim/grid.hpp"

namespace vpsim {

/// Peterlin equilibrium stretch: C = lambda*I with tr(C)*C = I, i.e. 2*lambda^2 = 1.
inline const double kPeterlinLambda = 1.0 / std::sqrt(2.0);

/// Symmetric 2x2 tensor per node, stored as (c11, c12, c22).
struct ConformationField {
    ScalarField c11, c12, c22;

    ConformationField() = default;
    explicit ConformationField(const GridPtr& g, double diag = kPeterlinLambda, double off = 0.0)
        : c11(g, diag), c12(g, off), c22(g, diag) {}
};

/// Eigenvalues of [[a, b], [b, d]], smaller first.
struct Eig2 {
    double lo, hi;
};

inline Eig2 sym2_eigenvalues(double a, double b, double d) {
    const double m = 0.5 * (a + d);
    const double r = std::hypot(0.5 * (a - d), b);
    return {m - r, m + r};
}

inline double min_eigenvalue_C(const ConformationField& C) {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < C.c11.size(); ++n)
        lo = std::min(lo, sym2_eigenvalues(C.c11.data[n], C.c12.data[n], C.c22.data[n]).lo);
    return lo;
}

struct State {
    double t = 0.0;  ///< in t_FE units
    ScalarField phi;
    ScalarField q;
    VectorField v;
    ConformationField C;

    const GridPtr& grid() const { return phi.grid; }
};

inline double mass(const State& s) { return integrate(s.phi); }

struct InitialCondition {
    double phi_mean = 0.5;
    double phi_noise_amplitude = 0.01;
    std::uint64_t rng_seed = 1;

    void validate() const {
        if (!(phi_mean > 0.0 && phi_mean < 1.0)) throw Error("initial condition: phi_mean must lie in (0, 1)");
        if (!(phi_noise_amplitude >= 0.0) || phi_noise_amplitude >= std::min(phi_mean, 1.0 - phi_mean))
            throw Error("initial condition: noise amplitude must be in [0, min(phi_mean, 1 - phi_mean))");
    }
};

/// Uniform double in [0, 1) from the top 53 bits; std::uniform_real_distribution is not
/// reproducible across standard libraries, mt19937_64 output is.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// phi = phi_mean + U[-a, a] per node, mean-corrected; q = 0, v = 0, C = I/sqrt(2).
inline State init_state(const GridPtr& g, const InitialCondition& ic) {
    ic.validate();
    State s;
    s.phi = ScalarField(g, ic.phi_mean);
    s.q = ScalarField(g, 0.0);
    s.v = VectorField(g);
    s.C = ConformationField(g);
    if (ic.phi_noise_amplitude > 0.0) {
        std::mt19937_64 rng(ic.rng_seed);
        double sum = 0.0;
        for (double& p : s.phi.data) {
            p = ic.phi_noise_amplitude * (2.0 * uniform01(rng) - 1.0);
            sum += p;
        }
        const double shift = sum / static_cast<double>(g->size());
        for (double& p : s.phi.data) p = ic.phi_mean + (p - shift);
    }
    return s;
}

}  // namespace vpsim
