#pragma once

// Linearization of the (phi, q) subsystem about a homogeneous state phi_bar, q = 0, v = 0.
// For a Fourier mode with |k|^2 = k2 and g = c0 k2 + f''(phi_bar):
//   d/dt [phi_k]   [ -k2 n^2 g     k2 n A          ] [phi_k]
//        [q_k  ] = [  A n k2 g    -h1 - (A^2 + eps1) k2 ] [q_k  ]
// Coefficients are evaluated independently of the library's parameter functions.

#include <cmath>
#include <complex>

namespace oracle {

struct LinearCoefficients {
    double c0, fpp, n2, A, h1, eps1;
};

/// Reference parameter set at phi_bar with phi* = phi_bar (A = 1/2 there).
inline LinearCoefficients reference_linear_coefficients(double phi_bar, double chi = 28.0 / 11.0) {
    LinearCoefficients c{};
    c.c0 = 1.0;
    c.fpp = 1.0 / phi_bar + 1.0 / (1.0 - phi_bar) - 2.0 * chi;
    c.n2 = phi_bar * phi_bar * (1.0 - phi_bar * phi_bar);
    c.A = 0.5;
    c.h1 = 1.0 / (50.0 * phi_bar * phi_bar);
    c.eps1 = 0.0;
    return c;
}

struct Mode2 {
    double rate;      ///< largest real part (model time units)
    double q_over_phi;  ///< eigenvector ratio q_k / phi_k (real when the eigenvalue is real)
    bool real;
};

inline Mode2 dominant_mode(const LinearCoefficients& c, double k2) {
    const double n = std::sqrt(c.n2);
    const double g = c.c0 * k2 + c.fpp;
    const double a11 = -k2 * c.n2 * g, a12 = k2 * n * c.A;
    const double a21 = c.A * n * k2 * g, a22 = -c.h1 - (c.A * c.A + c.eps1) * k2;
    const double tr = a11 + a22, det = a11 * a22 - a12 * a21;
    const double disc = 0.25 * tr * tr - det;
    Mode2 m{};
    if (disc >= 0.0) {
        m.rate = 0.5 * tr + std::sqrt(disc);
        m.real = true;
        m.q_over_phi = a12 != 0.0 ? (m.rate - a11) / a12 : 0.0;
    } else {
        m.rate = 0.5 * tr;
        m.real = false;
        m.q_over_phi = 0.0;
    }
    return m;
}

}  // namespace oracle
