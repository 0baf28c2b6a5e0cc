#pragma once

// Periodic uniform 2D grid, Fourier transforms and spectral derivative operators.
//
// Layout conventions
//   physical:  data[j * nx + i], i along x, j along y (row-major, y rows)
//   spectral:  FFTW r2c half spectrum, hat[j * (nx/2 + 1) + i]
// The forward transform is unnormalized; the inverse carries 1/(nx*ny).

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "vpsim/common.hpp"

namespace vpsim {

namespace detail {
// FFTW planning is not thread-safe; plan execution with the new-array interface is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

class Grid2D {
public:
    Grid2D(int nx, int ny, double lx, double ly) : nx(nx), ny(ny), lx(lx), ly(ly) {
        if (nx < 8 || ny < 8 || nx % 2 != 0 || ny % 2 != 0)
            throw Error("make_grid: node counts must be even and >= 8 (got nx=" + std::to_string(nx) +
                        ", ny=" + std::to_string(ny) + ")");
        if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly))
            throw Error("make_grid: domain lengths must be positive and finite");
        dx = lx / nx;
        dy = ly / ny;
        kx.resize(nx);
        ky.resize(ny);
        for (int i = 0; i < nx; ++i) kx[i] = 2.0 * pi * signed_index(i, nx) / lx;
        for (int j = 0; j < ny; ++j) ky[j] = 2.0 * pi * signed_index(j, ny) / ly;

        dealias_mask.resize(spectral_size());
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nxh(); ++i)
                dealias_mask[j * nxh() + i] =
                    3 * std::abs(signed_index(i, nx)) <= nx && 3 * std::abs(signed_index(j, ny)) <= ny;

        RealBuffer real(size());
        Spectrum cplx(spectral_size());
        std::lock_guard lock(detail::fftw_planner_mutex());
        forward_plan_ = fftw_plan_dft_r2c_2d(ny, nx, real.data(), reinterpret_cast<fftw_complex*>(cplx.data()),
                                             FFTW_ESTIMATE);
        inverse_plan_ = fftw_plan_dft_c2r_2d(ny, nx, reinterpret_cast<fftw_complex*>(cplx.data()), real.data(),
                                             FFTW_ESTIMATE);
        if (!forward_plan_ || !inverse_plan_) throw Error("make_grid: FFTW planning failed");
    }

    Grid2D(const Grid2D&) = delete;
    Grid2D& operator=(const Grid2D&) = delete;

    ~Grid2D() {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(forward_plan_);
        fftw_destroy_plan(inverse_plan_);
    }

    int nx, ny;
    double lx, ly;
    double dx = 0.0, dy = 0.0;
    std::vector<double> kx, ky;  ///< signed wavenumbers 2*pi*m/L, Nyquist carries m = -n/2
    std::vector<bool> dealias_mask;  ///< half-spectrum layout; true where |m| <= n/3 on both axes

    static int signed_index(int i, int n) { return i <= n / 2 - 1 ? i : i - n; }

    int nxh() const { return nx / 2 + 1; }
    std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
    std::size_t spectral_size() const { return static_cast<std::size_t>(ny) * nxh(); }
    double cell_area() const { return dx * dy; }
    double area() const { return lx * ly; }
    double x(int i) const { return i * dx; }
    double y(int j) const { return j * dy; }

    /// Wavenumbers used by odd derivatives: the Nyquist mode is zeroed so derivatives stay real.
    double kx_odd(int i) const { return i == nx / 2 ? 0.0 : kx[i]; }
    double ky_odd(int j) const { return j == ny / 2 ? 0.0 : ky[j]; }
    double k2(int j, int i) const { return kx[i] * kx[i] + ky[j] * ky[j]; }

    bool same_layout(const Grid2D& o) const {
        return nx == o.nx && ny == o.ny && lx == o.lx && ly == o.ly;
    }

    void forward(std::span<const double> in, Spectrum& out) const {
        out.resize(spectral_size());
        fftw_execute_dft_r2c(forward_plan_, const_cast<double*>(in.data()),
                             reinterpret_cast<fftw_complex*>(out.data()));
    }

    /// Consumes `in` (c2r destroys its input).
    void inverse(Spectrum& in, std::span<double> out) const {
        fftw_execute_dft_c2r(inverse_plan_, reinterpret_cast<fftw_complex*>(in.data()), out.data());
        const double scale = 1.0 / static_cast<double>(size());
        for (double& v : out) v *= scale;
    }

private:
    fftw_plan forward_plan_ = nullptr;
    fftw_plan inverse_plan_ = nullptr;
};

using GridPtr = std::shared_ptr<const Grid2D>;

inline GridPtr make_grid(int nx, int ny, double lx, double ly) {
    return std::make_shared<const Grid2D>(nx, ny, lx, ly);
}

struct ScalarField {
    GridPtr grid;
    RealBuffer data;

    ScalarField() = default;
    explicit ScalarField(GridPtr g, double value = 0.0) : grid(std::move(g)), data(grid->size(), value) {}

    double& operator()(int i, int j) { return data[static_cast<std::size_t>(j) * grid->nx + i]; }
    double operator()(int i, int j) const { return data[static_cast<std::size_t>(j) * grid->nx + i]; }
    std::size_t size() const { return data.size(); }
    std::span<double> span() { return {data.data(), data.size()}; }
    std::span<const double> span() const { return {data.data(), data.size()}; }
};

struct VectorField {
    ScalarField x, y;

    VectorField() = default;
    explicit VectorField(const GridPtr& g, double vx = 0.0, double vy = 0.0) : x(g, vx), y(g, vy) {}
    VectorField(ScalarField a, ScalarField b) : x(std::move(a)), y(std::move(b)) {}
};

inline ScalarField sample(const GridPtr& g, const std::function<double(double, double)>& fn) {
    ScalarField f(g);
    for (int j = 0; j < g->ny; ++j)
        for (int i = 0; i < g->nx; ++i) f(i, j) = fn(g->x(i), g->y(j));
    return f;
}

inline bool all_finite(const ScalarField& f) {
    return std::all_of(f.data.begin(), f.data.end(), [](double v) { return std::isfinite(v); });
}

/// Quadrature sum(f) * dx * dy.
inline double integrate(const ScalarField& f) {
    double s = 0.0;
    for (double v : f.data) s += v;
    return s * f.grid->cell_area();
}

inline double inner(const ScalarField& a, const ScalarField& b) {
    double s = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) s += a.data[n] * b.data[n];
    return s * a.grid->cell_area();
}

// ---------------------------------------------------------------------------
// Spectral primitives

namespace spectral {

inline Spectrum forward(const ScalarField& f) {
    Spectrum out;
    f.grid->forward(f.span(), out);
    return out;
}

inline ScalarField inverse(const GridPtr& g, Spectrum hat) {
    ScalarField f(g);
    g->inverse(hat, f.span());
    return f;
}

/// out = i*kx * in
inline Spectrum ddx(const Grid2D& g, const Spectrum& in) {
    Spectrum out(in.size());
    const int nh = g.nxh();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < nh; ++i) out[j * nh + i] = Complex(0.0, g.kx_odd(i)) * in[j * nh + i];
    return out;
}

inline Spectrum ddy(const Grid2D& g, const Spectrum& in) {
    Spectrum out(in.size());
    const int nh = g.nxh();
    for (int j = 0; j < g.ny; ++j) {
        const Complex ik(0.0, g.ky_odd(j));
        for (int i = 0; i < nh; ++i) out[j * nh + i] = ik * in[j * nh + i];
    }
    return out;
}

/// out = -|k|^2 * in (Nyquist included)
inline Spectrum lap(const Grid2D& g, const Spectrum& in) {
    Spectrum out(in.size());
    const int nh = g.nxh();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < nh; ++i) out[j * nh + i] = -g.k2(j, i) * in[j * nh + i];
    return out;
}

/// i*kx*ax + i*ky*ay with odd-derivative wavenumbers.
inline Spectrum div(const Grid2D& g, const Spectrum& ax, const Spectrum& ay) {
    Spectrum out(ax.size());
    const int nh = g.nxh();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < nh; ++i) {
            const std::size_t n = static_cast<std::size_t>(j) * nh + i;
            out[n] = Complex(0.0, g.kx_odd(i)) * ax[n] + Complex(0.0, g.ky_odd(j)) * ay[n];
        }
    return out;
}

inline void apply_dealias(const Grid2D& g, Spectrum& hat) {
    for (std::size_t n = 0; n < hat.size(); ++n)
        if (!g.dealias_mask[n]) hat[n] = 0.0;
}

/// Sum of |f|^2 * dx*dy evaluated from the half spectrum (Parseval), counting conjugate partners.
inline double parseval_energy(const Grid2D& g, const Spectrum& hat) {
    const int nh = g.nxh();
    double s = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < nh; ++i) {
            const double w = (i == 0 || i == g.nx / 2) ? 1.0 : 2.0;
            s += w * std::norm(hat[static_cast<std::size_t>(j) * nh + i]);
        }
    return s * g.cell_area() / static_cast<double>(g.size());
}

}  // namespace spectral

// ---------------------------------------------------------------------------
// Physical-space operators

inline VectorField gradient(const ScalarField& f) {
    const Grid2D& g = *f.grid;
    const Spectrum hat = spectral::forward(f);
    return {spectral::inverse(f.grid, spectral::ddx(g, hat)), spectral::inverse(f.grid, spectral::ddy(g, hat))};
}

inline ScalarField divergence(const VectorField& v) {
    const Grid2D& g = *v.x.grid;
    return spectral::inverse(v.x.grid, spectral::div(g, spectral::forward(v.x), spectral::forward(v.y)));
}

inline ScalarField laplacian(const ScalarField& f) {
    return spectral::inverse(f.grid, spectral::lap(*f.grid, spectral::forward(f)));
}

// ---------------------------------------------------------------------------
// Wavenumber shells

struct Shell {
    double q_low = 0.0;
    double q_high = 0.0;
    std::vector<std::size_t> modes;  ///< full-spectrum flat indices j*nx + i

    double center() const { return 0.5 * (q_low + q_high); }
};

/// Partition of the nonzero modes into shells q < |k| <= q + dq; the zero mode is index 0.
struct ShellBins {
    double dq = 0.0;
    std::size_t zero_mode = 0;
    std::vector<Shell> shells;
    std::vector<int> shell_of_mode;  ///< -1 for the zero mode

    std::vector<double> centers() const {
        std::vector<double> c;
        c.reserve(shells.size());
        for (const auto& s : shells) c.push_back(s.center());
        return c;
    }
};

inline double mode_wavenumber(const Grid2D& g, std::size_t flat) {
    const int j = static_cast<int>(flat / g.nx);
    const int i = static_cast<int>(flat % g.nx);
    return std::hypot(g.kx[i], g.ky[j]);
}

inline ShellBins shell_bins(const Grid2D& g, double dq = 0.0) {
    if (dq == 0.0) dq = 2.0 * pi / std::max(g.lx, g.ly);
    if (!(dq > 0.0)) throw Error("shell_bins: dq must be positive");
    ShellBins bins;
    bins.dq = dq;
    bins.shell_of_mode.assign(g.size(), -1);
    for (std::size_t n = 1; n < g.size(); ++n) {
        const double r = mode_wavenumber(g, n) / dq;
        // Shell s holds s*dq < |k| <= (s+1)*dq; the tolerance keeps exact edges (|k| = m*dq) in the lower shell.
        const int s = std::max(0, static_cast<int>(std::ceil(r - 1e-9)) - 1);
        if (static_cast<std::size_t>(s) >= bins.shells.size()) bins.shells.resize(s + 1);
        bins.shells[s].modes.push_back(n);
        bins.shell_of_mode[n] = s;
    }
    for (std::size_t s = 0; s < bins.shells.size(); ++s) {
        bins.shells[s].q_low = s * dq;
        bins.shells[s].q_high = (s + 1) * dq;
    }
    return bins;
}

}  // namespace vpsim
