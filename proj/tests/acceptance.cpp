// Acceptance gate: one PASS/FAIL line per criterion.
//
//   acceptance            all criteria
//   acceptance C4 C9      a subset
//   --known-failure C7    still run and print FAIL, but leave the exit status alone
//
// Run outputs and a copy of the verdict lines (acceptance.txt) go under $VPSIM_OUTPUT_ROOT
// (default ./acceptance_out).

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "support/dense_dft.hpp"
#include "support/linear_oracle.hpp"
#include "support/mms_oracle.hpp"
#include "support/state_ops.hpp"
#include "vpsim/cli.hpp"

#include "oracles/mms_residuals.inc"

using namespace vpsim;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    std::string out(static_cast<std::size_t>(std::snprintf(nullptr, 0, f, args...)), '\0');
    std::snprintf(out.data(), out.size() + 1, f, args...);
    return out;
}

RunConfig preset(const std::string& name, std::vector<std::pair<std::string, std::string>> sets = {}) {
    sets.insert(sets.begin(), {"preset", name});
    return build_config("", sets);
}

/// ||div v||_2 and ||v||_2 from the half spectrum (Parseval).
std::pair<double, double> divergence_and_norm(const VectorField& v) {
    const Grid2D& g = *v.x.grid;
    const Spectrum vx = spectral::forward(v.x), vy = spectral::forward(v.y);
    return {std::sqrt(spectral::parseval_energy(g, spectral::div(g, vx, vy))),
            std::sqrt(spectral::parseval_energy(g, vx) + spectral::parseval_energy(g, vy))};
}

bool dissipation_nonnegative(const EnergyReport& r) {
    for (double d : {r.D_mix, r.D_q_relax, r.D_q_diff, r.D_visc, r.D_C_diff_offdiag, r.D_C_relax, r.D_trC_diff})
        if (!(d >= 0.0)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// C1, C2: one reference-preset run, every step inspected

struct BalanceRun {
    std::vector<double> E, D;  ///< per step, index = step
    double h = 0.0;            ///< model time per step
};

BalanceRun balance_run(const RunConfig& cfg, long steps, const std::function<void(const State&, const EnergyReport&)>& each = {}) {
    const ModelParams p = cfg.model_params();
    const GridPtr g = cfg.make_grid();
    const Stepper st(g, p, cfg.stepper_config());
    State s = init_state(g, cfg.ic);
    BalanceRun r;
    r.h = st.dt_model();
    for (long k = 0;; ++k) {
        const EnergyReport e = energy_report(s, p);
        r.E.push_back(e.E_total);
        r.D.push_back(e.D_total());
        if (each) each(s, e);
        if (k == steps) break;
        st.advance(s);
    }
    return r;
}

/// int |dE/dt + D| dt over the first `steps` steps; D by the trapezoid rule.
double balance_defect(const BalanceRun& r, long steps) {
    double acc = 0.0;
    for (long k = 0; k < steps; ++k)
        acc += std::abs((r.E[k + 1] - r.E[k]) / r.h + 0.5 * (r.D[k] + r.D[k + 1])) * r.h;
    return acc;
}

std::pair<Verdict, Verdict> criteria_1_2() {
    const RunConfig cfg = preset("paper-sec4");
    const long steps = cfg.total_steps();
    const double m0 = integrate(init_state(cfg.make_grid(), cfg.ic).phi);
    double S00 = 0.0;
    double mass_drift = 0.0, div_worst = 0.0, S0_drift = 0.0;
    long negative_D = 0;
    const BalanceRun run = balance_run(cfg, steps, [&](const State& s, const EnergyReport& e) {
        if (!dissipation_nonnegative(e)) ++negative_D;
        mass_drift = std::max(mass_drift, std::abs(e.mass - m0) / std::abs(m0));
        const auto [dv, nv] = divergence_and_norm(s.v);
        div_worst = std::max(div_worst, nv > 0.0 ? dv / nv : (dv > 0.0 ? INFINITY : 0.0));
        const double S0 = structure_factor(s.phi).S[0];
        if (S00 == 0.0) S00 = S0;
        S0_drift = std::max(S0_drift, std::abs(S0 - S00) / S00);
    });

    const double tol = 1e-8 * std::abs(run.E.front());
    long rises = 0;
    double worst_rise = -INFINITY;
    for (long k = 0; k < steps; ++k) {
        worst_rise = std::max(worst_rise, run.E[k + 1] - run.E[k]);
        if (run.E[k + 1] > run.E[k] + tol) ++rises;
    }

    // defect halving over the first 512 steps of dt and the same horizon at dt/2, dt/4
    const long window = 512;
    std::vector<double> defects{balance_defect(run, window)};
    for (int div : {2, 4}) {
        RunConfig c = cfg;
        c.stepper.dt = cfg.stepper.dt / div;
        defects.push_back(balance_defect(balance_run(c, window * div), window * div));
    }
    const double r1 = defects[0] / defects[1], r2 = defects[1] / defects[2];
    const bool halves = std::abs(r1 - 2.0) <= 0.4 && std::abs(r2 - 2.0) <= 0.4;

    Verdict c1;
    c1.pass = rises == 0 && negative_D == 0 && halves;
    c1.detail = fmt("%ld steps: %ld rises beyond 1e-8|E0| (largest dE %.3g), %ld negative D; balance defect "
                    "%.3e/%.3e/%.3e, ratios %.3f %.3f",
                    steps, rises, worst_rise, negative_D, defects[0], defects[1], defects[2], r1, r2);
    Verdict c2;
    c2.pass = mass_drift <= 1e-10 && div_worst <= 1e-12 && S0_drift <= 1e-10;
    c2.detail = fmt("max relative mass drift %.2e, max ||div v||/||v|| %.2e, max S(0) drift %.2e", mass_drift,
                    div_worst, S0_drift);
    return {c1, c2};
}

// ---------------------------------------------------------------------------
// C3

Verdict criterion_3() {
    double worst = 0.0;
    for (double phibar : {0.3, 0.5, 0.7}) {
        const RunConfig cfg = preset("paper-sec4", {{"grid.nx", "64"}, {"grid.ny", "64"}, {"grid.lx", "64"},
                                                    {"grid.ly", "64"}, {"ic.phi_mean", std::to_string(phibar)},
                                                    {"ic.phi_noise_amplitude", "0"}});
        const GridPtr g = cfg.make_grid();
        const Stepper st(g, cfg.model_params(), cfg.stepper_config());
        State s = init_state(g, cfg.ic);
        for (int n = 0; n < 1000; ++n) {
            const State prev = s;
            st.advance(s);
            worst = std::max(worst, oracle::max_state_diff(s, prev));
        }
    }
    return {worst <= 1e-12, fmt("phi in {0.3, 0.5, 0.7}, 1000 steps each: max per-step change %.2e", worst)};
}

// ---------------------------------------------------------------------------
// C4

double cosine_amplitude(const ScalarField& phi, int m) {
    const Grid2D& g = *phi.grid;
    const double mean = integrate(phi) / g.area();
    double s = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) s += (phi(i, j) - mean) * std::cos(2 * pi * m * g.x(i) / g.lx);
    return 2.0 * s / static_cast<double>(g.size());
}

Verdict criterion_4() {
    const RunConfig cfg = preset("paper-sec4", {{"grid.nx", "64"}, {"grid.ny", "64"}, {"grid.lx", "64"},
                                                {"grid.ly", "64"}, {"ic.phi_noise_amplitude", "0"},
                                                {"stepper.stabilization_s", "0"}});
    const GridPtr g = cfg.make_grid();
    const ModelParams p = cfg.model_params();
    const Stepper st(g, p, cfg.stepper_config());
    const auto coeff = oracle::reference_linear_coefficients(cfg.ic.phi_mean, p.chi);
    const int steps = 1000;
    const double amp = 1e-7;

    int worst_m = 0, argmax_measured = 0, argmax_oracle = 0;
    double worst_rel = 0.0, best_measured = -INFINITY, best_oracle = -INFINITY;
    for (int m = 1; m <= 12; ++m) {
        const double k = 2 * pi * m / g->lx;
        const auto mode = oracle::dominant_mode(coeff, k * k);
        if (!mode.real) return {false, fmt("mode %d has a complex oracle eigenvalue", m)};
        State s = init_state(g, cfg.ic);
        s.phi = sample(g, [&](double x, double) { return cfg.ic.phi_mean + amp * std::cos(k * x); });
        s.q = sample(g, [&](double x, double) { return amp * mode.q_over_phi * std::cos(k * x); });
        const double a0 = cosine_amplitude(s.phi, m);
        for (int n = 0; n < steps; ++n) st.advance(s);
        const double rate = std::log(cosine_amplitude(s.phi, m) / a0) / (steps * st.dt_model());
        const double rel = std::abs(rate - mode.rate) / std::abs(mode.rate);
        if (rel > worst_rel) worst_rel = rel, worst_m = m;
        if (rate > best_measured) best_measured = rate, argmax_measured = m;
        if (mode.rate > best_oracle) best_oracle = mode.rate, argmax_oracle = m;
    }
    return {worst_rel <= 0.05 && argmax_measured == argmax_oracle,
            fmt("axis modes 1..12: worst relative rate error %.2f%% (m=%d); argmax measured m=%d, oracle m=%d",
                100 * worst_rel, worst_m, argmax_measured, argmax_oracle)};
}

// ---------------------------------------------------------------------------
// C5, C6

std::pair<Verdict, Verdict> criteria_5_6() {
    EnsembleOptions sf_opt;
    sf_opt.members = 8;
    sf_opt.master_seed = 1;
    const RunConfig sf_cfg = preset("simple-fluid", {{"outputs.directory", "ensemble-simple-fluid"}});
    const EnsembleResult sf = cmd_ensemble(sf_cfg, sf_opt);

    // the viscoelastic horizon is the preset's; its decade is the last one before t_end
    const RunConfig ve_cfg =
        preset("paper-sec4", {{"outputs.directory", "ensemble-viscoelastic"}, {"outputs.snapshot_every", "32"}});
    EnsembleOptions ve_opt = sf_opt;
    ve_opt.analyze.t_hi = ve_cfg.stepper.t_end;
    ve_opt.analyze.t_lo = ve_cfg.stepper.t_end / 10.0;
    const EnsembleResult ve = cmd_ensemble(ve_cfg, ve_opt);

    std::string members;
    for (const auto& m : sf.members) members += fmt(" %.3f", m.fit.exponent);
    const auto& f = sf.average.fit;
    Verdict c5;
    c5.pass = std::abs(f.exponent + 1.0 / 3.0) <= 0.1;
    c5.detail = fmt("simple fluid, 8 seeds, 256^2: q_max ~ t^%.3f +- %.3f over t in [%g, %g]; members:%s", f.exponent,
                    f.stderr_, sf.average.t_lo, sf.average.t_hi, members.c_str());

    const double d_sf = sf.average.collapse.distance, d_ve = ve.average.collapse.distance;
    Verdict c6;
    c6.pass = std::isfinite(d_sf) && std::isfinite(d_ve) && d_sf <= 0.5 * d_ve;
    c6.detail = fmt("collapse distance simple fluid %.4g over [%g, %g], viscoelastic %.4g over [%g, %g], ratio %.3f",
                    d_sf, sf.average.t_lo, sf.average.t_hi, d_ve, ve.average.t_lo, ve.average.t_hi, d_sf / d_ve);
    return {c5, c6};
}

// ---------------------------------------------------------------------------
// C7

Verdict criterion_7() {
    const std::vector<std::pair<std::string, std::string>> small{
        {"grid.nx", "64"}, {"grid.ny", "64"}, {"grid.lx", "64"}, {"grid.ly", "64"}, {"stepper.t_end", "50"},
        {"outputs.energy_every", "10"}, {"outputs.snapshot_every", "10"}, {"ic.rng_seed", "7"}};

    // (a) two independent runs from identical data, compared through the files they wrote
    auto sa = small, sb = small;
    sa.emplace_back("outputs.directory", "relenergy-a");
    sb.emplace_back("outputs.directory", "relenergy-b");
    const RunConfig ca = preset("paper-sec4", sa), cb = preset("paper-sec4", sb);
    cmd_run(ca);
    cmd_run(cb);
    const StabilityReport same = cmd_relenergy(run_directory(ca), run_directory(cb));
    const ModelParams p = ca.model_params();
    const double escale = std::abs(free_energy(init_state(ca.make_grid(), ca.ic), p).E_total);
    double worst_same = 0.0;
    for (const auto& r : same.rows) worst_same = std::max(worst_same, r.E_rel);
    const bool a_ok = worst_same <= 1e-12 * escale;

    // (b) perturbations delta and 2 delta of the base run
    const GridPtr g = ca.make_grid();
    const double delta = 1e-4;
    const auto psi = sample(g, [&](double x, double y) {
        return std::cos(2 * pi * 3 * x / g->lx) * std::cos(2 * pi * 2 * y / g->ly);
    });
    auto trajectory = [&](const ModelParams& mp, double eps) {
        const Stepper st(g, mp, ca.stepper_config());
        State s = init_state(g, ca.ic);
        for (std::size_t n = 0; n < s.phi.size(); ++n) s.phi.data[n] += eps * psi.data[n];
        std::vector<State> out{s};
        for (long k = 1; k <= ca.total_steps(); ++k) {
            st.advance(s);
            if (k % 10 == 0) out.push_back(s);
        }
        return out;
    };
    struct Ratios {
        double at0, lo = INFINITY, hi = -INFINITY;
    };
    auto ratios = [&](const ModelParams& mp, const std::vector<State>& base, const std::vector<State>& one,
                      const std::vector<State>& two) {
        Ratios r{};
        for (std::size_t i = 0; i < base.size(); ++i) {
            const double q = relative_energy(two[i], base[i], mp).E_rel / relative_energy(one[i], base[i], mp).E_rel;
            if (i == 0) r.at0 = q;
            r.lo = std::min(r.lo, q);
            r.hi = std::max(r.hi, q);
        }
        return r;
    };
    const auto base = trajectory(p, 0.0), one = trajectory(p, delta), two = trajectory(p, 2 * delta);
    const Ratios rb = ratios(p, base, one, two);
    const bool b_ok = std::abs(rb.at0 - 4.0) <= 0.04 && rb.lo >= 3.2 && rb.hi <= 5.0;

    // diagnostic only: the same pair with a smooth A switch (steepness 1)
    ModelParams smooth = p;
    smooth.a_steepness = 1.0;
    const Ratios rs = ratios(smooth, trajectory(smooth, 0.0), trajectory(smooth, delta), trajectory(smooth, 2 * delta));

    // (c) empirical stability constant
    const StabilityReport rep = stability_report(one, base, p);
    bool finite = true;
    for (double c : rep.C_hat) finite = finite && std::isfinite(c);

    return {a_ok && b_ok && finite,
            fmt("(a) identical data: max E_rel %.2e (scale %.3g); (b) E_rel ratio at t=0 %.4f, over t in [0, %g] "
                "[%.3f, %.3f] (A steepness %g; with steepness 1: [%.3f, %.3f]); (c) C_hat max %.4f, finite: %s",
                worst_same, escale, rb.at0, ca.stepper.t_end, rb.lo, rb.hi, p.a_steepness, rs.lo, rs.hi,
                rep.C_hat_max, finite ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// C8

Verdict criterion_8() {
    // 64 samples in x resolve the transcendental coefficients; the 16 oracle nodes are every fourth
    const GridPtr g = make_grid(64, 8, 2 * pi, 2 * pi);
    const ModelParams p = oracle::mms_params();
    const oracle::Manufactured m = oracle::manufactured(g, p, 0.3);
    ResidualInputs in;
    in.z_hat = &m.z;
    in.dt_z_hat = &m.dt;
    in.mu_hat = &m.mu_shifted;
    const ResidualFields r = residual_fields(in, p);
    double worst = 0.0;
    for (int j = 0; j < g->ny; ++j)
        for (int o = 0; o < 16; ++o) {
            const int i = 4 * o;
            for (double d : {r.phi(i, j) - kMmsRPhi[o], r.mu(i, j) - kMmsRMu[o], r.q(i, j) - kMmsRQ[o],
                             r.v.x(i, j) - kMmsRVxMean, r.v.y(i, j) - kMmsRVy[o], r.C.c11(i, j) - kMmsRC11[o],
                             r.C.c12(i, j) - kMmsRC12[o], r.C.c22(i, j) - kMmsRC22[o]})
                worst = std::max(worst, std::abs(d));
        }

    const RunConfig cfg = preset("mms");
    const auto rows = cmd_mms(cfg, MmsOptions{}, resolve_output("mms"));
    double omin = INFINITY, omax = -INFINITY;
    for (const auto& row : rows)
        if (std::isfinite(row.order)) {
            omin = std::min(omin, row.order);
            omax = std::max(omax, row.order);
        }
    const bool orders_ok = omin >= 0.9 && omax <= 1.1;
    return {worst <= 1e-8 && orders_ok,
            fmt("residuals vs symbolic oracle: max deviation %.2e; temporal order over %zu runs in [%.3f, %.3f]", worst,
                rows.size(), omin, omax)};
}

// ---------------------------------------------------------------------------
// C9

double rel_diff(const ScalarField& a, const ScalarField& ref) {
    return oracle::max_abs_diff(a, ref) / std::max(1.0, oracle::max_abs(ref));
}

ScalarField white_noise(const GridPtr& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ScalarField f(g);
    for (double& v : f.data) v = 2.0 * uniform01(rng) - 1.0;
    return f;
}

Verdict criterion_9() {
    double worst = 0.0;
    std::string where;
    auto note = [&](double d, const std::string& what) {
        if (d > worst) worst = d, where = what;
    };
    struct Dims {
        int nx, ny;
        double lx, ly;
    };
    for (const Dims d : {Dims{16, 16, 16.0, 16.0}, Dims{12, 16, 12.0, 20.0}, Dims{16, 8, 2 * pi, pi}}) {
        const GridPtr g = make_grid(d.nx, d.ny, d.lx, d.ly);
        const std::string tag = fmt("%dx%d ", d.nx, d.ny);
        const ScalarField f = white_noise(g, 11), u = white_noise(g, 12), w = white_noise(g, 13);
        const auto F = oracle::dense_forward(f);

        const Spectrum hat = spectral::forward(f);
        const int nh = g->nxh();
        double fw = 0.0;
        for (int j = 0; j < g->ny; ++j)
            for (int i = 0; i < nh; ++i)
                fw = std::max(fw, std::abs(hat[static_cast<std::size_t>(j) * nh + i] - F[static_cast<std::size_t>(j) * g->nx + i]));
        note(fw / static_cast<double>(g->size()), tag + "forward");
        note(rel_diff(spectral::inverse(g, hat), oracle::dense_inverse(g, F)), tag + "inverse");

        const VectorField grad = gradient(f);
        note(rel_diff(grad.x, oracle::dense_ddx(f)), tag + "d/dx");
        note(rel_diff(grad.y, oracle::dense_ddy(f)), tag + "d/dy");
        note(rel_diff(laplacian(f), oracle::dense_laplacian(f)), tag + "laplacian");
        ScalarField dv = oracle::dense_ddx(u);
        const ScalarField dvy = oracle::dense_ddy(w);
        for (std::size_t n = 0; n < dv.size(); ++n) dv.data[n] += dvy.data[n];
        note(rel_diff(divergence(VectorField(u, w)), dv), tag + "divergence");

        auto Ux = oracle::dense_forward(u), Uy = oracle::dense_forward(w);
        for (int my = 0; my < g->ny; ++my)
            for (int mx = 0; mx < g->nx; ++mx) {
                const double kx = oracle::k_odd(mx, g->nx, g->lx), ky = oracle::k_odd(my, g->ny, g->ly);
                const double kk = kx * kx + ky * ky;
                if (kk == 0.0) continue;
                const std::size_t n = static_cast<std::size_t>(my) * g->nx + mx;
                const oracle::cplx kd = kx * Ux[n] + ky * Uy[n];
                Ux[n] -= kx * kd / kk;
                Uy[n] -= ky * kd / kk;
            }
        const VectorField proj = leray_project(VectorField(u, w));
        note(rel_diff(proj.x, oracle::dense_inverse(g, Ux)), tag + "leray x");
        note(rel_diff(proj.y, oracle::dense_inverse(g, Uy)), tag + "leray y");

        // structure factor per mode, shell averages and S0
        const double da = g->cell_area();
        const auto map = structure_factor(f);
        double smax = 0.0, sdiff = 0.0;
        for (std::size_t n = 0; n < F.size(); ++n) {
            const double ref = da * da * std::norm(F[n]);
            smax = std::max(smax, ref);
            sdiff = std::max(sdiff, std::abs(map.S[n] - ref));
        }
        note(sdiff / std::max(1.0, smax), tag + "S(k)");
        const ShellBins bins = shell_bins(*g);
        const ShellProfile prof = shell_average(map, bins);
        double pdiff = std::abs(prof.S0 - da * da * std::norm(F[0])) / std::max(1.0, smax);
        for (std::size_t s = 0; s < prof.S.size(); ++s) {
            double sum = 0.0;
            int count = 0;
            for (int my = 0; my < g->ny; ++my)
                for (int mx = 0; mx < g->nx; ++mx) {
                    if (mx == 0 && my == 0) continue;
                    const double k = std::hypot(oracle::k_full(mx, g->nx, g->lx), oracle::k_full(my, g->ny, g->ly));
                    if (k > s * bins.dq && k <= (s + 1) * bins.dq) {
                        sum += da * da * std::norm(F[static_cast<std::size_t>(my) * g->nx + mx]);
                        ++count;
                    }
                }
            const double ref = count ? sum / count : 0.0;
            pdiff = std::max(pdiff, std::abs(prof.S[s] - ref) / std::max(1.0, smax));
            if (static_cast<std::size_t>(count) != prof.count[s]) pdiff = INFINITY;
        }
        note(pdiff, tag + "shell average");
    }
    return {worst <= 1e-12, fmt("max relative deviation from the dense DFT %.2e (%s)", worst, where.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
    if (!std::getenv(kOutputRootEnv)) setenv(kOutputRootEnv, "acceptance_out", 1);
    std::set<std::string> only, known;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--known-failure" && i + 1 < argc)
            known.insert(argv[++i]);
        else
            only.insert(a);
    }
    auto wanted = [&](const char* id) { return only.empty() || only.count(id); };

    // ctest hides the output of passing tests, so the verdict lines are also kept on disk.
    const fs::path log_path = resolve_output("acceptance.txt");
    fs::create_directories(fs::absolute(log_path).parent_path());
    std::ofstream log(log_path);
    int failures = 0, expected = 0;
    auto report = [&](const char* id, const char* name, const Verdict& v) {
        const bool is_known = known.count(id) > 0;
        const std::string line = fmt("%s %-34s %s  %s%s", id, name, v.pass ? "PASS" : "FAIL", v.detail.c_str(),
                                     !v.pass && is_known ? "  [known failure]" : "");
        std::printf("%s\n", line.c_str());
        std::fflush(stdout);
        log << line << std::endl;
        if (!v.pass) ++(is_known ? expected : failures);
    };
    auto guarded = [&](const char* id, const char* name, const std::function<Verdict()>& fn) {
        if (!wanted(id)) return;
        try {
            report(id, name, fn());
        } catch (const std::exception& e) {
            report(id, name, {false, std::string("error: ") + e.what()});
        }
    };

    guarded("C9", "dense-DFT oracle equivalence", criterion_9);
    guarded("C3", "homogeneous fixed points", criterion_3);
    guarded("C4", "linear regime oracle", criterion_4);
    guarded("C8", "residual oracle and MMS order", criterion_8);
    guarded("C7", "relative-energy stability", criterion_7);
    if (wanted("C1") || wanted("C2")) {
        std::pair<Verdict, Verdict> v;
        try {
            v = criteria_1_2();
        } catch (const std::exception& e) {
            v.first = v.second = {false, std::string("error: ") + e.what()};
        }
        if (wanted("C1")) report("C1", "energy-dissipation consistency", v.first);
        if (wanted("C2")) report("C2", "conservation and constraints", v.second);
    }
    if (wanted("C5") || wanted("C6")) {
        std::pair<Verdict, Verdict> v;
        try {
            v = criteria_5_6();
        } catch (const std::exception& e) {
            v.first = v.second = {false, std::string("error: ") + e.what()};
        }
        if (wanted("C5")) report("C5", "coarsening law", v.first);
        if (wanted("C6")) report("C6", "dynamic-scaling contrast", v.second);
    }
    const std::string summary = fmt("%d unexpected failure(s), %d known failure(s)", failures, expected);
    std::printf("%s\n", summary.c_str());
    log << summary << "\n";
    return failures == 0 ? 0 : 1;
}
