#pragma once

// Subcommand implementations: run, analyze, relenergy, mms, ensemble.
//
// A run directory holds config.ini (the effective configuration), energy.csv and
// snapshots/step_NNNNNNNNNN.bin. Snapshots double as checkpoints.

#include <atomic>
#include <iostream>
#include <mutex>
#include <thread>

#include "vpsim/analysis.hpp"
#include "vpsim/io.hpp"
#include "vpsim/mms.hpp"
#include "vpsim/relenergy.hpp"

namespace vpsim {

// ---------------------------------------------------------------------------
// run

struct RunOptions {
    std::optional<fs::path> resume;  ///< snapshot to continue from
    std::ostream* log = nullptr;
};

struct RunResult {
    fs::path dir;
    long steps = 0;
    State final_state;
};

/// ||div v|| / ||grad v|| in spectral space; 0 for a constant velocity.
inline double divergence_ratio(const VectorField& v) {
    const Grid2D& g = *v.x.grid;
    const Spectrum vx = spectral::forward(v.x), vy = spectral::forward(v.y);
    const int nh = g.nxh();
    double div = 0.0, grad = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < nh; ++i) {
            const std::size_t n = static_cast<std::size_t>(j) * nh + i;
            const Complex d = g.kx_odd(i) * vx[n] + g.ky_odd(j) * vy[n];
            div += std::norm(d);
            grad += g.k2(j, i) * (std::norm(vx[n]) + std::norm(vy[n]));
        }
    return grad > 0.0 ? std::sqrt(div / grad) : 0.0;
}

inline const std::vector<std::string>& energy_columns() {
    static const std::vector<std::string> c{"step",  "t",         "t_model",   "E_total",  "E_mix",  "E_bulk",
                                            "E_kin", "E_el",      "D_total",   "D_mix",    "D_q_relax",
                                            "D_q_diff", "D_visc", "D_C_diff_offdiag", "D_C_relax", "D_trC_diff",
                                            "mass",  "div_ratio", "min_eig_C"};
    return c;
}

inline std::vector<double> energy_row(long step, const State& s, const ModelParams& p) {
    const EnergyReport r = energy_report(s, p);
    return {static_cast<double>(step), s.t, s.t * time_unit(p), r.E_total, r.E_mix, r.E_bulk, r.E_kin, r.E_el,
            r.D_total(), r.D_mix, r.D_q_relax, r.D_q_diff, r.D_visc, r.D_C_diff_offdiag, r.D_C_relax, r.D_trC_diff,
            r.mass, divergence_ratio(s.v), min_eigenvalue_C(s.C)};
}

inline fs::path run_directory(const RunConfig& cfg) { return resolve_output(cfg.outputs.directory); }

inline RunResult cmd_run(const RunConfig& cfg, const RunOptions& opt = {}) {
    const ModelParams p = cfg.model_params();
    const StepperConfig sc = cfg.stepper_config();
    const std::uint64_t hash = params_hash(cfg);
    const GridPtr g = cfg.make_grid();
    const fs::path dir = run_directory(cfg);
    fs::create_directories(dir / "snapshots");

    State s;
    long first = 0;
    if (opt.resume) {
        Snapshot snap = read_snapshot(*opt.resume, g);
        if (snap.header.params_hash != hash)
            throw Error("resume: parameter hash of '" + opt.resume->string() + "' does not match the configuration");
        s = std::move(snap.state);
        first = snap.header.step;
        // keep energy rows up to the checkpoint
        const fs::path csv = dir / "energy.csv";
        CsvTable old = fs::exists(csv) ? read_csv(csv) : CsvTable{};
        CsvWriter w(csv, energy_columns());
        for (const auto& r : old.rows)
            if (r.at(0) <= static_cast<double>(first)) w.row(r);
    } else {
        for (const auto& f : fs::directory_iterator(dir / "snapshots")) fs::remove(f.path());
        s = init_state(g, cfg.ic);
        CsvWriter(dir / "energy.csv", energy_columns());
    }
    write_text_file(dir / "config.ini", emit_config(cfg));

    const std::uint64_t draws = cfg.ic.phi_noise_amplitude > 0.0 ? g->size() : 0;
    auto snapshot = [&](long k) {
        SnapshotHeader h;
        h.step = k;
        h.params_hash = hash;
        h.rng_seed = cfg.ic.rng_seed;
        h.rng_draws = draws;
        write_snapshot(dir / "snapshots" / snapshot_name(k), s, h);
    };

    CsvWriter energy(dir / "energy.csv", energy_columns(), true);
    const Stepper stepper(g, p, sc);
    const long total = cfg.total_steps();
    auto emit = [&](long k) {
        if (k % sc.output_every == 0 || k == total) energy.row(energy_row(k, s, p));
        if (sc.snapshot_every > 0 && (k % sc.snapshot_every == 0 || k == total)) snapshot(k);
    };
    if (!opt.resume) emit(0);
    for (long k = first + 1; k <= total; ++k) {
        stepper.advance(s);
        emit(k);
        if (opt.log && k % (sc.output_every * 10) == 0)
            *opt.log << "step " << k << "/" << total << "  t=" << s.t << "\n";
    }
    return {dir, total - first, std::move(s)};
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOptions {
    double dq = 0.0;              ///< 0: 2 pi / L
    bool subtract_mean = false;
    double t_lo = std::numeric_limits<double>::quiet_NaN();  ///< NaN: onset time
    double t_hi = std::numeric_limits<double>::quiet_NaN();  ///< NaN: 10 t_lo, capped at the last frame
    std::optional<fs::path> out;  ///< default <run>/analysis
};

struct AnalysisResult {
    StructureFactorSeries series;
    std::vector<double> fluctuation;  ///< sum of S over nonzero modes per frame
    double t_lo = 0.0, t_hi = 0.0;
    PowerLawFit fit;
    std::vector<std::size_t> collapse_frames;
    CollapseResult collapse;
};

/// Onset: first frame whose fluctuation intensity reaches half of the final frame's.
inline double onset_time(const StructureFactorSeries& s, const std::vector<double>& fluct) {
    for (std::size_t f = 0; f < s.frames(); ++f)
        if (s.times[f] > 0.0 && fluct[f] >= 0.5 * fluct.back()) return s.times[f];
    return s.times.back();
}

/// Up to four frames log-spaced over [t_lo, t_hi], nearest available, distinct.
inline std::vector<std::size_t> decade_frames(const StructureFactorSeries& s, double t_lo, double t_hi) {
    std::vector<std::size_t> out;
    for (int i = 0; i < 4; ++i) {
        const double target = t_lo * std::pow(t_hi / t_lo, i / 3.0);
        std::size_t best = 0;
        for (std::size_t f = 1; f < s.frames(); ++f)
            if (std::abs(std::log(s.times[f] / target)) < std::abs(std::log(std::max(s.times[best], 1e-300) / target)))
                best = f;
        if (std::find(out.begin(), out.end(), best) == out.end()) out.push_back(best);
    }
    return out;
}

/// Series with the fitting window and collapse; no files written.
inline AnalysisResult analyze_series(StructureFactorSeries series, std::vector<double> fluct, const AnalyzeOptions& opt) {
    AnalysisResult r;
    r.series = std::move(series);
    r.fluctuation = std::move(fluct);
    const auto& s = r.series;
    r.t_lo = std::isnan(opt.t_lo) ? onset_time(s, r.fluctuation) : opt.t_lo;
    r.t_hi = std::isnan(opt.t_hi) ? std::min(10.0 * r.t_lo, s.times.back()) : opt.t_hi;
    r.fit = growth_exponent(s.times, s.q_max, r.t_lo, r.t_hi);
    r.collapse_frames = decade_frames(s, r.t_lo, r.t_hi);
    try {
        r.collapse = scaling_collapse(s, r.collapse_frames);
    } catch (const Error&) {
        // q / q_max does not reach the window (peak near the grid cutoff, or a single frame)
        r.collapse = {};
        r.collapse.distance = std::numeric_limits<double>::quiet_NaN();
        r.collapse.pair_distance.assign(r.collapse_frames.size(),
                                        std::vector<double>(r.collapse_frames.size(), r.collapse.distance));
    }
    return r;
}

inline void write_analysis(const AnalysisResult& r, const fs::path& out) {
    fs::create_directories(out);
    const auto& s = r.series;
    const bool has_err = !s.S_stderr.empty();
    CsvWriter sf(out / "structure_factor.csv",
                 has_err ? std::vector<std::string>{"t", "q", "S", "S_normalized", "S_stderr"}
                         : std::vector<std::string>{"t", "q", "S", "S_normalized"});
    for (std::size_t f = 0; f < s.frames(); ++f)
        for (std::size_t i = 0; i < s.q.size(); ++i) {
            std::vector<double> row{s.times[f], s.q[i], s.S[f][i], s.S0[f] > 0.0 ? s.S[f][i] / s.S0[f] : 0.0};
            if (has_err) row.push_back(s.S_stderr[f][i]);
            sf.row(row);
        }
    CsvWriter pk(out / "peak.csv", {"t", "q_max", "S_max", "S_max_over_S0", "S0"});
    for (std::size_t f = 0; f < s.frames(); ++f)
        pk.row({s.times[f], s.q_max[f], s.S_max[f], s.S0[f] > 0.0 ? s.S_max[f] / s.S0[f] : 0.0, s.S0[f]});
    CsvWriter gr(out / "growth.csv", {"t_lo", "t_hi", "exponent", "stderr", "points"});
    gr.row({r.t_lo, r.t_hi, r.fit.exponent, r.fit.stderr_, static_cast<double>(r.fit.points)});
    std::vector<std::string> cols{"t"};
    for (std::size_t f : r.collapse_frames) cols.push_back("t=" + CsvWriter::format(s.times[f]));
    CsvWriter cm(out / "collapse.csv", cols);
    for (std::size_t a = 0; a < r.collapse_frames.size(); ++a) {
        std::vector<double> row{s.times[r.collapse_frames[a]]};
        for (std::size_t b = 0; b < r.collapse_frames.size(); ++b) row.push_back(r.collapse.pair_distance[a][b]);
        cm.row(row);
    }
    CsvWriter cd(out / "collapse_distance.csv", {"x_lo", "x_hi", "distance"});
    cd.row({0.5, 3.0, r.collapse.distance});
}

/// Structure-factor series of a run directory plus per-frame fluctuation intensity.
inline std::pair<StructureFactorSeries, std::vector<double>> load_series(const fs::path& run_dir, const AnalyzeOptions& opt) {
    const auto files = list_snapshots(run_dir);
    if (files.size() < 2) throw Error("analyze: need at least two snapshots in '" + run_dir.string() + "'");
    StructureFactorSeries s;
    std::vector<double> fluct;
    GridPtr g;
    std::optional<ShellBins> bins;
    for (const auto& f : files) {
        Snapshot snap = read_snapshot(f, g);
        g = snap.state.grid();
        if (!bins) bins = shell_bins(*g, opt.dq);
        const ShellProfile prof = shell_average(structure_factor(snap.state.phi, opt.subtract_mean), *bins);
        double sum = 0.0;
        for (std::size_t i = 0; i < prof.S.size(); ++i) sum += prof.S[i] * static_cast<double>(prof.count[i]);
        fluct.push_back(sum);
        s.add_frame(snap.header.t, prof);
    }
    return {std::move(s), std::move(fluct)};
}

inline AnalysisResult cmd_analyze(const fs::path& run_dir, const AnalyzeOptions& opt = {}) {
    auto [series, fluct] = load_series(run_dir, opt);
    AnalysisResult r = analyze_series(std::move(series), std::move(fluct), opt);
    write_analysis(r, opt.out ? *opt.out : run_dir / "analysis");
    return r;
}

// ---------------------------------------------------------------------------
// relenergy

inline std::vector<State> load_trajectory(const fs::path& run_dir) {
    std::vector<State> out;
    GridPtr g;
    for (const auto& f : list_snapshots(run_dir)) {
        Snapshot s = read_snapshot(f, g);
        g = s.state.grid();
        out.push_back(std::move(s.state));
    }
    return out;
}

inline RunConfig load_run_config(const fs::path& run_dir) { return parse_config(read_text_file(run_dir / "config.ini")); }

/// Residual totals of z_hat tested against the coefficients of z, from 4th-order time
/// differences; empty when the cadence is not uniform or too short.
inline std::vector<double> trajectory_residuals(const std::vector<State>& z, const std::vector<State>& zh, const ModelParams& p) {
    if (zh.size() < 5) return {};
    const double h = zh[1].t - zh[0].t;
    for (std::size_t i = 1; i < zh.size(); ++i)
        if (std::abs((zh[i].t - zh[i - 1].t) - h) > 1e-9 * std::max(1.0, std::abs(h))) return {};
    const double h_model = h * time_unit(p);
    std::vector<double> out;
    for (std::size_t i = 0; i < zh.size(); ++i) {
        const State dt = time_derivative_fd4(zh, i, h_model);
        ResidualInputs in;
        in.z_hat = &zh[i];
        in.dt_z_hat = &dt;
        in.z_weak = &z[i];
        in.source = CoefficientSource::Weak;
        out.push_back(residuals(in, p).total);
    }
    return out;
}

inline StabilityReport cmd_relenergy(const fs::path& dir_a, const fs::path& dir_b, const std::optional<fs::path>& out = {}) {
    const RunConfig ca = load_run_config(dir_a), cb = load_run_config(dir_b);
    if (params_hash(ca) != params_hash(cb)) throw Error("relenergy: runs use different parameters");
    const ModelParams p = ca.model_params();
    const auto z = load_trajectory(dir_a), zh = load_trajectory(dir_b);
    if (z.size() != zh.size()) throw Error("relenergy: runs hold different numbers of snapshots");
    const StabilityReport rep = stability_report(z, zh, p, trajectory_residuals(z, zh, p));
    const fs::path o = out ? *out : dir_a / "relenergy";
    fs::create_directories(o);
    CsvWriter w(o / "relenergy.csv", {"t", "E_rel", "E_grad", "E_taylor", "E_q", "E_v", "E_C", "E_alpha", "D_rel",
                                      "cumulative_D", "C_hat", "residual_rhs", "residual_ratio"});
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto& r = rep.rows[i];
        auto at = [&](const std::vector<double>& v) { return i < v.size() ? v[i] : std::numeric_limits<double>::quiet_NaN(); };
        w.row({r.t, r.E_rel, r.E_grad, r.E_taylor, r.E_q, r.E_v, r.E_C, r.E_alpha, r.D_rel, rep.cumulative_D[i],
               rep.C_hat[i], at(rep.residual_rhs), at(rep.residual_ratio)});
    }
    write_text_file(o / "verdict.txt", rep.verdict + "\n");
    return rep;
}

// ---------------------------------------------------------------------------
// mms

inline std::vector<MmsRow> cmd_mms(const RunConfig& cfg, const MmsOptions& opt = {}, const std::optional<fs::path>& out = {}) {
    const auto rows = mms_study(cfg.model_params(), cfg.stepper_config(), opt);
    const fs::path o = out ? *out : run_directory(cfg);
    fs::create_directories(o);
    CsvWriter w(o / "mms.csv", {"n", "steps", "dt_model", "error", "order"});
    for (const auto& r : rows) w.row({double(r.n), double(r.steps), r.dt_model, r.error, r.order});
    return rows;
}

// ---------------------------------------------------------------------------
// ensemble

struct EnsembleOptions {
    std::size_t members = 8;
    std::uint64_t master_seed = 1;
    unsigned jobs = 0;  ///< 0: hardware concurrency
    AnalyzeOptions analyze;
    std::ostream* log = nullptr;
};

struct EnsembleResult {
    fs::path dir;
    std::vector<std::uint64_t> seeds;
    std::vector<AnalysisResult> members;
    AnalysisResult average;
};

inline std::string member_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "member_%03zu", i);
    return buf;
}

/// Runs members in <dir>/member_NNN, then analyses each member and the ensemble mean.
inline EnsembleResult cmd_ensemble(const RunConfig& cfg, const EnsembleOptions& opt) {
    if (opt.members < 1) throw Error("ensemble: need at least one member");
    if (cfg.outputs.snapshot_every <= 0) throw Error("ensemble: outputs.snapshot_every must be > 0 for the analysis");
    EnsembleResult res;
    // Absolute, so member directories are not re-rooted under the output root a second time.
    res.dir = fs::absolute(run_directory(cfg));
    fs::create_directories(res.dir);
    std::ostringstream manifest;
    manifest << "# ensemble manifest\nmaster_seed = " << opt.master_seed << "\nmembers = " << opt.members << "\n";
    for (std::size_t i = 0; i < opt.members; ++i) {
        res.seeds.push_back(member_seed(opt.master_seed, i));
        manifest << member_name(i) << " = " << res.seeds.back() << "\n";
    }
    write_text_file(res.dir / "manifest.txt", manifest.str());

    std::vector<RunConfig> configs(opt.members, cfg);
    for (std::size_t i = 0; i < opt.members; ++i) {
        configs[i].ic.rng_seed = res.seeds[i];
        configs[i].outputs.directory = (res.dir / member_name(i)).string();
    }
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    std::exception_ptr failure;
    auto worker = [&] {
        for (std::size_t i = next++; i < opt.members; i = next++) {
            try {
                cmd_run(configs[i]);
                if (opt.log) {
                    std::lock_guard lock(log_mutex);
                    *opt.log << member_name(i) << " done\n";
                }
            } catch (...) {
                std::lock_guard lock(log_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(opt.jobs ? opt.jobs : std::thread::hardware_concurrency(),
                                                          static_cast<unsigned>(opt.members)));
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    std::vector<StructureFactorSeries> all;
    std::vector<double> fluct_mean;
    for (std::size_t i = 0; i < opt.members; ++i) {
        const fs::path d = res.dir / member_name(i);
        auto [series, fluct] = load_series(d, opt.analyze);
        if (fluct_mean.empty()) fluct_mean.assign(fluct.size(), 0.0);
        for (std::size_t f = 0; f < fluct.size() && f < fluct_mean.size(); ++f) fluct_mean[f] += fluct[f] / opt.members;
        AnalysisResult r = analyze_series(series, fluct, opt.analyze);
        write_analysis(r, d / "analysis");
        all.push_back(std::move(series));
        res.members.push_back(std::move(r));
    }
    res.average = analyze_series(ensemble_average(all), fluct_mean, opt.analyze);
    write_analysis(res.average, res.dir / "analysis");
    return res;
}

}  // namespace vpsim
