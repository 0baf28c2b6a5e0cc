// vpsim: viscoelastic phase separation simulator.
//
//   vpsim run       -c run.ini [--preset NAME] [--set section.key=value ...] [--resume SNAPSHOT]
//   vpsim analyze   RUN_DIR [--t-lo T] [--t-hi T] [--dq DQ] [--subtract-mean] [--out DIR]
//   vpsim relenergy RUN_DIR_A RUN_DIR_B [--out DIR]
//   vpsim mms       [-c mms.ini] [--grids 32,64,128] [--steps 100,200,400,800] [--t-end T]
//   vpsim ensemble  -c run.ini --members N --master-seed S [--jobs J]
//
// Relative output paths resolve under $VPSIM_OUTPUT_ROOT when it is set.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "vpsim/cli.hpp"

namespace {

struct ConfigFlags {
    std::string file;
    std::string preset;
    std::vector<std::string> sets;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", file, "INI configuration file")->check(CLI::ExistingFile);
        app->add_option("--preset", preset, "preset applied beneath the file (paper-sec4, simple-fluid, mms)");
        app->add_option("--set", sets, "override section.key=value; beats the file")->take_all();
    }

    vpsim::RunConfig build(const std::string& fallback_preset = "") const {
        std::string text = file.empty() ? std::string() : vpsim::read_text_file(file);
        std::vector<std::pair<std::string, std::string>> overrides;
        if (!preset.empty()) overrides.emplace_back("preset", preset);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw vpsim::Error("--set expects section.key=value, got '" + s + "'");
            overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        return vpsim::build_config(text, overrides, fallback_preset);
    }
};

template <class T>
std::vector<T> parse_list(const std::string& s) {
    std::vector<T> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(static_cast<T>(std::stoll(item)));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vpsim: viscoelastic phase separation simulator"};
    app.require_subcommand(1);

    ConfigFlags run_cfg, mms_cfg, ens_cfg;
    std::string resume;
    bool quiet = false;
    auto* run = app.add_subcommand("run", "time-step a configuration and write energy.csv and snapshots");
    run_cfg.attach(run);
    run->add_option("--resume", resume, "continue from this snapshot")->check(CLI::ExistingFile);
    run->add_flag("-q,--quiet", quiet, "no progress output");

    std::string run_dir, analyze_out;
    vpsim::AnalyzeOptions aopt;
    auto* analyze = app.add_subcommand("analyze", "structure factor, peak track, growth exponent and collapse");
    analyze->add_option("run_dir", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);
    analyze->add_option("--t-lo", aopt.t_lo, "fit window start (default: onset)");
    analyze->add_option("--t-hi", aopt.t_hi, "fit window end (default: 10 x start)");
    analyze->add_option("--dq", aopt.dq, "shell width (default 2 pi / L)");
    analyze->add_flag("--subtract-mean", aopt.subtract_mean, "remove the mean before transforming");
    analyze->add_option("--out", analyze_out, "output directory (default RUN_DIR/analysis)");

    std::string dir_a, dir_b, rel_out;
    auto* rel = app.add_subcommand("relenergy", "relative energy and stability report of two runs");
    rel->add_option("run_a", dir_a, "weak-solution run")->required()->check(CLI::ExistingDirectory);
    rel->add_option("run_b", dir_b, "reference run")->required()->check(CLI::ExistingDirectory);
    rel->add_option("--out", rel_out, "output directory (default RUN_A/relenergy)");

    std::string grids = "32,64,128", steps = "100,200,400,800", mms_out;
    double t_end = 0.5;
    auto* mms = app.add_subcommand("mms", "manufactured-solution temporal convergence table");
    mms_cfg.attach(mms);
    mms->add_option("--grids", grids, "comma-separated grid sizes");
    mms->add_option("--steps", steps, "comma-separated step counts");
    mms->add_option("--t-end", t_end, "final model time");
    mms->add_option("--out", mms_out, "output directory (default outputs.directory)");

    vpsim::EnsembleOptions eopt;
    auto* ens = app.add_subcommand("ensemble", "seeded member runs plus ensemble-averaged analysis");
    ens_cfg.attach(ens);
    ens->add_option("--members", eopt.members, "number of members")->check(CLI::PositiveNumber);
    ens->add_option("--master-seed", eopt.master_seed, "master seed expanded per member by SplitMix64");
    ens->add_option("--jobs", eopt.jobs, "worker threads (default: hardware concurrency)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const vpsim::RunConfig cfg = run_cfg.build();
            vpsim::RunOptions opt;
            if (!resume.empty()) opt.resume = resume;
            if (!quiet) opt.log = &std::cerr;
            const auto r = vpsim::cmd_run(cfg, opt);
            std::cout << "wrote " << r.dir.string() << " (" << r.steps << " steps, t=" << r.final_state.t << ")\n";
        } else if (analyze->parsed()) {
            if (!analyze_out.empty()) aopt.out = vpsim::resolve_output(analyze_out);
            const auto r = vpsim::cmd_analyze(run_dir, aopt);
            std::printf("growth exponent %.4f +- %.4f over t in [%g, %g] (%zu points)\n", r.fit.exponent, r.fit.stderr_,
                        r.t_lo, r.t_hi, r.fit.points);
            std::printf("collapse distance %.6g over %zu frames\n", r.collapse.distance, r.collapse_frames.size());
        } else if (rel->parsed()) {
            std::optional<vpsim::fs::path> out;
            if (!rel_out.empty()) out = vpsim::resolve_output(rel_out);
            const auto rep = vpsim::cmd_relenergy(dir_a, dir_b, out);
            std::cout << rep.verdict << "\n";
        } else if (mms->parsed()) {
            const vpsim::RunConfig cfg = mms_cfg.build("mms");
            vpsim::MmsOptions opt;
            opt.grids = parse_list<int>(grids);
            opt.steps = parse_list<long>(steps);
            opt.t_model_end = t_end;
            std::optional<vpsim::fs::path> out;
            if (!mms_out.empty()) out = vpsim::resolve_output(mms_out);
            std::printf("%6s %8s %12s %14s %8s\n", "n", "steps", "dt_model", "error", "order");
            for (const auto& r : vpsim::cmd_mms(cfg, opt, out))
                std::printf("%6d %8ld %12.4g %14.6e %8.4f\n", r.n, r.steps, r.dt_model, r.error, r.order);
        } else if (ens->parsed()) {
            const vpsim::RunConfig cfg = ens_cfg.build();
            eopt.log = &std::cerr;
            const auto r = vpsim::cmd_ensemble(cfg, eopt);
            std::printf("ensemble of %zu in %s\n", r.seeds.size(), r.dir.string().c_str());
            std::printf("growth exponent %.4f +- %.4f, collapse distance %.6g\n", r.average.fit.exponent,
                        r.average.fit.stderr_, r.average.collapse.distance);
        }
    } catch (const std::exception& e) {
        std::cerr << "vpsim: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
