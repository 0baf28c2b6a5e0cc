#pragma once

// Run configuration (INI text), presets, binary snapshots, CSV writers and seed expansion.
//
// Config precedence, lowest to highest: built-in defaults, preset, file keys, command-line
// overrides. A preset named anywhere in the file is applied before any other file key.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vpsim/dynamics.hpp"
#include "vpsim/physics.hpp"
#include "vpsim/state.hpp"

namespace vpsim {

namespace fs = std::filesystem;

inline constexpr const char* kOutputRootEnv = "VPSIM_OUTPUT_ROOT";

struct GridConfig {
    int nx = 64, ny = 64;
    double lx = 64.0, ly = 64.0;
    bool operator==(const GridConfig&) const = default;
};

struct OutputConfig {
    std::string directory = "run";
    long energy_every = 100;
    long snapshot_every = 0;
    bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
    std::string preset;
    GridConfig grid;
    ModelParams params;
    bool phi_star_auto = true;  ///< phi_star follows ic.phi_mean
    InitialCondition ic;
    StepperConfig stepper;
    OutputConfig outputs;

    /// Parameters with phi_star resolved.
    ModelParams model_params() const {
        ModelParams p = params;
        if (phi_star_auto) p.phi_star = ic.phi_mean;
        return p;
    }

    /// Stepper config carrying the output cadences.
    StepperConfig stepper_config() const {
        StepperConfig c = stepper;
        c.output_every = outputs.energy_every;
        c.snapshot_every = outputs.snapshot_every;
        return c;
    }

    GridPtr make_grid() const { return vpsim::make_grid(grid.nx, grid.ny, grid.lx, grid.ly); }

    long total_steps() const { return std::max(0L, static_cast<long>(std::llround(stepper.t_end / stepper.dt))); }
};

// ---------------------------------------------------------------------------
// Scalar text conversion

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

/// Shortest text that parses back to the identical double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "auto";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::optional<double> parse_double(const std::string& s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

template <class Int>
std::optional<Int> parse_int(const std::string& s) {
    Int v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<bool> parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    return std::nullopt;
}

/// Thrown by setters; the parser adds the key name and line.
struct ValueError {
    std::string what;
};

inline double want_double(const std::string& s) {
    if (auto v = parse_double(s)) return *v;
    throw ValueError{"expected a finite number, got '" + s + "'"};
}
inline double want_double_or_auto(const std::string& s) {
    return s == "auto" ? std::numeric_limits<double>::quiet_NaN() : want_double(s);
}
inline long want_long(const std::string& s) {
    if (auto v = parse_int<long>(s)) return *v;
    throw ValueError{"expected an integer, got '" + s + "'"};
}
inline std::uint64_t want_u64(const std::string& s) {
    if (auto v = parse_int<std::uint64_t>(s)) return *v;
    throw ValueError{"expected a nonnegative integer, got '" + s + "'"};
}
inline bool want_bool(const std::string& s) {
    if (auto v = parse_bool(s)) return *v;
    throw ValueError{"expected true or false, got '" + s + "'"};
}

template <class E>
struct EnumNames {
    std::vector<std::pair<E, const char*>> names;
    std::string to_string(E e) const {
        for (auto& [k, n] : names)
            if (k == e) return n;
        return "?";
    }
    E parse(const std::string& s) const {
        std::string allowed;
        for (auto& [k, n] : names) {
            if (s == n) return k;
            allowed += (allowed.empty() ? "" : ", ") + std::string(n);
        }
        throw ValueError{"expected one of {" + allowed + "}, got '" + s + "'"};
    }
};

inline const EnumNames<Potential> kPotentialNames{{{Potential::FloryHuggins, "flory-huggins"},
                                                   {Potential::GinzburgLandau, "ginzburg-landau"}}};
inline const EnumNames<MobilityKind> kMobilityNames{{{MobilityKind::Degenerate, "degenerate"}, {MobilityKind::Constant, "constant"}}};
inline const EnumNames<RelaxationKind> kRelaxationNames{
    {{RelaxationKind::InverseSquare, "inverse-square"}, {RelaxationKind::Constant, "constant"}}};
inline const EnumNames<AsymmetryKind> kAsymmetryNames{{{AsymmetryKind::Tanh, "tanh"}, {AsymmetryKind::Constant, "constant"}}};
inline const EnumNames<BulkModulusKind> kBulkNames{{{BulkModulusKind::Trace, "trace"}, {BulkModulusKind::Constant, "constant"}}};

}  // namespace detail

// ---------------------------------------------------------------------------
// Key registry

struct ConfigKey {
    std::string name;  ///< section.key
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
    bool dynamics = false;  ///< part of the snapshot parameter hash
};

namespace detail {

template <class Get>
ConfigKey dbl(std::string name, Get ref, bool dynamics, bool allow_auto = false) {
    return {std::move(name), [ref](const RunConfig& c) { return format_double(ref(const_cast<RunConfig&>(c))); },
            [ref, allow_auto](RunConfig& c, const std::string& s) {
                ref(c) = allow_auto ? want_double_or_auto(s) : want_double(s);
            },
            dynamics};
}

template <class Get>
ConfigKey boolean(std::string name, Get ref, bool dynamics) {
    return {std::move(name), [ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); },
            [ref](RunConfig& c, const std::string& s) { ref(c) = want_bool(s); }, dynamics};
}

template <class E, class Get>
ConfigKey enumeration(std::string name, const EnumNames<E>& names, Get ref) {
    return {std::move(name), [&names, ref](const RunConfig& c) { return names.to_string(ref(const_cast<RunConfig&>(c))); },
            [&names, ref](RunConfig& c, const std::string& s) { ref(c) = names.parse(s); }, true};
}

}  // namespace detail

inline const std::vector<ConfigKey>& config_keys() {
    using namespace detail;
#define VP_REF(expr) [](RunConfig& c) -> auto& { return c.expr; }
    static const std::vector<ConfigKey> keys = {
        {"grid.nx", [](const RunConfig& c) { return std::to_string(c.grid.nx); },
         [](RunConfig& c, const std::string& s) { c.grid.nx = static_cast<int>(want_long(s)); }, true},
        {"grid.ny", [](const RunConfig& c) { return std::to_string(c.grid.ny); },
         [](RunConfig& c, const std::string& s) { c.grid.ny = static_cast<int>(want_long(s)); }, true},
        dbl("grid.lx", VP_REF(grid.lx), true),
        dbl("grid.ly", VP_REF(grid.ly), true),

        dbl("params.c0", VP_REF(params.c0), true),
        dbl("params.eps1", VP_REF(params.eps1), true),
        dbl("params.eps2", VP_REF(params.eps2), true),
        dbl("params.alpha", VP_REF(params.alpha), true, true),
        dbl("params.chi", VP_REF(params.chi), true),
        enumeration("params.potential", kPotentialNames, VP_REF(params.potential)),
        {"params.phi_star",
         [](const RunConfig& c) { return c.phi_star_auto ? std::string("auto") : format_double(c.params.phi_star); },
         [](RunConfig& c, const std::string& s) {
             c.phi_star_auto = s == "auto";
             if (!c.phi_star_auto) c.params.phi_star = want_double(s);
         },
         true},
        dbl("params.a_steepness", VP_REF(params.a_steepness), true),
        boolean("params.simple_fluid", VP_REF(params.simple_fluid), true),
        enumeration("params.mobility", kMobilityNames, VP_REF(params.mobility)),
        dbl("params.mobility_const", VP_REF(params.mobility_const), true),
        enumeration("params.h1_kind", kRelaxationNames, VP_REF(params.h1_kind)),
        dbl("params.h1_scale", VP_REF(params.h1_scale), true),
        dbl("params.h1_const", VP_REF(params.h1_const), true),
        enumeration("params.h2_kind", kRelaxationNames, VP_REF(params.h2_kind)),
        dbl("params.h2_scale", VP_REF(params.h2_scale), true),
        dbl("params.h2_const", VP_REF(params.h2_const), true),
        enumeration("params.a_kind", kAsymmetryNames, VP_REF(params.a_kind)),
        dbl("params.a_const", VP_REF(params.a_const), true),
        dbl("params.eta0", VP_REF(params.eta0), true),
        dbl("params.eta2", VP_REF(params.eta2), true),
        enumeration("params.b_kind", kBulkNames, VP_REF(params.b_kind)),
        dbl("params.delta_phi", VP_REF(params.delta_phi), true),

        dbl("ic.phi_mean", VP_REF(ic.phi_mean), false),
        dbl("ic.phi_noise_amplitude", VP_REF(ic.phi_noise_amplitude), false),
        {"ic.rng_seed", [](const RunConfig& c) { return std::to_string(c.ic.rng_seed); },
         [](RunConfig& c, const std::string& s) { c.ic.rng_seed = want_u64(s); }, false},

        dbl("stepper.dt", VP_REF(stepper.dt), true),
        dbl("stepper.stabilization_s", VP_REF(stepper.stabilization_s), true, true),
        dbl("stepper.nbar2", VP_REF(stepper.nbar2), true, true),
        dbl("stepper.etabar", VP_REF(stepper.etabar), true, true),
        dbl("stepper.t_end", VP_REF(stepper.t_end), false),
        boolean("stepper.dealias", VP_REF(stepper.dealias), true),
        boolean("stepper.spd_floor", VP_REF(stepper.spd_floor), true),
        dbl("stepper.spd_floor_value", VP_REF(stepper.spd_floor_value), true),
        boolean("stepper.simple_fluid_evolve_q", VP_REF(stepper.simple_fluid_evolve_q), true),

        {"outputs.directory", [](const RunConfig& c) { return c.outputs.directory; },
         [](RunConfig& c, const std::string& s) {
             if (s.empty()) throw ValueError{"must not be empty"};
             c.outputs.directory = s;
         },
         false},
        {"outputs.energy_every", [](const RunConfig& c) { return std::to_string(c.outputs.energy_every); },
         [](RunConfig& c, const std::string& s) { c.outputs.energy_every = want_long(s); }, false},
        {"outputs.snapshot_every", [](const RunConfig& c) { return std::to_string(c.outputs.snapshot_every); },
         [](RunConfig& c, const std::string& s) { c.outputs.snapshot_every = want_long(s); }, false},
    };
#undef VP_REF
    return keys;
}

inline const ConfigKey* find_key(const std::string& name) {
    for (const auto& k : config_keys())
        if (k.name == name) return &k;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Presets

inline std::vector<std::string> preset_names() { return {"paper-sec4", "simple-fluid", "mms"}; }

/// Applies a named preset on top of `c`.
inline void apply_preset(RunConfig& c, const std::string& name) {
    if (name == "paper-sec4") {
        // FH with chi = 28/11, n^2 = phi^2(1 - phi^2), h1 = 1/(50 phi^2), h2 = 1/(10 phi^2),
        // eta = 2 + phi^2, B = trC, c0 = 1, eps1 = 0, eps2 = 1e-2, Omega = [0, 128]^2.
        RunConfig d;
        d.preset = name;
        d.grid = {128, 128, 128.0, 128.0};
        d.ic = {0.5, 0.01, 1};
        d.stepper.dt = 0.1;
        d.stepper.t_end = 409.6;
        d.outputs = {"paper-sec4", 16, 512};
        c = d;
    } else if (name == "simple-fluid") {
        apply_preset(c, "paper-sec4");
        c.preset = name;
        c.params.simple_fluid = true;
        c.grid = {256, 256, 128.0, 128.0};
        c.stepper.dt = 0.5;
        c.stepper.t_end = 6000.0;
        c.outputs = {"simple-fluid", 20, 200};
    } else if (name == "mms") {
        RunConfig d;
        d.preset = name;
        d.grid = {32, 32, 2.0 * pi, 2.0 * pi};
        d.params.eps1 = 0.1;
        d.params.a_steepness = 1.0;
        d.ic = {0.5, 0.0, 1};
        d.stepper.t_end = 1.0;
        d.outputs = {"mms", 1, 0};
        c = d;
    } else {
        std::string all;
        for (const auto& n : preset_names()) all += (all.empty() ? "" : ", ") + n;
        throw Error("unknown preset '" + name + "' (known: " + all + ")");
    }
}

// ---------------------------------------------------------------------------
// Parsing and emission

struct ConfigEntry {
    std::string key, value;
    int line = 0;  ///< 0 for command-line overrides
};

namespace detail {

inline std::string where(const ConfigEntry& e) {
    return e.line > 0 ? "line " + std::to_string(e.line) + ": " : "override: ";
}

inline std::vector<ConfigEntry> tokenize(const std::string& text) {
    std::vector<ConfigEntry> out;
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find_first_of("#;");
        const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw Error("config line " + std::to_string(line) + ": unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw Error("config line " + std::to_string(line) + ": expected key = value, got '" + s + "'");
        const std::string k = trim(s.substr(0, eq));
        out.push_back({section.empty() ? k : section + "." + k, trim(s.substr(eq + 1)), line});
    }
    return out;
}

/// Validation mapped back to the entry that set the offending key.
inline void validate(const RunConfig& c, const std::map<std::string, ConfigEntry>& origin) {
    auto fail = [&](const std::string& key, const std::string& msg) {
        auto it = origin.find(key);
        throw Error("config: " + (it != origin.end() ? where(it->second) : std::string()) + "key '" + key + "': " + msg);
    };
    for (auto [key, n] : {std::pair{"grid.nx", c.grid.nx}, {"grid.ny", c.grid.ny}})
        if (n < 8 || n % 2 != 0) fail(key, "must be even and >= 8, got " + std::to_string(n));
    if (!(c.grid.lx > 0.0)) fail("grid.lx", "must be > 0");
    if (!(c.grid.ly > 0.0)) fail("grid.ly", "must be > 0");
    const ModelParams& p = c.params;
    if (!(p.c0 > 0.0)) fail("params.c0", "must be > 0");
    if (!(p.eps1 >= 0.0)) fail("params.eps1", "must be >= 0");
    if (!(p.eps2 > 0.0)) fail("params.eps2", "must be > 0");
    if (!std::isnan(p.alpha) && !(p.alpha >= 0.0)) fail("params.alpha", "must be >= 0 or auto");
    if (!c.phi_star_auto && !(p.phi_star > 0.0 && p.phi_star < 1.0)) fail("params.phi_star", "must lie in (0, 1)");
    if (!(p.a_steepness >= 0.0)) fail("params.a_steepness", "must be >= 0");
    if (!(p.mobility_const > 0.0)) fail("params.mobility_const", "must be > 0");
    if (!(p.h1_scale > 0.0)) fail("params.h1_scale", "must be > 0");
    if (!(p.h2_scale > 0.0)) fail("params.h2_scale", "must be > 0");
    if (!(p.h1_const >= 0.0)) fail("params.h1_const", "must be >= 0");
    if (!(p.h2_const >= 0.0)) fail("params.h2_const", "must be >= 0");
    if (!(p.eta0 > 0.0)) fail("params.eta0", "must be > 0");
    if (!(p.eta2 >= 0.0)) fail("params.eta2", "must be >= 0");
    if (!(p.delta_phi > 0.0 && p.delta_phi < 0.1)) fail("params.delta_phi", "must lie in (0, 0.1)");
    if (!(c.ic.phi_mean > 0.0 && c.ic.phi_mean < 1.0)) fail("ic.phi_mean", "must lie in (0, 1)");
    if (!(c.ic.phi_noise_amplitude >= 0.0) ||
        c.ic.phi_noise_amplitude >= std::min(c.ic.phi_mean, 1.0 - c.ic.phi_mean))
        fail("ic.phi_noise_amplitude", "must lie in [0, min(phi_mean, 1 - phi_mean))");
    if (!(c.stepper.dt > 0.0)) fail("stepper.dt", "must be > 0");
    if (!std::isnan(c.stepper.stabilization_s) && !(c.stepper.stabilization_s >= 0.0))
        fail("stepper.stabilization_s", "must be >= 0 or auto");
    if (!std::isnan(c.stepper.nbar2) && !(c.stepper.nbar2 > 0.0)) fail("stepper.nbar2", "must be > 0 or auto");
    if (!std::isnan(c.stepper.etabar) && !(c.stepper.etabar > 0.0)) fail("stepper.etabar", "must be > 0 or auto");
    if (!(c.stepper.t_end >= 0.0)) fail("stepper.t_end", "must be >= 0");
    if (!(c.stepper.spd_floor_value > 0.0)) fail("stepper.spd_floor_value", "must be > 0");
    if (c.outputs.energy_every < 1) fail("outputs.energy_every", "must be >= 1");
    if (c.outputs.snapshot_every < 0) fail("outputs.snapshot_every", "must be >= 0");
}

}  // namespace detail

/// Builds a validated config from file text plus overrides ("section.key", "value").
/// `default_preset` applies when neither the text nor the overrides name one.
inline RunConfig build_config(const std::string& text, const std::vector<std::pair<std::string, std::string>>& overrides = {},
                              const std::string& default_preset = "") {
    std::vector<ConfigEntry> entries = detail::tokenize(text);
    for (const auto& [k, v] : overrides) entries.push_back({k, v, 0});

    // The highest-precedence preset wins and is applied first.
    RunConfig c;
    std::map<std::string, ConfigEntry> origin;
    const ConfigEntry* preset = nullptr;
    for (const auto& e : entries)
        if (e.key == "preset") preset = &e;
    const ConfigEntry fallback{"preset", default_preset, 0};
    if (!preset && !default_preset.empty()) preset = &fallback;
    if (preset) {
        try {
            apply_preset(c, preset->value);
        } catch (const Error& err) {
            throw Error("config: " + detail::where(*preset) + "key 'preset': " + err.what());
        }
    }
    for (const auto& e : entries) {
        if (e.key == "preset") continue;
        const ConfigKey* k = find_key(e.key);
        if (!k) throw Error("config: " + detail::where(e) + "unknown key '" + e.key + "'");
        try {
            k->set(c, e.value);
        } catch (const detail::ValueError& err) {
            throw Error("config: " + detail::where(e) + "key '" + e.key + "': " + err.what);
        }
        origin[e.key] = e;
    }
    detail::validate(c, origin);
    return c;
}

inline RunConfig parse_config(const std::string& text) { return build_config(text); }

/// Canonical text: every key, fixed order, values that parse back bit-identically.
inline std::string emit_config(const RunConfig& c) {
    std::ostringstream out;
    if (!c.preset.empty()) out << "preset = " << c.preset << "\n";
    std::string section;
    for (const auto& k : config_keys()) {
        const auto dot = k.name.find('.');
        const std::string sec = k.name.substr(0, dot);
        if (sec != section) {
            out << "\n[" << sec << "]\n";
            section = sec;
        }
        out << k.name.substr(dot + 1) << " = " << k.get(c) << "\n";
    }
    return out.str();
}

inline bool same_config(const RunConfig& a, const RunConfig& b) {
    if (a.preset != b.preset) return false;
    for (const auto& k : config_keys())
        if (k.get(a) != k.get(b)) return false;
    return true;
}

inline std::string read_text_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open '" + p.string() + "' for reading");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_text_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot open '" + p.string() + "' for writing");
    out << text;
    if (!out) throw Error("write failed for '" + p.string() + "'");
}

// ---------------------------------------------------------------------------
// Hashing and seeds

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Hash of every key that changes the dynamics (grid, params, stepper numerics).
inline std::uint64_t params_hash(const RunConfig& c) {
    std::string s;
    for (const auto& k : config_keys())
        if (k.dynamics) {
            s += k.name;
            s += '=';
            s += k.name == "params.phi_star" ? detail::format_double(c.model_params().phi_star) : k.get(c);
            s += '\n';
        }
    return fnv1a64(s);
}

inline std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of ensemble member i: SplitMix64 output number i + 1 of a generator started at `master`.
/// Depends only on (master, i), so any worker count reproduces the same ensemble.
inline std::uint64_t member_seed(std::uint64_t master, std::uint64_t i) {
    return splitmix64_mix(master + (i + 1) * 0x9e3779b97f4a7c15ULL);
}

// ---------------------------------------------------------------------------
// Snapshots
//
// Little-endian layout:
//   char[8]  magic "VPSIMSNP"
//   u32      format version (1)
//   u32      nx, u32 ny
//   f64      lx, ly, t
//   i64      step
//   u64      params hash
//   u64      rng seed, u64 rng draws consumed
//   u32      field count (7), u32 reserved (0)
//   f64[nx*ny] x 7: phi, q, vx, vy, c11, c12, c22; index j*nx + i

inline constexpr char kSnapshotMagic[8] = {'V', 'P', 'S', 'I', 'M', 'S', 'N', 'P'};
inline constexpr std::uint32_t kSnapshotVersion = 1;
inline constexpr std::size_t kSnapshotHeaderBytes = 8 + 4 * 3 + 8 * 3 + 8 * 4 + 4 * 2;

struct SnapshotHeader {
    std::uint32_t version = kSnapshotVersion;
    int nx = 0, ny = 0;
    double lx = 0.0, ly = 0.0, t = 0.0;
    std::int64_t step = 0;
    std::uint64_t params_hash = 0;
    std::uint64_t rng_seed = 0, rng_draws = 0;
};

struct Snapshot {
    SnapshotHeader header;
    State state;
};

namespace detail {

template <class T>
void put_le(std::string& buf, T v) {
    std::uint64_t u = 0;
    std::memcpy(&u, &v, sizeof(T));
    for (std::size_t b = 0; b < sizeof(T); ++b) buf.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
}

template <class T>
T get_le(const std::string& buf, std::size_t& pos) {
    if (pos + sizeof(T) > buf.size()) throw Error("snapshot: truncated file");
    std::uint64_t u = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) u |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + b])) << (8 * b);
    pos += sizeof(T);
    T v;
    std::memcpy(&v, &u, sizeof(T));
    return v;
}

}  // namespace detail

inline std::string encode_snapshot(const State& s, const SnapshotHeader& h) {
    const Grid2D& g = *s.grid();
    std::string buf;
    buf.reserve(kSnapshotHeaderBytes + 7 * 8 * g.size());
    buf.append(kSnapshotMagic, 8);
    detail::put_le<std::uint32_t>(buf, kSnapshotVersion);
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(g.nx));
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(g.ny));
    detail::put_le<double>(buf, g.lx);
    detail::put_le<double>(buf, g.ly);
    detail::put_le<double>(buf, s.t);
    detail::put_le<std::int64_t>(buf, h.step);
    detail::put_le<std::uint64_t>(buf, h.params_hash);
    detail::put_le<std::uint64_t>(buf, h.rng_seed);
    detail::put_le<std::uint64_t>(buf, h.rng_draws);
    detail::put_le<std::uint32_t>(buf, 7);
    detail::put_le<std::uint32_t>(buf, 0);
    for (const ScalarField* f : {&s.phi, &s.q, &s.v.x, &s.v.y, &s.C.c11, &s.C.c12, &s.C.c22})
        for (double v : f->data) detail::put_le<double>(buf, v);
    return buf;
}

/// `grid` is reused when its layout matches the header, otherwise a new grid is built.
inline Snapshot decode_snapshot(const std::string& buf, GridPtr grid = nullptr) {
    if (buf.size() < kSnapshotHeaderBytes || std::memcmp(buf.data(), kSnapshotMagic, 8) != 0)
        throw Error("snapshot: bad magic, not a vpsim snapshot");
    std::size_t pos = 8;
    Snapshot out;
    SnapshotHeader& h = out.header;
    h.version = detail::get_le<std::uint32_t>(buf, pos);
    if (h.version != kSnapshotVersion) throw Error("snapshot: unsupported format version " + std::to_string(h.version));
    h.nx = static_cast<int>(detail::get_le<std::uint32_t>(buf, pos));
    h.ny = static_cast<int>(detail::get_le<std::uint32_t>(buf, pos));
    h.lx = detail::get_le<double>(buf, pos);
    h.ly = detail::get_le<double>(buf, pos);
    h.t = detail::get_le<double>(buf, pos);
    h.step = detail::get_le<std::int64_t>(buf, pos);
    h.params_hash = detail::get_le<std::uint64_t>(buf, pos);
    h.rng_seed = detail::get_le<std::uint64_t>(buf, pos);
    h.rng_draws = detail::get_le<std::uint64_t>(buf, pos);
    const auto fields = detail::get_le<std::uint32_t>(buf, pos);
    detail::get_le<std::uint32_t>(buf, pos);
    if (fields != 7) throw Error("snapshot: expected 7 fields, header says " + std::to_string(fields));
    const std::size_t n = static_cast<std::size_t>(h.nx) * static_cast<std::size_t>(h.ny);
    if (buf.size() != kSnapshotHeaderBytes + 7 * 8 * n)
        throw Error("snapshot: size " + std::to_string(buf.size()) + " does not match a " + std::to_string(h.nx) + "x" +
                    std::to_string(h.ny) + " grid");
    if (!grid || grid->nx != h.nx || grid->ny != h.ny || grid->lx != h.lx || grid->ly != h.ly)
        grid = make_grid(h.nx, h.ny, h.lx, h.ly);
    State& s = out.state;
    s.t = h.t;
    s.phi = ScalarField(grid);
    s.q = ScalarField(grid);
    s.v = VectorField(grid);
    s.C = ConformationField(grid);
    for (ScalarField* f : {&s.phi, &s.q, &s.v.x, &s.v.y, &s.C.c11, &s.C.c12, &s.C.c22})
        for (double& v : f->data) v = detail::get_le<double>(buf, pos);
    return out;
}

inline void write_snapshot(const fs::path& p, const State& s, const SnapshotHeader& h) {
    write_text_file(p, encode_snapshot(s, h));
}

inline Snapshot read_snapshot(const fs::path& p, GridPtr grid = nullptr) {
    try {
        return decode_snapshot(read_text_file(p), std::move(grid));
    } catch (const Error& e) {
        throw Error(p.string() + ": " + e.what());
    }
}

inline std::string snapshot_name(long step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "step_%010ld.bin", step);
    return buf;
}

/// Snapshot files of a run directory ordered by step.
inline std::vector<fs::path> list_snapshots(const fs::path& run_dir) {
    const fs::path dir = run_dir / "snapshots";
    if (!fs::is_directory(dir)) throw Error("no snapshots directory in '" + run_dir.string() + "'");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".bin") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Output locations and CSV

/// Relative paths resolve under $VPSIM_OUTPUT_ROOT when it is set.
inline fs::path resolve_output(const fs::path& p) {
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / p;
    return p;
}

class CsvWriter {
public:
    CsvWriter(const fs::path& p, const std::vector<std::string>& columns, bool append = false)
        : out_(p, append ? std::ios::app : std::ios::trunc), width_(columns.size()) {
        if (!out_) throw Error("cannot open '" + p.string() + "' for writing");
        if (!append) row_strings(columns);
    }

    void row(const std::vector<double>& values) {
        std::vector<std::string> s;
        s.reserve(values.size());
        for (double v : values) s.push_back(format(v));
        row_strings(s);
    }

    void row_strings(const std::vector<std::string>& values) {
        if (values.size() != width_) throw Error("csv: row width mismatch");
        for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << values[i];
        out_ << '\n';
        out_.flush();
    }

    static std::string format(double v) {
        if (std::isnan(v)) return "nan";
        char buf[64];
        const auto r = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, r.ptr);
    }

private:
    std::ofstream out_;
    std::size_t width_;
};

/// Parsed CSV with a header row; every cell numeric.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw Error("csv: no column '" + name + "'");
    }
    std::vector<double> values(const std::string& name) const {
        const std::size_t c = column(name);
        std::vector<double> out;
        for (const auto& r : rows) out.push_back(r.at(c));
        return out;
    }
};

inline CsvTable read_csv(const fs::path& p) {
    std::istringstream in(read_text_file(p));
    CsvTable t;
    std::string line;
    auto split = [](const std::string& l) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream s(l);
        while (std::getline(s, cell, ',')) cells.push_back(detail::trim(cell));
        return cells;
    };
    if (!std::getline(in, line)) throw Error("csv: empty file '" + p.string() + "'");
    t.columns = split(line);
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        std::vector<double> r;
        for (const auto& c : split(line)) {
            if (c == "nan") {
                r.push_back(std::numeric_limits<double>::quiet_NaN());
            } else if (auto v = detail::parse_double(c)) {
                r.push_back(*v);
            } else {
                throw Error("csv: non-numeric cell '" + c + "' in '" + p.string() + "'");
            }
        }
        t.rows.push_back(std::move(r));
    }
    return t;
}

}  // namespace vpsim
