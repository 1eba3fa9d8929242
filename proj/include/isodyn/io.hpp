#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "isodyn/isotest.hpp"
#include "isodyn/sampler.hpp"
#include "isodyn/synth.hpp"

namespace isodyn::io {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kDataHeader = "x1_kpc,x2_kpc,v3_kms,sigma_err_kms";

using Json = nlohmann::ordered_json;

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Shortest-safe lossless decimal form of a double.
inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

inline double parse_double(const std::string& text, const std::string& where) {
    const std::string t = trim(text);
    if (t.empty()) throw FormatError(where + ": empty number");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v))
        throw FormatError(where + ": '" + t + "' is not a finite number");
    return v;
}

inline long parse_long(const std::string& text, const std::string& where) {
    const std::string t = trim(text);
    char* end = nullptr;
    errno = 0;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE)
        throw FormatError(where + ": '" + t + "' is not an integer");
    return v;
}

inline std::uint64_t parse_u64(const std::string& text, const std::string& where) {
    const std::string t = trim(text);
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
    if (t.empty() || t[0] == '-' || end != t.c_str() + t.size() || errno == ERANGE)
        throw FormatError(where + ": '" + t + "' is not an unsigned integer");
    return v;
}

// ---------------------------------------------------------------- datasets

inline Dataset parse_dataset(const std::string& text, const std::string& name = "data") {
    std::istringstream in(text);
    std::string line;
    long lineno = 0;
    bool header = false;
    Dataset d;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) continue;
        const std::string where = name + ":" + std::to_string(lineno);
        if (!header) {
            if (t != kDataHeader) throw FormatError(where + ": expected header '" + kDataHeader + "'");
            header = true;
            continue;
        }
        const auto cols = split(t, ',');
        if (cols.size() != 4) throw FormatError(where + ": expected 4 columns, found " + std::to_string(cols.size()));
        ParticleDatum p{parse_double(cols[0], where), parse_double(cols[1], where), parse_double(cols[2], where),
                        parse_double(cols[3], where)};
        if (p.sigma_err < 0.0) throw FormatError(where + ": negative sigma_err");
        d.push_back(p);
    }
    if (!header) throw FormatError(name + ": empty file (missing header)");
    if (d.empty()) throw FormatError(name + ": no data rows");
    return d;
}

inline Dataset read_dataset(const std::string& path) { return parse_dataset(read_file(path), path); }

inline std::string format_dataset(const Dataset& d) {
    std::string s = std::string(kDataHeader) + "\n";
    for (const auto& p : d) s += fmt(p.x1) + "," + fmt(p.x2) + "," + fmt(p.v3) + "," + fmt(p.sigma_err) + "\n";
    return s;
}

// ---------------------------------------------------------------- config

/// Everything a run depends on. The file form is `key = value` lines.
struct RunConfig {
    double delta = 25.0 / 19.0;
    int n_x = 19;
    int n_e = 9;
    double prior_lo_factor = 1e-5;
    double prior_hi_factor = 1e2;
    long n_steps = 20000;
    long t0 = -1;      // -1: n_steps / 10
    long burn_in = -1; // -1: n_steps / 4
    UpdateSchedule schedule = UpdateSchedule::alternate;
    double scale_multiplier = 0.0;
    double initial_rho_fraction = 0.05;
    double initial_f_sd = 0.05;
    double floor_fraction = 1e-12;
    int hermite_order = kDefaultHermiteOrder;
    SeedProfile seed_profile;
    double sigma_err = 20.0;
    PlummerSpec plummer{4.0e11, 8.0, 220.0, 4.0};
    double generator_r_max = 25.0;
    NullScheme null_scheme = NullScheme::density_of_states;
    long n_iso = 270;
    long n_aniso = 54;
    int chains = 1;
    std::uint64_t seed = 1;
    std::string out = "out";

    RadialGrid rgrid() const { return {delta, n_x}; }
    EnergyGrid egrid() const { return EnergyGrid(n_e); }

    ChainConfig chain(std::uint64_t chain_seed) const {
        ChainConfig c = ChainConfig::with_steps(n_steps, chain_seed);
        if (t0 >= 0) c.t0 = t0;
        if (burn_in >= 0) c.burn_in = burn_in;
        c.seed_profile = seed_profile;
        c.schedule = schedule;
        c.scale_multiplier = scale_multiplier;
        c.initial_rho_fraction = initial_rho_fraction;
        c.initial_f_sd = initial_f_sd;
        c.floor_fraction = floor_fraction;
        return c;
    }

    PriorSpec prior() const {
        const auto seed_rho = isodyn::seed_profile(seed_profile, rgrid());
        return PriorSpec::around(seed_rho.values(), prior_lo_factor, prior_hi_factor);
    }

    void validate() const {
        (void)rgrid();
        (void)egrid();
        if (!(prior_lo_factor >= 0.0 && prior_lo_factor < 1.0 && prior_hi_factor > 1.0))
            throw std::invalid_argument("config: need 0 <= prior_lo_factor < 1 < prior_hi_factor");
        chain(seed).validate();
        plummer.validate();
        if (!(sigma_err >= 0.0)) throw std::invalid_argument("config: sigma_err must be >= 0");
        if (!(generator_r_max > 0.0 && generator_r_max <= delta * n_x * (1 + 1e-12)))
            throw std::invalid_argument("config: generator_r_max must lie in (0, n_x * delta]");
        if (n_iso < 1 || n_aniso < 1) throw std::invalid_argument("config: sample sizes must be positive");
        if (chains < 1) throw std::invalid_argument("config: chains must be >= 1");
        if (hermite_order < 1) throw std::invalid_argument("config: hermite_order must be >= 1");
    }
};

namespace detail {

inline std::string schedule_name(UpdateSchedule s) { return s == UpdateSchedule::joint ? "joint" : "alternate"; }
inline std::string form_name(FSeedForm f) { return f == FSeedForm::power ? "power" : "exp"; }
inline std::string scheme_name(NullScheme s) { return s == NullScheme::literal ? "literal" : "density_of_states"; }
inline std::string auto_or(long v) { return v < 0 ? "auto" : std::to_string(v); }

/// Canonical key order; `seed` and `out` are last and left out of the hash.
inline std::vector<std::pair<std::string, std::string>> entries(const RunConfig& c) {
    return {
        {"delta", fmt(c.delta)},
        {"n_x", std::to_string(c.n_x)},
        {"n_e", std::to_string(c.n_e)},
        {"prior_lo_factor", fmt(c.prior_lo_factor)},
        {"prior_hi_factor", fmt(c.prior_hi_factor)},
        {"n_steps", std::to_string(c.n_steps)},
        {"t0", auto_or(c.t0)},
        {"burn_in", auto_or(c.burn_in)},
        {"schedule", schedule_name(c.schedule)},
        {"scale_multiplier", fmt(c.scale_multiplier)},
        {"initial_rho_fraction", fmt(c.initial_rho_fraction)},
        {"initial_f_sd", fmt(c.initial_f_sd)},
        {"floor_fraction", fmt(c.floor_fraction)},
        {"hermite_order", std::to_string(c.hermite_order)},
        {"seed_rho0", fmt(c.seed_profile.rho0)},
        {"seed_rc", fmt(c.seed_profile.rc)},
        {"seed_alpha1", fmt(c.seed_profile.alpha1)},
        {"seed_alpha2", fmt(c.seed_profile.alpha2)},
        {"seed_f_form", form_name(c.seed_profile.f_form)},
        {"seed_beta", fmt(c.seed_profile.beta)},
        {"sigma_err", fmt(c.sigma_err)},
        {"plummer_m0", fmt(c.plummer.m0)},
        {"plummer_rc", fmt(c.plummer.rc)},
        {"plummer_sigma", fmt(c.plummer.sigma)},
        {"plummer_ra", fmt(c.plummer.ra)},
        {"generator_r_max", fmt(c.generator_r_max)},
        {"null_scheme", scheme_name(c.null_scheme)},
        {"n_iso", std::to_string(c.n_iso)},
        {"n_aniso", std::to_string(c.n_aniso)},
        {"chains", std::to_string(c.chains)},
        {"seed", std::to_string(c.seed)},
        {"out", c.out},
    };
}

inline long auto_long(const std::string& v, const std::string& where) {
    return trim(v) == "auto" ? -1 : parse_long(v, where);
}

}  // namespace detail

inline std::string format_config(const RunConfig& c) {
    std::string s;
    for (const auto& [k, v] : detail::entries(c)) s += k + " = " + v + "\n";
    return s;
}

/// Canonical entries without the output directory.
inline Json config_json(const RunConfig& c) {
    Json j;
    for (const auto& [k, v] : detail::entries(c))
        if (k != "out") j[k] = v;
    return j;
}

/// FNV-1a over the canonical form without `seed` and `out`.
inline std::string config_hash(const RunConfig& c) {
    std::string s;
    for (const auto& [k, v] : detail::entries(c))
        if (k != "seed" && k != "out") s += k + " = " + v + "\n";
    return hex64(fnv1a64(s));
}

inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value, const std::string& where) {
    const std::string v = trim(value);
    auto d = [&] { return parse_double(v, where); };
    auto l = [&] { return parse_long(v, where); };
    if (key == "delta") c.delta = d();
    else if (key == "n_x") c.n_x = static_cast<int>(l());
    else if (key == "n_e") c.n_e = static_cast<int>(l());
    else if (key == "prior_lo_factor") c.prior_lo_factor = d();
    else if (key == "prior_hi_factor") c.prior_hi_factor = d();
    else if (key == "n_steps") c.n_steps = l();
    else if (key == "t0") c.t0 = detail::auto_long(v, where);
    else if (key == "burn_in") c.burn_in = detail::auto_long(v, where);
    else if (key == "schedule") {
        if (v == "alternate") c.schedule = UpdateSchedule::alternate;
        else if (v == "joint") c.schedule = UpdateSchedule::joint;
        else throw FormatError(where + ": schedule must be 'alternate' or 'joint'");
    }
    else if (key == "scale_multiplier") c.scale_multiplier = d();
    else if (key == "initial_rho_fraction") c.initial_rho_fraction = d();
    else if (key == "initial_f_sd") c.initial_f_sd = d();
    else if (key == "floor_fraction") c.floor_fraction = d();
    else if (key == "hermite_order") c.hermite_order = static_cast<int>(l());
    else if (key == "seed_preset") c.seed_profile = seed_preset(v);
    else if (key == "seed_rho0") c.seed_profile.rho0 = d();
    else if (key == "seed_rc") c.seed_profile.rc = d();
    else if (key == "seed_alpha1") c.seed_profile.alpha1 = d();
    else if (key == "seed_alpha2") c.seed_profile.alpha2 = d();
    else if (key == "seed_f_form") {
        if (v == "exp") c.seed_profile.f_form = FSeedForm::exponential;
        else if (v == "power") c.seed_profile.f_form = FSeedForm::power;
        else throw FormatError(where + ": seed_f_form must be 'exp' or 'power'");
    }
    else if (key == "seed_beta") c.seed_profile.beta = d();
    else if (key == "sigma_err") c.sigma_err = d();
    else if (key == "plummer_m0") c.plummer.m0 = d();
    else if (key == "plummer_rc") c.plummer.rc = d();
    else if (key == "plummer_sigma") c.plummer.sigma = d();
    else if (key == "plummer_ra") c.plummer.ra = v == "inf" ? std::numeric_limits<double>::infinity() : d();
    else if (key == "generator_r_max") c.generator_r_max = d();
    else if (key == "null_scheme") {
        if (v == "density_of_states") c.null_scheme = NullScheme::density_of_states;
        else if (v == "literal") c.null_scheme = NullScheme::literal;
        else throw FormatError(where + ": null_scheme must be 'density_of_states' or 'literal'");
    }
    else if (key == "n_iso") c.n_iso = l();
    else if (key == "n_aniso") c.n_aniso = l();
    else if (key == "chains") c.chains = static_cast<int>(l());
    else if (key == "seed") c.seed = parse_u64(v, where);
    else if (key == "out") c.out = v;
    else throw FormatError(where + ": unknown key '" + key + "'");
}

/// Parses `key = value` lines; '#' starts a comment. Later keys override earlier ones.
inline RunConfig parse_config(const std::string& text, const std::string& name = "config") {
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string t = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (t.empty()) continue;
        const std::string where = name + ":" + std::to_string(lineno);
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw FormatError(where + ": expected 'key = value'");
        set_config_value(c, trim(t.substr(0, eq)), t.substr(eq + 1), where);
    }
    c.validate();
    return c;
}

inline RunConfig read_config(const std::string& path) { return parse_config(read_file(path), path); }

// ---------------------------------------------------------------- traces

inline std::string format_trace(const ChainTrace& t, const std::string& hash, const RadialGrid& rg, const EnergyGrid& eg) {
    std::string s = "# config_hash=" + hash + " rng=" + Rng::kAlgorithm + " delta=" + fmt(rg.delta()) +
                    " n_x=" + std::to_string(rg.n_x()) + " n_e=" + std::to_string(eg.n_e()) + "\n";
    s += "step,log_post";
    for (int j = 1; j <= eg.n_e(); ++j) s += ",f_" + std::to_string(j);
    for (int h = 1; h <= rg.n_x(); ++h) s += ",rho_" + std::to_string(h);
    s += "\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
        s += std::to_string(t.steps[i]) + "," + fmt(t.log_posts[i]);
        for (double f : t.states[i].f.values()) s += "," + fmt(f);
        for (double r : t.states[i].rho.values()) s += "," + fmt(r);
        s += "\n";
    }
    return s;
}

struct LoadedTrace {
    ChainTrace trace;
    std::string config_hash;
    RadialGrid rgrid{1.0, 1};
    EnergyGrid egrid{1};
};

inline LoadedTrace parse_trace(const std::string& text, const std::string& name = "trace") {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw FormatError(name + ":1: missing metadata line");
    std::map<std::string, std::string> meta;
    for (const auto& tok : split(line.substr(2), ' ')) {
        const auto eq = tok.find('=');
        if (eq != std::string::npos) meta[tok.substr(0, eq)] = trim(tok.substr(eq + 1));
    }
    for (const char* k : {"config_hash", "rng", "delta", "n_x", "n_e"})
        if (!meta.count(k)) throw FormatError(name + ":1: metadata lacks '" + k + "'");
    if (meta["rng"] != Rng::kAlgorithm) throw FormatError(name + ":1: unsupported rng '" + meta["rng"] + "'");
    LoadedTrace out{{}, meta["config_hash"], RadialGrid(parse_double(meta["delta"], name + ":1"),
                                                        static_cast<int>(parse_long(meta["n_x"], name + ":1"))),
                    EnergyGrid(static_cast<int>(parse_long(meta["n_e"], name + ":1")))};
    const int ne = out.egrid.n_e(), nx = out.rgrid.n_x();
    if (!std::getline(in, line)) throw FormatError(name + ":2: missing column header");
    long lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const std::string where = name + ":" + std::to_string(lineno);
        const auto cols = split(trim(line), ',');
        if (static_cast<int>(cols.size()) != 2 + ne + nx) throw FormatError(where + ": wrong column count");
        std::vector<double> f, rho;
        for (int j = 0; j < ne; ++j) f.push_back(parse_double(cols[2 + j], where));
        for (int h = 0; h < nx; ++h) rho.push_back(parse_double(cols[2 + ne + h], where));
        try {
            out.trace.states.emplace_back(PhaseDensityVector(f), MassDensityVector(rho), out.rgrid, out.egrid);
        } catch (const std::invalid_argument& e) {
            throw FormatError(where + ": " + e.what());
        }
        out.trace.steps.push_back(parse_long(cols[0], where));
        out.trace.log_posts.push_back(parse_double(cols[1], where));
    }
    return out;
}

inline LoadedTrace read_trace(const std::string& path) { return parse_trace(read_file(path), path); }

// ---------------------------------------------------------------- JSON

inline Json state_json(const ModelState& s) {
    Json j;
    j["delta"] = s.rgrid.delta();
    j["n_x"] = s.rgrid.n_x();
    j["n_e"] = s.egrid.n_e();
    j["f"] = std::vector<double>(s.f.values().begin(), s.f.values().end());
    j["rho"] = std::vector<double>(s.rho.values().begin(), s.rho.values().end());
    return j;
}

inline ModelState state_from_json(const Json& j) {
    try {
        return ModelState(PhaseDensityVector(j.at("f").get<std::vector<double>>()),
                          MassDensityVector(j.at("rho").get<std::vector<double>>()),
                          RadialGrid(j.at("delta").get<double>(), j.at("n_x").get<int>()),
                          EnergyGrid(j.at("n_e").get<int>()));
    } catch (const Json::exception& e) {
        throw FormatError(std::string("model state: ") + e.what());
    }
}

inline Json grid_json(const RadialGrid& rg, const EnergyGrid& eg) {
    return Json{{"delta", rg.delta()}, {"n_x", rg.n_x()}, {"n_e", eg.n_e()}, {"r_max", rg.r_max()}};
}

inline Json summary_json(const std::vector<ParameterSummary>& rows) {
    Json a = Json::array();
    for (const auto& r : rows)
        a.push_back({{"name", r.name}, {"mode", r.mode}, {"hpd_lo", r.interval.lo}, {"hpd_hi", r.interval.hi},
                     {"mass", r.interval.mass}});
    return a;
}

inline std::string format_summary_csv(const std::vector<ParameterSummary>& rows, const std::string& config_hash = "") {
    std::string s = config_hash.empty() ? "" : "# config_hash=" + config_hash + "\n";
    s += "parameter,mode,hpd_lo,hpd_hi\n";
    for (const auto& r : rows) s += r.name + "," + fmt(r.mode) + "," + fmt(r.interval.lo) + "," + fmt(r.interval.hi) + "\n";
    return s;
}

inline Json report_json(const TestReport& r) {
    return Json{{"theta_star", state_json(r.theta_star)},
                {"log_post_star", r.log_post_star},
                {"a_count", r.a_count},
                {"b_count", r.b_count},
                {"support", r.support}};
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

/// Plain-text table with one row per chain plus the mean.
inline std::string support_table(const std::string& dataset, const std::vector<TestReport>& reports) {
    std::string s;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-16s %-6s %10s %10s %16s %8s\n", "dataset", "chain", "A", "B", "log_post_star",
                  "support");
    s += buf;
    double mean = 0.0;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        std::snprintf(buf, sizeof buf, "%-16s %-6zu %10zu %10zu %16.4f %8.4f\n", dataset.c_str(), i + 1, r.a_count,
                      r.b_count, r.log_post_star, r.support);
        s += buf;
        mean += r.support;
    }
    std::snprintf(buf, sizeof buf, "%-16s %-6s %10s %10s %16s %8.4f\n", dataset.c_str(), "mean", "", "", "",
                  mean / static_cast<double>(reports.size()));
    s += buf;
    return s;
}

}  // namespace isodyn::io
