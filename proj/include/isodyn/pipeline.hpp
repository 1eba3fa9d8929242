#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "isodyn/io.hpp"
#include "isodyn/isotest.hpp"
#include "isodyn/sampler.hpp"
#include "isodyn/synth.hpp"

namespace isodyn {

/// splitmix64 step, used to derive per-purpose seeds from the run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (1 + a) + 0xbf58476d1ce4e5b9ULL * (1 + b);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct FitResult {
    ChainTrace trace;
    std::vector<ParameterSummary> summary;
};

inline FitResult fit(const Dataset& data, const io::RunConfig& cfg, std::uint64_t chain_seed) {
    const PosteriorModel model(data, cfg.prior(), cfg.rgrid(), cfg.egrid(), cfg.hermite_order);
    FitResult r;
    r.trace = run_chain(model, cfg.chain(chain_seed));
    r.summary = summarize(r.trace);
    return r;
}

struct ChainTestResult {
    TestReport report;
    ChainTrace data_trace;
    ChainTrace gen_trace;
    Dataset gen_data;
    std::uint64_t data_chain_seed, null_data_seed, gen_chain_seed;
};

/// fit(D) -> modal state -> null data of size |D| -> fit(D_gen) -> theta* -> support, for chain k.
inline ChainTestResult run_test_chain(const Dataset& data, const io::RunConfig& cfg, int k) {
    const std::uint64_t s_data = derive_seed(cfg.seed, k, 0);
    const std::uint64_t s_null = derive_seed(cfg.seed, k, 1);
    const std::uint64_t s_gen = derive_seed(cfg.seed, k, 2);
    ChainTrace data_trace = fit(data, cfg, s_data).trace;
    Dataset gen_data = generate_null_data(modal_state(data_trace), static_cast<long>(data.size()), cfg.sigma_err, s_null,
                                          cfg.null_scheme);
    ChainTrace gen_trace = fit(gen_data, cfg, s_gen).trace;
    TestReport report = support(data_trace, find_theta_star(gen_trace));
    ChainTestResult r{std::move(report), std::move(data_trace), std::move(gen_trace), std::move(gen_data), s_data, s_null, s_gen};
    return r;
}

namespace cmd {

namespace fs = std::filesystem;

inline io::Json chain_manifest(const io::RunConfig& cfg, const ChainTrace& t, std::uint64_t chain_seed,
                               const std::string& data_hash) {
    io::Json j;
    j["schema_version"] = io::kSchemaVersion;
    j["config_hash"] = io::config_hash(cfg);
    j["config"] = io::config_json(cfg);
    j["rng"] = Rng::kAlgorithm;
    j["chain_seed"] = chain_seed;
    j["data_hash"] = data_hash;
    j["grid"] = io::grid_json(cfg.rgrid(), cfg.egrid());
    j["n_steps"] = cfg.chain(chain_seed).n_steps;
    j["burn_in"] = cfg.chain(chain_seed).burn_in;
    j["t0"] = cfg.chain(chain_seed).t0;
    j["trace_length"] = t.size();
    j["acceptance_rate"] = t.acceptance_rate;
    j["rho_acceptance_rate"] = t.rho_acceptance_rate;
    j["f_acceptance_rate"] = t.f_acceptance_rate;
    return j;
}

inline std::string data_hash(const Dataset& d) { return io::hex64(io::fnv1a64(io::format_dataset(d))); }

/// Writes trace.csv, manifest.json, hpd.csv and modal_state.json into `out`.
inline FitResult fit(const std::string& data_path, const io::RunConfig& cfg, const fs::path& out) {
    const Dataset data = io::read_dataset(data_path);
    fs::create_directories(out);
    const std::uint64_t chain_seed = derive_seed(cfg.seed, 0, 0);
    FitResult r = isodyn::fit(data, cfg, chain_seed);
    const std::string hash = io::config_hash(cfg);
    io::write_file(out / "trace.csv", io::format_trace(r.trace, hash, cfg.rgrid(), cfg.egrid()));
    auto manifest = chain_manifest(cfg, r.trace, chain_seed, data_hash(data));
    manifest["summary"] = io::summary_json(r.summary);
    io::write_file(out / "manifest.json", io::dump(manifest));
    io::write_file(out / "hpd.csv", io::format_summary_csv(r.summary, hash));
    const std::size_t m = modal_index(r.trace);
    io::Json modal{{"schema_version", io::kSchemaVersion}, {"config_hash", hash}, {"log_post", r.trace.log_posts[m]},
                   {"state", io::state_json(r.trace.states[m])}};
    io::write_file(out / "modal_state.json", io::dump(modal));
    return r;
}

enum class Kind { iso, aniso, null };

inline Kind parse_kind(const std::string& s) {
    if (s == "iso") return Kind::iso;
    if (s == "aniso") return Kind::aniso;
    if (s == "null") return Kind::null;
    throw std::invalid_argument("kind must be iso, aniso or null (got '" + s + "')");
}

/// Writes data.csv and data_manifest.json; n <= 0 selects the default size for the kind.
inline Dataset generate(Kind kind, const io::RunConfig& cfg, long n, const std::optional<std::string>& modal_path,
                        const fs::path& out) {
    const std::uint64_t seed = derive_seed(cfg.seed, 100, 0);
    io::Json manifest;
    manifest["schema_version"] = io::kSchemaVersion;
    manifest["config_hash"] = io::config_hash(cfg);
    manifest["seed"] = cfg.seed;
    manifest["generator_seed"] = seed;
    manifest["rng"] = Rng::kAlgorithm;
    Dataset d;
    switch (kind) {
    case Kind::iso:
    case Kind::aniso: {
        const PlummerSpec& spec = cfg.plummer;
        if (n <= 0) n = kind == Kind::iso ? cfg.n_iso : cfg.n_aniso;
        const NoiseSpec noise{cfg.sigma_err};
        d = kind == Kind::iso ? sample_iso(spec, n, noise, seed, cfg.generator_r_max)
                              : sample_aniso(spec, n, noise, seed, cfg.generator_r_max);
        manifest["kind"] = kind == Kind::iso ? "iso" : "aniso";
        manifest["generator"] = {{"m0", spec.m0}, {"rc", spec.rc}, {"sigma", spec.sigma},
                                 {"ra", kind == Kind::iso ? io::Json("inf") : io::Json(spec.ra)},
                                 {"r_max", cfg.generator_r_max}, {"sigma_err", cfg.sigma_err}};
        break;
    }
    case Kind::null: {
        if (!modal_path) throw std::invalid_argument("generate --kind null needs a modal-state file (--modal)");
        const auto j = io::Json::parse(io::read_file(*modal_path));
        const ModelState modal = io::state_from_json(j.at("state"));
        if (n <= 0) n = cfg.n_iso;
        d = generate_null_data(modal, n, cfg.sigma_err, seed, cfg.null_scheme);
        manifest["kind"] = "null";
        manifest["generator"] = {{"modal_state", io::state_json(modal)},
                                 {"scheme", io::detail::scheme_name(cfg.null_scheme)},
                                 {"sigma_err", cfg.sigma_err}};
        break;
    }
    }
    manifest["n"] = d.size();
    manifest["data_hash"] = data_hash(d);
    fs::create_directories(out);
    io::write_file(out / "data.csv", io::format_dataset(d));
    io::write_file(out / "data_manifest.json", io::dump(manifest));
    return d;
}

inline io::Json report_document(const io::RunConfig& cfg, const std::string& dhash,
                                const std::vector<ChainTestResult>& results) {
    io::Json j;
    j["schema_version"] = io::kSchemaVersion;
    j["config_hash"] = io::config_hash(cfg);
    j["data_hash"] = dhash;
    j["rng"] = Rng::kAlgorithm;
    j["n_steps"] = cfg.n_steps;
    io::Json chains = io::Json::array();
    double mean = 0.0;
    for (const auto& r : results) {
        auto c = io::report_json(r.report);
        c["data_chain"] = {{"seed", r.data_chain_seed}, {"trace_length", r.data_trace.size()},
                           {"acceptance_rate", r.data_trace.acceptance_rate}};
        c["gen_chain"] = {{"seed", r.gen_chain_seed}, {"trace_length", r.gen_trace.size()},
                          {"acceptance_rate", r.gen_trace.acceptance_rate}, {"null_data_seed", r.null_data_seed},
                          {"null_data_hash", data_hash(r.gen_data)}};
        chains.push_back(c);
        mean += r.report.support;
    }
    j["chains"] = chains;
    j["mean_support"] = mean / static_cast<double>(results.size());
    return j;
}

/// Full test: per chain writes data/gen traces and the null dataset, then report.json and summary.txt.
inline std::vector<ChainTestResult> test(const std::string& data_path, const io::RunConfig& cfg, const fs::path& out) {
    const Dataset data = io::read_dataset(data_path);
    fs::create_directories(out);
    const std::string hash = io::config_hash(cfg);
    std::vector<ChainTestResult> results;
    for (int k = 0; k < cfg.chains; ++k) {
        auto r = run_test_chain(data, cfg, k);
        const std::string tag = "_" + std::to_string(k + 1);
        io::write_file(out / ("trace_data" + tag + ".csv"), io::format_trace(r.data_trace, hash, cfg.rgrid(), cfg.egrid()));
        io::write_file(out / ("trace_gen" + tag + ".csv"), io::format_trace(r.gen_trace, hash, cfg.rgrid(), cfg.egrid()));
        io::write_file(out / ("null_data" + tag + ".csv"), io::format_dataset(r.gen_data));
        results.push_back(std::move(r));
    }
    io::write_file(out / "report.json", io::dump(report_document(cfg, data_hash(data), results)));
    std::vector<TestReport> reps;
    for (const auto& r : results) reps.push_back(r.report);
    io::write_file(out / "summary.txt", "# config_hash=" + hash + "\n" +
                                            io::support_table(fs::path(data_path).filename().string(), reps));
    return results;
}

struct TraceReport {
    TestReport report;
    std::string config_hash;
};

/// Recomputes a TestReport from a data-chain trace and a null-chain trace; both must share a config hash.
inline TraceReport report(const std::string& data_trace_path, const std::string& gen_trace_path) {
    const auto a = io::read_trace(data_trace_path);
    const auto b = io::read_trace(gen_trace_path);
    if (a.config_hash != b.config_hash)
        throw std::runtime_error("traces were produced under different configs (hash " + a.config_hash + " vs " +
                                 b.config_hash + "); their posteriors are not comparable");
    if (!(a.rgrid == b.rgrid) || !(a.egrid == b.egrid)) throw std::runtime_error("traces use different grids");
    return {support(a.trace, find_theta_star(b.trace)), a.config_hash};
}

}  // namespace cmd

}  // namespace isodyn
