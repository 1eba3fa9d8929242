#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "isodyn/pipeline.hpp"

using namespace isodyn;

namespace {

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<long> steps;
    std::optional<std::string> out;
    std::optional<int> chains;
};

void add_common(CLI::App* app, CommonOptions& o, bool with_steps) {
    app->add_option("--config", o.config_path, "run configuration file (key = value)");
    app->add_option("--seed", o.seed, "run seed (u64)");
    if (with_steps) app->add_option("--steps", o.steps, "MCMC iterations per chain");
    app->add_option("--out", o.out, "output directory");
}

io::RunConfig resolve(const CommonOptions& o) {
    io::RunConfig c = o.config_path.empty() ? io::parse_config("") : io::read_config(o.config_path);
    if (o.seed) c.seed = *o.seed;
    if (o.steps) c.n_steps = *o.steps;
    if (o.out) c.out = *o.out;
    if (o.chains) c.chains = *o.chains;
    c.validate();
    return c;
}

void print_summary(const std::vector<ParameterSummary>& rows) {
    std::printf("%-8s %14s %14s %14s\n", "param", "mode", "hpd_lo", "hpd_hi");
    for (const auto& r : rows)
        std::printf("%-8s %14.6g %14.6g %14.6g\n", r.name.c_str(), r.mode, r.interval.lo, r.interval.hi);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"isodyn: non-parametric mass and phase-space density inference with an isotropy test"};
    app.require_subcommand(1);

    CommonOptions fit_opt, gen_opt, test_opt;
    std::string fit_data, test_data, kind = "iso", modal_path, data_trace, gen_trace, report_out;
    long n = 0;

    auto* fit = app.add_subcommand("fit", "learn (f, rho) from a dataset CSV");
    fit->add_option("data", fit_data, "dataset CSV")->required();
    add_common(fit, fit_opt, true);

    auto* gen = app.add_subcommand("generate", "write a synthetic or null-hypothesis dataset");
    gen->add_option("--kind", kind, "iso | aniso | null")->check(CLI::IsMember({"iso", "aniso", "null"}));
    gen->add_option("--n", n, "number of tracers (default: n_iso / n_aniso from config)");
    gen->add_option("--modal", modal_path, "modal_state.json from a previous fit (kind=null)");
    add_common(gen, gen_opt, false);

    auto* test = app.add_subcommand("test", "support for isotropy: fit, null data, refit, case count");
    test->add_option("data", test_data, "dataset CSV")->required();
    test->add_option("--chains", test_opt.chains, "independent chain pairs");
    add_common(test, test_opt, true);

    auto* rep = app.add_subcommand("report", "recompute the support from a data trace and a null-data trace");
    rep->add_option("--data-trace", data_trace, "trace CSV of the chain on the observed data")->required();
    rep->add_option("--gen-trace", gen_trace, "trace CSV of the chain on the generated data")->required();
    rep->add_option("--out", report_out, "write the report JSON here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fit) {
            const auto cfg = resolve(fit_opt);
            const auto r = cmd::fit(fit_data, cfg, cfg.out);
            std::printf("acceptance %.4f  trace %zu  config %s\n", r.trace.acceptance_rate, r.trace.size(),
                        io::config_hash(cfg).c_str());
            print_summary(r.summary);
        } else if (*gen) {
            const auto cfg = resolve(gen_opt);
            const auto d = cmd::generate(cmd::parse_kind(kind), cfg, n,
                                         modal_path.empty() ? std::nullopt : std::optional<std::string>(modal_path),
                                         cfg.out);
            std::printf("wrote %zu rows to %s/data.csv\n", d.size(), cfg.out.c_str());
        } else if (*test) {
            const auto cfg = resolve(test_opt);
            const auto rs = cmd::test(test_data, cfg, cfg.out);
            std::printf("%s", io::read_file((std::filesystem::path(cfg.out) / "summary.txt").string()).c_str());
        } else if (*rep) {
            const auto r = cmd::report(data_trace, gen_trace);
            const io::Json j{{"schema_version", io::kSchemaVersion},
                             {"config_hash", r.config_hash},
                             {"report", io::report_json(r.report)}};
            if (!report_out.empty()) io::write_file(report_out, io::dump(j));
            std::printf("%s", io::support_table("trace", {r.report}).c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "isodyn: %s\n", e.what());
        return 1;
    }
    return 0;
}
