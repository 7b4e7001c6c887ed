#include "esrf/config.hpp"
#include "esrf/error.hpp"
#include "esrf/experiment.hpp"
#include "esrf/parallel.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

int finish(const esrf::RunResult& result, const std::filesystem::path& out) {
    result.outputs.commit(out);
    std::cout << result.summary;
    std::cout << "outputs written to " << out.string() << '\n';
    return result.pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ensemble square root filter experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> out;
    auto* run = app.add_subcommand("run", "Run an experiment described by a config file");
    run->add_option("config", config_path, "key=value config file")->required();
    run->add_option("--seed", seed, "Override the config seed");
    run->add_option("--workers", workers, "Worker threads (default: ESRF_WORKERS or all cores)");
    run->add_option("--out", out, "Output directory");

    int sweeps = 200;
    int dim = 6;
    int members = 20;
    std::optional<std::string> audit_out;
    auto* audit = app.add_subcommand("audit-transforms", "Randomized audit of the analysis transforms");
    audit->add_option("--sweeps", sweeps, "Number of random instances")->check(CLI::PositiveNumber);
    audit->add_option("--dim", dim, "Largest state dimension")->check(CLI::PositiveNumber);
    audit->add_option("--members", members, "Largest ensemble size")->check(CLI::Range(2, 100000));
    audit->add_option("--workers", workers, "Worker threads");
    audit->add_option("--out", audit_out, "Also write the report to this directory");

    app.add_subcommand("version", "Print the library version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand("version")) {
            std::cout << "esrf " << esrf::library_version() << '\n';
            return 0;
        }
        if (app.got_subcommand("run")) {
            esrf::ExperimentConfig cfg = esrf::load_config(config_path);
            if (seed) {
                cfg.seed = *seed;
            }
            if (out) {
                cfg.out = *out;
            }
            const int n = esrf::resolve_workers(workers);
            return finish(esrf::run_experiment(cfg, n), cfg.out);
        }
        esrf::ExperimentConfig cfg;
        cfg.kind = esrf::ExperimentKind::TransformsAudit;
        cfg.sweeps = sweeps;
        cfg.max_dim = dim;
        cfg.members_max = members;
        const auto result = esrf::run_experiment(cfg, esrf::resolve_workers(workers));
        if (audit_out) {
            return finish(result, *audit_out);
        }
        std::cout << result.summary;
        return result.pass ? 0 : 2;
    } catch (const esrf::Error& e) {
        std::cerr << "esrf: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "esrf: unexpected failure: " << e.what() << '\n';
        return 1;
    }
}
