// randpost: run, sweep and verify bound-check experiments.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "randpost/experiment.hpp"

using namespace randpost;

namespace {

void print_summary(const RunManifest& man)
{
    for (const auto& [check, verdict] : man.verdicts) std::cout << check << ": " << verdict << "\n";
    std::cout << "config " << man.config_hash << "\n";
}

ExperimentConfig load(const std::string& path, const std::optional<std::uint64_t>& seed,
                      const std::optional<std::string>& out)
{
    auto cfg = parse_config_file(path);
    if (seed) cfg.master_seed = *seed;
    if (out) cfg.output_dir = *out;
    return cfg;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Hellinger error bounds for randomized misfits and forward models"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    int threads = 1;

    auto* run = app.add_subcommand("run", "run every configured check");
    run->add_option("--config", config_path, "experiment config (JSON)")->required();
    run->add_option("--seed", seed, "override master_seed");
    run->add_option("--out", out, "override output directory");
    run->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

    std::string check_name;
    auto* sw = app.add_subcommand("sweep", "run one check and print its table");
    sw->add_option("--config", config_path, "experiment config (JSON)")->required();
    sw->add_option("--check", check_name, "thm1 | thm2 | corollary | forward")->required();
    sw->add_option("--seed", seed, "override master_seed");
    sw->add_option("--out", out, "override output directory");
    sw->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

    std::string manifest_path;
    auto* verify = app.add_subcommand("verify", "re-check hashes and verdicts of a finished run");
    verify->add_option("manifest", manifest_path, "manifest.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : exit_config;
    }

    try {
        if (*run) {
            const auto cfg = load(config_path, seed, out);
            const auto man = run_experiment(cfg, {threads, std::nullopt});
            print_summary(man);
            return man.exit_code;
        }
        if (*sw) {
            auto cfg = load(config_path, seed, out);
            CheckKind kind;
            try {
                kind = parse_check_kind(check_name);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("--check: ") + e.what());
            }
            if (kind == CheckKind::forward && cfg.family != FamilyKind::perturbed_forward) {
                throw ConfigError("--check: forward needs family.kind = perturbed_forward");
            }
            cfg.checks = {kind};
            const auto man = run_experiment(cfg, {threads, std::vector<CheckKind>{kind}});
            std::ifstream in(cfg.output_dir / (std::string(to_string(kind)) + ".csv"));
            std::cout << in.rdbuf();
            print_summary(man);
            return man.exit_code;
        }
        if (*verify) {
            const auto res = verify_manifest(manifest_path);
            for (const auto& p : res.problems) std::cerr << "verify: " << p << "\n";
            std::cout << (res.ok ? "manifest ok" : "manifest INVALID") << "\n";
            return res.ok ? res.exit_code : exit_fail;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return exit_io;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_fail;
    }
    return exit_pass;
}
