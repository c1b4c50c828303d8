// fluctlab: simulation and verification laboratory for mean-field
// fluctuations on the torus.
//
//   fluctlab <subcommand> [--config PATH] [--seed U64] [--out DIR]
//            [--threads K] [--set section.key=value]...
//
// Subcommands: solve-fp, simulate-particles, simulate-spde, weak-error,
// clt-baseline, modulated-energy, refine, selftest.

#include <CLI11.hpp>
#include <fluctlab/cli.hpp>
#include <fluctlab/cli_selftest.hpp>

int main(int argc, char** argv) {
    CLI::App app{"mean-field fluctuation laboratory on the torus"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::vector<std::string> overrides;
    uint64_t seed = 0;
    bool seed_set = false, out_set = false;
    int threads = 0;
    bool threads_set = false;

    std::vector<std::string> names = {"solve-fp",     "simulate-particles", "simulate-spde",
                                      "weak-error",   "clt-baseline",       "modulated-energy",
                                      "refine",       "selftest"};
    for (const auto& name : names) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "sectioned key = value configuration file");
        sub->add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_option("--out", out_dir, "output directory override")->each([&](const std::string&) {
            out_set = true;
        });
        sub->add_option("--threads", threads, "worker thread cap")->each([&](const std::string&) {
            threads_set = true;
        });
        sub->add_option("--set", overrides, "dotted-path config override, section.key=value");
    }

    CLI11_PARSE(app, argc, argv);
    std::string subcommand = app.get_subcommands().front()->get_name();

    if (seed_set) overrides.push_back("run.master_seed=" + std::to_string(seed));
    if (out_set) overrides.push_back("run.out_dir=" + out_dir);
    if (threads_set) overrides.push_back("run.threads=" + std::to_string(threads));

    fluctlab::cli::RunConfig cfg;
    try {
        cfg = fluctlab::cli::parse_config(config_path, overrides);
    } catch (const fluctlab::validation_error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    return fluctlab::cli::dispatch(subcommand, cfg);
}
