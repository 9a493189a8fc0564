// fqr: functional quantile regression for longitudinal data.
//
//   fqr <fit|predict|bootstrap|compare|simulate> --config run.cfg --out DIR
//       [--seed N] [--threads N]
//
// Exit status: 0 success, 1 invalid input or configuration, 2 numerical failure.

#include "fqr/commands.hpp"
#include "fqr/errors.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <optional>

int main(int argc, char** argv) {
    CLI::App app{"Penalized quantile regression with functional covariates and random intercepts"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;

    using Command = std::function<void(const fqr::RunConfig&, const std::filesystem::path&)>;
    const std::map<std::string, std::pair<std::string, Command>> commands{
        {"fit", {"select smoothing and fit; writes fit.json", fqr::cmd_fit}},
        {"predict", {"predict from fit.json; writes predictions.csv", fqr::cmd_predict}},
        {"bootstrap", {"bias-adjusted bootstrap bands; writes bootstrap.csv", fqr::cmd_bootstrap}},
        {"compare", {"fit every model variant; writes compare.csv", fqr::cmd_compare}},
        {"simulate", {"generate a synthetic dataset with known truth", fqr::cmd_simulate}},
    };
    for (const auto& [name, entry] : commands) {
        CLI::App* sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", config_path, "run configuration (key = value)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "random seed (overrides the config)");
        sub->add_option("--threads", threads, "worker threads, 0 = all cores (overrides the config)")
            ->check(CLI::NonNegativeNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        fqr::RunConfig config = fqr::load_run_config(config_path);
        if (seed) config.seed = *seed;
        if (threads) config.threads = *threads;
        for (const auto& [name, entry] : commands) {
            if (app.got_subcommand(name)) entry.second(config, out_dir);
        }
    } catch (const fqr::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
