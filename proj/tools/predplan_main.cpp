#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "predplan/experiments.hpp"

namespace {

predplan::Config load_and_resolve(const std::string& path, const std::string& out_override,
                                  const std::string& seed_override) {
    predplan::Config raw = predplan::Config::from_file(path);
    if (!out_override.empty()) raw.set("out", out_override);
    if (!seed_override.empty()) raw.set("seed", seed_override);
    return predplan::resolve_experiment_config(raw);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"predplan: policy learning by backpropagation through predicted futures"};
    app.require_subcommand(1);

    std::string config_path, out_override, seed_override;
    double perturb = 0.0;

    CLI::App* run = app.add_subcommand("run", "run an experiment config end to end");
    run->add_option("config", config_path, "experiment config file")->required();
    run->add_option("--out", out_override, "output directory (overrides config)");
    run->add_option("--seed", seed_override, "root seed (overrides config)");

    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "compare BPTT gradients against finite differences");
    gradcheck->add_option("config", config_path, "experiment config file")->required();
    gradcheck->add_option("--out", out_override, "output directory (overrides config)");
    gradcheck->add_option("--seed", seed_override, "root seed (overrides config)");
    gradcheck->add_option("--perturb-grad", perturb,
                          "self-test aid: corrupt one gradient coordinate by this amount");

    CLI11_PARSE(app, argc, argv);

    try {
        const predplan::Config resolved =
            load_and_resolve(config_path, out_override, seed_override);
        if (run->parsed()) {
            predplan::run_experiment(resolved, std::cout);
            return predplan::kExitOk;
        }
        return predplan::run_gradcheck(resolved, perturb, std::cout);
    } catch (const predplan::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return predplan::kExitConfigError;
    } catch (const predplan::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return predplan::kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
