#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tcnn/cli.hpp"
#include "tcnn/error.hpp"

namespace {

tcnn::RunConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
    tcnn::RunConfig config = path.empty() ? tcnn::RunConfig{} : tcnn::RunConfig::load(path);
    if (seed) {
        config.seed = *seed;
    }
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Thermodynamically consistent traction-separation surfaces"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    app.add_option("--config", config_path, "key=value run configuration");
    app.add_option("--seed", seed, "random seed, overrides the config");
    app.add_option("--out", out, "output file (gen-data) or directory");

    std::string data;
    std::string model;
    std::optional<std::int64_t> iterations;

    auto* gen = app.add_subcommand("gen-data", "sample PPR tractions along proportional paths");
    auto* fit = app.add_subcommand("fit-ppr", "Monte-Carlo fit of PPR parameters to a dataset");
    fit->add_option("--data", data, "dataset CSV");
    fit->add_option("--iterations", iterations, "number of random draws");
    auto* trn = app.add_subcommand("train", "train a network with fixed weight factors");
    trn->add_option("--data", data, "dataset CSV");
    auto* opt = app.add_subcommand("optimize", "Bayesian optimization of the weight factors");
    opt->add_option("--data", data, "dataset CSV");
    auto* ana = app.add_subcommand("analyze", "surfaces, violation maps and audit report");
    ana->add_option("--model", model, "model file");
    ana->add_option("--data", data, "dataset CSV");
    auto* exp = app.add_subcommand("export-surface", "traction surfaces of a model on the grid");
    exp->add_option("--model", model, "model file");
    auto* keys = app.add_subcommand("config-keys", "list accepted configuration keys");

    for (auto* sub : {gen, fit, trn, opt, ana, exp}) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*keys) {
            for (const auto& [k, help] : tcnn::config_keys()) {
                std::cout << k << "  " << help << '\n';
            }
            return 0;
        }
        tcnn::RunConfig config = load_config(config_path, seed);
        if (*gen) {
            return tcnn::cmd_gen_data(config, out, std::cout);
        }
        if (*fit) {
            if (iterations) {
                if (*iterations < 1) {
                    throw tcnn::InvalidArgument("--iterations must be positive");
                }
                config.fit_iterations = *iterations;
            }
            return tcnn::cmd_fit_ppr(config, data, out, std::cout, std::cerr);
        }
        if (*trn) {
            return tcnn::cmd_train(config, data, out, std::cout);
        }
        if (*opt) {
            return tcnn::cmd_optimize(config, data, out, std::cout);
        }
        if (*ana) {
            return tcnn::cmd_analyze(config, model, data, out, std::cout);
        }
        if (*exp) {
            return tcnn::cmd_export_surface(config, model, out, std::cout);
        }
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (auto& c : msg) {
            if (c == '\n') {
                c = ' ';
            }
        }
        std::cerr << "error: " << msg << '\n';
        return 1;
    }
    return 1;
}
