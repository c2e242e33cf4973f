#include <exception>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "ft/error.hpp"

namespace {

struct CommonArgs {
    std::string config;
    std::optional<std::string> channels;
    std::optional<long long> seed;
    std::optional<std::string> out;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config, "JSON run configuration")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--channels", args.channels, "EO channel subset")
        ->check(CLI::IsMember({"s2", "s1s2", "ms"}));
    sub->add_option("--seed", args.seed, "override the config seed");
    sub->add_option("--out", args.out, "override the output directory");
}

ft::RunConfig make_config(const CommonArgs& args) {
    ft::RunConfig cfg = ft::RunConfig::load(args.config);
    if (args.channels) cfg.set("channels", *args.channels);
    if (args.seed) cfg.set("seed", *args.seed);
    if (args.out) cfg.set("out_dir", *args.out);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"forest-transfer: deep-learning model transfer for forest height mapping"};
    app.require_subcommand(1);

    struct Command {
        const char* name;
        const char* help;
        void (*fn)(const ft::RunConfig&);
    };
    const Command commands[] = {
        {"synth", "generate the synthetic source/target scene pair", ftcli::cmd_synth},
        {"pretrain", "pretrain the model on the dense-reference source scene", ftcli::cmd_pretrain},
        {"finetune", "fine-tune a pretrained checkpoint on target plots", ftcli::cmd_finetune},
        {"predict", "predict a height map for a scene", ftcli::cmd_predict},
        {"evaluate", "evaluate checkpoints against the target test plots", ftcli::cmd_evaluate},
        {"baseline", "fit and evaluate the kNN and MLR baselines", ftcli::cmd_baseline},
        {"experiment", "run the scenario-by-method comparison grid", ftcli::cmd_experiment},
    };

    CommonArgs args[std::size(commands)];
    std::function<void()> selected;
    for (std::size_t i = 0; i < std::size(commands); ++i) {
        CLI::App* sub = app.add_subcommand(commands[i].name, commands[i].help);
        add_common(sub, args[i]);
        sub->callback([&, i] { selected = [&, i] { commands[i].fn(make_config(args[i])); }; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        selected();
    } catch (const ft::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const ft::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const ft::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
