#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rtbpcl/cli/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Train and verify energy-tilted sequential samplers (RTB, Trust-PCL, REINFORCE with KL)"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> iterations;
    std::string suite;
    std::string env_spec;
    std::optional<std::string> oracle_out;

    auto* train = app.add_subcommand("train", "Train one sampler from a JSON config");
    train->add_option("--config", config_path, "Training config (schema rtbpcl.train_config/1)")->required();
    train->add_option("--out", out_dir, "Output directory")->required();
    train->add_option("--seed", seed, "Overrides the config seed");

    auto* verify = app.add_subcommand("verify", "Run a numerical verification suite");
    verify->add_option("--suite", suite, "equivalence | oracle | gradients | wrong-reward | training | all")
        ->required();

    auto* figure = app.add_subcommand("figure", "Train the four samplers on the 25-mode mixture and dump samples");
    figure->add_option("--out", out_dir, "Output directory")->required();
    figure->add_option("--seed", seed, "Run seed");
    figure->add_option("--iterations", iterations, "Override training iterations for every run");

    auto* oracle = app.add_subcommand("oracle", "Exact oracle tables for tabular environments");
    oracle->require_subcommand(1);
    auto* dump = oracle->add_subcommand("dump", "Write soft values, optimal policy and targets as JSON");
    dump->add_option("--env", env_spec, "Fixture name (t2b3, two-terminal) or tabular env JSON path")
        ->default_val("t2b3");
    dump->add_option("--out", oracle_out, "Output file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    using namespace rtbpcl::cli;
    if (*train) {
        return cmd_train(config_path, out_dir, seed, std::cout, std::cerr);
    }
    if (*verify) {
        return cmd_verify(suite, std::cout, std::cerr);
    }
    if (*figure) {
        return cmd_figure(out_dir, seed, iterations, std::cout, std::cerr);
    }
    if (*dump) {
        std::optional<std::filesystem::path> out_file;
        if (oracle_out) {
            out_file = *oracle_out;
        }
        return cmd_oracle_dump(env_spec, out_file, std::cout, std::cerr);
    }
    return kExitFailure;
}
