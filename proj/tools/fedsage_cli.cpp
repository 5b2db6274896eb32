#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fedsage/app.hpp"

int main(int argc, char** argv) {
    using namespace fedsage;

    CLI::App cli{"Federated semi-supervised learning simulator with confidence-gap pseudo-label correction"};
    cli.require_subcommand(1);

    std::string log_level = "info";
    std::optional<std::uint64_t> seed;
    cli.add_option("--log-level", log_level, "quiet, info or debug")
        ->check(CLI::IsMember({"quiet", "info", "debug"}));
    cli.add_option("--seed", seed, "Override the seed in the config (sweeps: the base seed)");

    std::string config_path;
    std::string out_path;

    auto* validate = cli.add_subcommand("validate", "Check a config file and print it with defaults filled in");
    validate->add_option("config", config_path, "Experiment config (JSON)")->required();

    auto* run = cli.add_subcommand("run", "Run one experiment and write trace.csv, summary.json, manifest.json");
    run->add_option("config", config_path, "Experiment config (JSON)")->required();
    run->add_option("-o,--out", out_path, "Output directory")->required();

    auto* sweep = cli.add_subcommand("sweep", "Run a strategy x parameter grid and write comparison.csv");
    sweep->add_option("spec", config_path, "Sweep spec (JSON)")->required();
    sweep->add_option("-o,--out", out_path, "Output directory")->required();

    auto* export_cmd = cli.add_subcommand("export-shards", "Write the client partition as line-delimited JSON");
    export_cmd->add_option("config", config_path, "Experiment config (JSON)")->required();
    export_cmd->add_option("-o,--out", out_path, "Output file (.jsonl)")->required();

    CLI11_PARSE(cli, argc, argv);

    app::Options options;
    options.log_level = app::parse_log_level(log_level);
    options.seed_override = seed;

    if (*validate) return app::validate_command(config_path, std::cout, std::cerr);
    if (*run) return app::run_command(config_path, out_path, options, std::cerr);
    if (*sweep) return app::sweep_command(config_path, out_path, options, std::cerr);
    if (*export_cmd) return app::export_shards_command(config_path, out_path, options, std::cerr);
    return 1;
}
