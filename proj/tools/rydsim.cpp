#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rydberg/cli.hpp"

int main(int argc, char** argv) {
    namespace cli = rydberg::cli;
    CLI::App app{"rydsim: Rydberg CZ gate, benchmarking and cooling simulator"};
    app.set_version_flag("--version", std::string(cli::kToolVersion));
    app.require_subcommand(1);

    cli::RunOptions opts;
    std::uint64_t seed = 0;
    std::string command;
    const char* help[] = {"optimize the phase profile of the CZ pulse", "global echoed randomized benchmarking",
                          "fidelity over mid-circuit rounds per cooling policy", "sideband spectrum and thermometry",
                          "readout threshold calibration and confusion matrix", "resonant Rabi oscillation curve"};
    for (std::size_t i = 0; i < cli::kCommands.size(); ++i) {
        auto* sub = app.add_subcommand(std::string(cli::kCommands[i]), help[i]);
        sub->add_option("--config", opts.config, "run configuration (INI)")->required();
        sub->add_option("--out", opts.out, "output directory")->required();
        sub->add_option("--seed", seed, "override the master seed");
        sub->add_option("--workers", opts.workers, "worker threads")->check(CLI::PositiveNumber);
        sub->callback([&, i, sub] {
            command = cli::kCommands[i];
            if (sub->count("--seed")) opts.seed = seed;
        });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kConfigError;
    }
    return cli::run(command, opts);
}
