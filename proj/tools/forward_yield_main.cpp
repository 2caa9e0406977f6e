#include "forward_yield/cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    namespace fy = forward_yield::cli;

    CLI::App app{"Forward utilities, marginal-utility yield curves and Davis prices"};
    app.require_subcommand(1);

    fy::RunOptions opts;
    std::uint64_t seed = 0;
    std::size_t paths = 0;
    std::string out_dir;
    std::string format;

    for (const auto& name : fy::subcommands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", opts.config_path, "JSON experiment configuration")
            ->required();
        sub->add_option("--seed", seed, "Override simulation.seed");
        sub->add_option("--paths", paths, "Override simulation.n_paths");
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        sub->callback([&, name, sub] {
            opts.subcommand = name;
            if (sub->count("--seed")) {
                opts.seed = seed;
            }
            if (sub->count("--paths")) {
                opts.paths = paths;
            }
            if (sub->count("--out")) {
                opts.out_dir = out_dir;
            }
            if (sub->count("--format")) {
                opts.format = format;
            }
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    return fy::run(opts, std::cout, std::cerr);
}
