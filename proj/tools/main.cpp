#include "unistrat/cli_core.hpp"
#include "unistrat/errors.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <string>
#include <vector>

namespace {

struct CliValues {
    std::string config;
    std::string seed;
    std::string out;
    std::string mode;
    std::string grid_delta;
    std::string samples;
    std::string burn_in;
    std::string chains;
    std::vector<std::string> sets;
};

void add_options(CLI::App* cmd, CliValues& cli) {
    cmd->add_option("--config", cli.config, "key=value config file");
    cmd->add_option("--seed", cli.seed, "root seed for all randomness");
    cmd->add_option("--out", cli.out, "output directory");
    cmd->add_option("--mode", cli.mode, "fixed|exact|sampled|dynamic");
    cmd->add_option("--grid-delta", cli.grid_delta, "grid spacing over the parameter simplex");
    cmd->add_option("--samples", cli.samples, "kept samples pooled across chains");
    cmd->add_option("--burn-in", cli.burn_in, "burn-in steps per chain");
    cmd->add_option("--chains", cli.chains, "parallel chain count");
    cmd->add_option("--set", cli.sets, "extra key=value override, repeatable, applied last");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"parameterized investment strategies with exact and sampled universalization"};
    app.require_subcommand(1);

    CliValues cli;
    CLI::App* backtest = app.add_subcommand("backtest", "run a strategy and emit ledger files");
    CLI::App* gen = app.add_subcommand("gen-market", "write a synthetic market csv");
    CLI::App* diagnose = app.add_subcommand("diagnose", "sampler and eligibility diagnostics");
    CLI::App* compare = app.add_subcommand("compare", "exact vs sampled descriptions side by side");
    for (CLI::App* cmd : {backtest, gen, diagnose, compare}) add_options(cmd, cli);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    CLI::App* cmd = app.get_subcommands().front();
    unistrat::RunConfig cfg;
    try {
        if (cmd->count("--config")) unistrat::load_config_file(cfg, cli.config);
        if (cmd->count("--seed")) unistrat::apply_kv(cfg, "seed", cli.seed);
        if (cmd->count("--out")) unistrat::apply_kv(cfg, "out", cli.out);
        if (cmd->count("--mode")) unistrat::apply_kv(cfg, "mode", cli.mode);
        if (cmd->count("--grid-delta")) unistrat::apply_kv(cfg, "grid_delta", cli.grid_delta);
        if (cmd->count("--samples")) unistrat::apply_kv(cfg, "samples", cli.samples);
        if (cmd->count("--burn-in")) unistrat::apply_kv(cfg, "burn_in", cli.burn_in);
        if (cmd->count("--chains")) unistrat::apply_kv(cfg, "chains", cli.chains);
        for (const std::string& kv : cli.sets) {
            const std::size_t eq = kv.find('=');
            if (eq == std::string::npos)
                throw unistrat::ConfigError("--set expects key=value, got '" + kv + "'");
            unistrat::apply_kv(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
    } catch (const unistrat::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }

    return unistrat::run_command(cmd->get_name(), cfg, std::cout, std::cerr);
}
