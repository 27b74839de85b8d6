#pragma once

#include "unistrat/market.hpp"
#include "unistrat/strategies.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace unistrat {

// Flat key=value run configuration. Precedence: command-line overrides beat
// file values beat these defaults.
struct RunConfig {
    // Market source.
    std::string market = "cover"; // cover | constant | lognormal | csv
    std::string csv_path;
    int days = 16;       // return days for synthetic generators
    int instruments = 2; // constant / lognormal series count
    std::string mu = "0.05";
    std::string sigma = "0.3";
    std::string ticker; // series driving ma/sr; empty = first

    // Strategy.
    std::string strategy = "crp"; // crp | crpside | ma | sr | ia
    int k = 2;                    // window length (ma/sr/ia)
    std::string alloc;            // ma: step|linear_step|line, sr: step|smoothed|plane
    double margin_alpha = 1.0;
    bool margin_clamp = false; // clamp breaching factors instead of erroring
    std::string side_model = "proportional"; // proportional | onehot
    int side_states = 0;                     // 0 = one state per instrument

    // Run mode.
    std::string mode = "exact"; // fixed | exact | sampled | dynamic
    std::string fixed_w;        // fixed-mode coordinates; empty = uniform
    double grid_delta = 0.05;
    double floor_epsilon = 0.1; // 0 disables the floor transform
    std::string intervals;      // dynamic-mode interval lengths; empty = one interval
    std::uint64_t seed = 0;
    bool has_seed = false; // sampled runs refuse to start without a seed

    // Sampler budget.
    std::uint64_t samples = 10000;
    std::uint64_t burn_in = 100000;
    int chains = 8;
    std::uint64_t thinning = 0;  // 0 = automatic
    double damping_gamma = -1.0; // negative = derived from grid_delta
    double damping_sigma = -1.0;

    // Diagnostics.
    std::size_t tv_cap = 1024;
    double tv_threshold = 0.05;
    int concavity_trials = 10;
    double fd_step = 1e-3;
    bool force_concavity = false;
    double budget_eps = 0.5;
    double budget_nu = 0.1;
    double budget_kappa = 1.0;
    double budget_confidence = 0.1;

    std::string out = "out";
};

// Shortest text that parses back to exactly the same double.
std::string format_double(double v);

// ISO date `offset` days after 2000-01-01.
std::string iso_date_from_day(long offset);

// Applies one key=value pair; unknown keys and malformed values raise
// ConfigError.
void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value);

// key=value lines, # comments, blank lines ignored.
void load_config_file(RunConfig& cfg, const std::string& path);

std::vector<double> parse_double_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);

// Market and strategy resolved from a config: the raw price series, the
// strategy-ready market/snapshot stream, and the strategy itself.
struct PreparedRun {
    std::vector<PriceSeries> prices;
    RunInput input;
    std::unique_ptr<Strategy> strategy;
    std::vector<long> clamped_days;
};

PreparedRun prepare_run(const RunConfig& cfg);

// Subcommand drivers. Each writes its files under cfg.out and prints
// key=value summary lines. Returned value is the process exit code.
int run_backtest(const RunConfig& cfg, std::ostream& summary);
int run_gen_market(const RunConfig& cfg, std::ostream& summary);
int run_diagnose(const RunConfig& cfg, std::ostream& summary);
int run_compare(const RunConfig& cfg, std::ostream& summary);

// Dispatches a subcommand and maps errors to exit codes: configuration
// problems (ConfigError, PartitionError, GridTooLarge, BudgetTooSmall)
// exit 2, data problems exit 3.
int run_command(const std::string& command, const RunConfig& cfg, std::ostream& summary,
                std::ostream& errors);

} // namespace unistrat
