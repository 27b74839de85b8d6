#include "unistrat/cli_core.hpp"

#include "unistrat/errors.hpp"
#include "unistrat/sampler.hpp"
#include "unistrat/simplex_geom.hpp"
#include "unistrat/universalizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace unistrat {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_double(const std::string& value, const std::string& key) {
    const std::string v = trim(value);
    std::size_t pos = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("bad number for " + key + ": '" + value + "'");
    }
    if (pos != v.size() || v.empty())
        throw ConfigError("bad number for " + key + ": '" + value + "'");
    return out;
}

long long parse_int(const std::string& value, const std::string& key) {
    const std::string v = trim(value);
    std::size_t pos = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("bad integer for " + key + ": '" + value + "'");
    }
    if (pos != v.size() || v.empty())
        throw ConfigError("bad integer for " + key + ": '" + value + "'");
    return out;
}

std::uint64_t parse_uint(const std::string& value, const std::string& key) {
    const long long out = parse_int(value, key);
    if (out < 0) throw ConfigError(key + " must be nonnegative, got '" + value + "'");
    return static_cast<std::uint64_t>(out);
}

bool parse_bool(const std::string& value, const std::string& key) {
    const std::string v = trim(value);
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError(key + " must be 0/1/true/false, got '" + value + "'");
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

std::filesystem::path output_dir(const RunConfig& cfg) {
    if (cfg.out.empty()) throw ConfigError("out directory must not be empty");
    std::filesystem::path dir(cfg.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + cfg.out + ": " + ec.message());
    return dir;
}

void check_common(const RunConfig& cfg) {
    static const std::set<std::string> markets{"cover", "constant", "lognormal", "csv"};
    static const std::set<std::string> strategies{"crp", "crpside", "ma", "sr", "ia"};
    static const std::set<std::string> modes{"fixed", "exact", "sampled", "dynamic"};
    static const std::set<std::string> side_models{"proportional", "onehot"};
    if (!markets.count(cfg.market)) throw ConfigError("unknown market: " + cfg.market);
    if (!strategies.count(cfg.strategy)) throw ConfigError("unknown strategy: " + cfg.strategy);
    if (!modes.count(cfg.mode)) throw ConfigError("unknown mode: " + cfg.mode);
    if (!side_models.count(cfg.side_model))
        throw ConfigError("unknown side_model: " + cfg.side_model);
    if (cfg.market == "csv" && cfg.csv_path.empty())
        throw ConfigError("market=csv requires csv_path");
    if (cfg.days < 1) throw ConfigError("days must be >= 1");
    if (cfg.instruments < 1) throw ConfigError("instruments must be >= 1");
    if (cfg.k < 1) throw ConfigError("k must be >= 1");
    if (!(cfg.grid_delta > 0.0 && cfg.grid_delta <= 1.0))
        throw ConfigError("grid_delta must lie in (0,1]");
    if (!(cfg.floor_epsilon >= 0.0 && cfg.floor_epsilon < 1.0))
        throw ConfigError("floor_epsilon must lie in [0,1)");
    if (!(cfg.margin_alpha > 0.0 && cfg.margin_alpha <= 1.0))
        throw ConfigError("margin_alpha must lie in (0,1]");
    if (cfg.chains < 1) throw ConfigError("chains must be >= 1");
    if (cfg.samples < 1) throw ConfigError("samples must be >= 1");
    if (cfg.side_states < 0) throw ConfigError("side_states must be >= 0");
    if (cfg.concavity_trials < 1) throw ConfigError("concavity_trials must be >= 1");
    if (!(cfg.fd_step > 0.0)) throw ConfigError("fd_step must be positive");
    if (!(cfg.tv_threshold >= 0.0)) throw ConfigError("tv_threshold must be nonnegative");
}

void require_seed(const RunConfig& cfg, const std::string& why) {
    if (!cfg.has_seed) throw ConfigError("seed is mandatory for " + why);
}

Eigen::VectorXd broadcast_param(const std::string& text, int m, const std::string& key) {
    const std::vector<double> values = parse_double_list(text);
    if (values.empty()) throw ConfigError(key + " must not be empty");
    Eigen::VectorXd out(m);
    if (values.size() == 1) {
        out.setConstant(values[0]);
    } else if (values.size() == static_cast<std::size_t>(m)) {
        for (int i = 0; i < m; ++i) out[i] = values[static_cast<std::size_t>(i)];
    } else {
        throw ConfigError(key + " needs 1 or " + std::to_string(m) + " values");
    }
    return out;
}

std::vector<PriceSeries> build_prices(const RunConfig& cfg) {
    std::vector<PriceSeries> prices;
    if (cfg.market == "csv") return ingest_csv(cfg.csv_path);
    if (cfg.market == "cover") {
        PriceSeries hold{"hold", std::vector<double>(static_cast<std::size_t>(cfg.days) + 1, 1.0)};
        PriceSeries swing{"swing", {1.0}};
        for (int t = 0; t < cfg.days; ++t)
            swing.prices.push_back(swing.prices.back() * (t % 2 == 0 ? 2.0 : 0.5));
        prices.push_back(std::move(hold));
        prices.push_back(std::move(swing));
        return prices;
    }
    if (cfg.market == "constant") {
        for (int i = 0; i < cfg.instruments; ++i)
            prices.push_back({"const" + std::to_string(i + 1),
                              std::vector<double>(static_cast<std::size_t>(cfg.days) + 1, 1.0)});
        return prices;
    }
    // iid lognormal factors compounded from price 1.
    const Eigen::VectorXd mu = broadcast_param(cfg.mu, cfg.instruments, "mu");
    const Eigen::VectorXd sigma = broadcast_param(cfg.sigma, cfg.instruments, "sigma");
    const MarketSeries market = lognormal_market(mu, sigma, cfg.days, cfg.seed);
    for (int i = 0; i < cfg.instruments; ++i) {
        PriceSeries s{"ln" + std::to_string(i + 1), {1.0}};
        for (const Eigen::VectorXd& x : market.returns) s.prices.push_back(s.prices.back() * x[i]);
        prices.push_back(std::move(s));
    }
    return prices;
}

MarketSeries market_from_prices(const std::vector<PriceSeries>& prices) {
    if (prices.empty()) throw DataError("no price series");
    const std::size_t len = prices[0].prices.size();
    if (len < 2) throw InsufficientHistory("need at least two price rows");
    MarketSeries out;
    out.m = static_cast<int>(prices.size());
    for (const PriceSeries& s : prices) {
        if (s.prices.size() != len) throw DimensionMismatch("price series lengths differ");
        out.labels.push_back(s.ticker);
    }
    for (std::size_t t = 0; t + 1 < len; ++t) {
        Eigen::VectorXd r(out.m);
        for (int i = 0; i < out.m; ++i) {
            const std::vector<double>& p = prices[static_cast<std::size_t>(i)].prices;
            r[i] = p[t + 1] / p[t];
        }
        out.returns.push_back(std::move(r));
    }
    return out;
}

const PriceSeries& pick_series(const std::vector<PriceSeries>& prices, const std::string& ticker) {
    if (ticker.empty()) return prices.front();
    for (const PriceSeries& s : prices)
        if (s.ticker == ticker) return s;
    throw ConfigError("ticker '" + ticker + "' not in market");
}

MaAlloc parse_ma_alloc(const std::string& name) {
    if (name.empty() || name == "line") return MaAlloc::line;
    if (name == "step") return MaAlloc::step;
    if (name == "linear_step") return MaAlloc::linear_step;
    throw ConfigError("ma alloc must be step|linear_step|line, got '" + name + "'");
}

SrAlloc parse_sr_alloc(const std::string& name) {
    if (name.empty() || name == "plane") return SrAlloc::plane;
    if (name == "step") return SrAlloc::step;
    if (name == "smoothed") return SrAlloc::smoothed;
    throw ConfigError("sr alloc must be step|smoothed|plane, got '" + name + "'");
}

ParamPoint resolve_fixed_point(const RunConfig& cfg, const ParamSpace& space) {
    Eigen::VectorXd coords(space.dim());
    if (cfg.fixed_w.empty()) {
        coords.setConstant(1.0 / static_cast<double>(space.k));
    } else {
        const std::vector<double> values = parse_double_list(cfg.fixed_w);
        if (values.size() != static_cast<std::size_t>(space.dim()))
            throw ConfigError("fixed_w needs " + std::to_string(space.dim()) + " values, got " +
                              std::to_string(values.size()));
        for (Eigen::Index i = 0; i < coords.size(); ++i)
            coords[i] = values[static_cast<std::size_t>(i)];
    }
    const ParamPoint w{coords, space.k, space.ell};
    if (!in_param_space(w))
        throw ConfigError("fixed_w must put each " + std::to_string(space.k) +
                          "-block on the simplex");
    return w;
}

void write_ledger_file(const std::filesystem::path& path, const WealthLedger& ledger,
                       std::span<const double> best_log, std::span<const double> regret) {
    std::ofstream out = open_output(path);
    out << "day,universal_return,universal_wealth_log,best_wealth_log,regret\n";
    for (std::size_t t = 0; t < ledger.days(); ++t)
        out << t << ',' << format_double(ledger.daily_factor[t]) << ','
            << format_double(ledger.log_wealth[t]) << ',' << format_double(best_log[t]) << ','
            << format_double(regret[t]) << '\n';
}

void write_diagnostics_file(const std::filesystem::path& path,
                            const std::vector<ChainDiag>& diags) {
    const bool with_tv =
        std::any_of(diags.begin(), diags.end(), [](const ChainDiag& d) { return d.has_tv; });
    std::ofstream out = open_output(path);
    out << "day,chain,acceptance_rate,ess";
    if (with_tv) out << ",tv_exact";
    out << '\n';
    for (const ChainDiag& d : diags) {
        out << d.day << ',' << d.chain << ',' << format_double(d.acceptance_rate) << ','
            << format_double(d.ess);
        if (with_tv) out << ',' << format_double(d.tv_exact);
        out << '\n';
    }
}

void write_market_csv(const std::filesystem::path& path,
                      const std::vector<PriceSeries>& prices) {
    std::ofstream out = open_output(path);
    out << "date";
    for (const PriceSeries& s : prices) out << ',' << s.ticker;
    out << '\n';
    const std::size_t rows = prices.front().prices.size();
    for (std::size_t r = 0; r < rows; ++r) {
        out << iso_date_from_day(static_cast<long>(r));
        for (const PriceSeries& s : prices) out << ',' << format_double(s.prices[r]);
        out << '\n';
    }
}

SamplerBudget budget_from(const RunConfig& cfg) {
    SamplerBudget budget;
    budget.n_samples = cfg.samples;
    budget.burn_in = cfg.burn_in;
    budget.chains = cfg.chains;
    budget.thinning = cfg.thinning;
    budget.confidence = cfg.budget_confidence;
    return budget;
}

std::optional<DampingSpec> damping_from(const RunConfig& cfg) {
    if (cfg.damping_gamma < 0.0 && cfg.damping_sigma < 0.0) return std::nullopt;
    DampingSpec spec = default_damping(cfg.grid_delta);
    if (cfg.damping_sigma >= 0.0) spec.sigma = cfg.damping_sigma;
    if (cfg.damping_gamma >= 0.0) spec.gamma = cfg.damping_gamma;
    return spec;
}

DynamicSchedule resolve_schedule(const RunConfig& cfg, std::size_t days) {
    if (cfg.intervals.empty())
        return DynamicSchedule::from_lengths({static_cast<int>(days)});
    const DynamicSchedule schedule = DynamicSchedule::from_lengths(parse_int_list(cfg.intervals));
    validate_schedule(schedule, days);
    return schedule;
}

} // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

std::string iso_date_from_day(long offset) {
    // Proleptic Gregorian from a day serial (2000-01-01 = 10957 since epoch).
    long z = 10957 + offset + 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    long y = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    y += (m <= 2);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04ld-%02u-%02u", y, m, d);
    return buf;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ','))
        out.push_back(parse_double(item, "list entry"));
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ','))
        out.push_back(static_cast<int>(parse_int(item, "list entry")));
    return out;
}

void apply_kv(RunConfig& cfg, const std::string& raw_key, const std::string& value) {
    const std::string key = trim(raw_key);
    const std::string v = trim(value);
    if (key == "market") cfg.market = v;
    else if (key == "csv_path") cfg.csv_path = v;
    else if (key == "days") cfg.days = static_cast<int>(parse_int(v, key));
    else if (key == "instruments") cfg.instruments = static_cast<int>(parse_int(v, key));
    else if (key == "mu") cfg.mu = v;
    else if (key == "sigma") cfg.sigma = v;
    else if (key == "ticker") cfg.ticker = v;
    else if (key == "strategy") cfg.strategy = v;
    else if (key == "k") cfg.k = static_cast<int>(parse_int(v, key));
    else if (key == "alloc") cfg.alloc = v;
    else if (key == "margin_alpha") cfg.margin_alpha = parse_double(v, key);
    else if (key == "margin_clamp") cfg.margin_clamp = parse_bool(v, key);
    else if (key == "side_model") cfg.side_model = v;
    else if (key == "side_states") cfg.side_states = static_cast<int>(parse_int(v, key));
    else if (key == "mode") cfg.mode = v;
    else if (key == "fixed_w") cfg.fixed_w = v;
    else if (key == "grid_delta") cfg.grid_delta = parse_double(v, key);
    else if (key == "floor_epsilon") cfg.floor_epsilon = parse_double(v, key);
    else if (key == "intervals") cfg.intervals = v;
    else if (key == "seed") {
        cfg.seed = parse_uint(v, key);
        cfg.has_seed = true;
    } else if (key == "samples") cfg.samples = parse_uint(v, key);
    else if (key == "burn_in") cfg.burn_in = parse_uint(v, key);
    else if (key == "chains") cfg.chains = static_cast<int>(parse_int(v, key));
    else if (key == "thinning") cfg.thinning = parse_uint(v, key);
    else if (key == "damping_gamma") cfg.damping_gamma = parse_double(v, key);
    else if (key == "damping_sigma") cfg.damping_sigma = parse_double(v, key);
    else if (key == "tv_cap") cfg.tv_cap = static_cast<std::size_t>(parse_uint(v, key));
    else if (key == "tv_threshold") cfg.tv_threshold = parse_double(v, key);
    else if (key == "concavity_trials") cfg.concavity_trials = static_cast<int>(parse_int(v, key));
    else if (key == "fd_step") cfg.fd_step = parse_double(v, key);
    else if (key == "force_concavity") cfg.force_concavity = parse_bool(v, key);
    else if (key == "budget_eps") cfg.budget_eps = parse_double(v, key);
    else if (key == "budget_nu") cfg.budget_nu = parse_double(v, key);
    else if (key == "budget_kappa") cfg.budget_kappa = parse_double(v, key);
    else if (key == "budget_confidence") cfg.budget_confidence = parse_double(v, key);
    else if (key == "out") cfg.out = v;
    else throw ConfigError("unknown config key: " + key);
}

void load_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::string line;
    long row = 0;
    while (std::getline(in, line)) {
        ++row;
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(row) + ": expected key=value");
        apply_kv(cfg, text.substr(0, eq), text.substr(eq + 1));
    }
}

PreparedRun prepare_run(const RunConfig& cfg) {
    check_common(cfg);
    PreparedRun run;
    run.prices = build_prices(cfg);
    const int m = static_cast<int>(run.prices.size());
    const MarginSpec margin{cfg.margin_alpha};

    if (cfg.strategy == "crp") {
        run.input = plain_run_input(market_from_prices(run.prices));
        run.strategy = std::make_unique<CrpStrategy>(m);
    } else if (cfg.strategy == "crpside") {
        run.input = crpside_run_input(market_from_prices(run.prices));
        SideInfoModel model;
        model.kind = cfg.side_model == "onehot" ? SideInfoModel::Kind::one_hot
                                                : SideInfoModel::Kind::proportional;
        model.k_states = cfg.side_states > 0 ? cfg.side_states : m;
        run.strategy = std::make_unique<CrpSideStrategy>(m, model);
    } else if (cfg.strategy == "ma") {
        const PriceSeries& series = pick_series(run.prices, cfg.ticker);
        run.input =
            trading_run_input(series, margin, cfg.k, cfg.margin_clamp, &run.clamped_days);
        run.strategy = std::make_unique<MaStrategy>(cfg.k, parse_ma_alloc(cfg.alloc));
    } else if (cfg.strategy == "sr") {
        const PriceSeries& series = pick_series(run.prices, cfg.ticker);
        run.input =
            trading_run_input(series, margin, cfg.k, cfg.margin_clamp, &run.clamped_days);
        run.strategy = std::make_unique<SrStrategy>(cfg.k, parse_sr_alloc(cfg.alloc), margin);
    } else {
        run.input = indicator_run_input(run.prices, cfg.k);
        run.strategy = std::make_unique<IaStrategy>(m, cfg.k);
    }
    return run;
}

int run_backtest(const RunConfig& cfg, std::ostream& summary) {
    if (cfg.mode == "sampled") require_seed(cfg, "sampled mode");
    PreparedRun prepared = prepare_run(cfg);
    const FloorSchedule floor{cfg.floor_epsilon};
    const std::filesystem::path dir = output_dir(cfg);
    const std::filesystem::path ledger_path = dir / "ledger.csv";
    const std::filesystem::path diag_path = dir / "diagnostics.csv";

    WealthLedger ledger;
    std::vector<double> best_log;
    std::vector<ChainDiag> diags;
    std::size_t grid_points = 0;
    int warm_fallbacks = 0;
    GridSpec grid;
    if (cfg.mode != "fixed") {
        grid = build_grid(prepared.strategy->space(), cfg.grid_delta);
        grid_points = grid.size();
    }

    if (cfg.mode == "fixed") {
        const ParamPoint w = resolve_fixed_point(cfg, prepared.strategy->space());
        ledger = cumulative_return(*prepared.strategy, w, prepared.input, floor);
        best_log = ledger.log_wealth;
    } else if (cfg.mode == "exact") {
        UniversalRun run = universal_run(*prepared.strategy, grid, prepared.input, floor);
        ledger = std::move(run.ledger);
        best_log = std::move(run.best_log);
    } else if (cfg.mode == "sampled") {
        UniversalRun run = sampled_universal_run(*prepared.strategy, grid, prepared.input, floor,
                                                 budget_from(cfg), cfg.seed, damping_from(cfg),
                                                 &diags, 0, false, &warm_fallbacks);
        ledger = std::move(run.ledger);
        best_log = std::move(run.best_log);
    } else {
        const DynamicSchedule schedule = resolve_schedule(cfg, prepared.input.days());
        UniversalRun run =
            dynamic_universal_run(*prepared.strategy, grid, prepared.input, schedule, floor);
        ledger = std::move(run.ledger);
        best_log = std::move(run.best_log);
    }

    const std::vector<double> regret =
        cfg.mode == "fixed" ? std::vector<double>(ledger.days(), 0.0)
                            : regret_series(best_log, ledger.log_wealth);
    write_ledger_file(ledger_path, ledger, best_log, regret);
    if (cfg.mode == "sampled") write_diagnostics_file(diag_path, diags);

    summary << "command=backtest\n"
            << "mode=" << cfg.mode << '\n'
            << "strategy=" << cfg.strategy << '\n'
            << "market=" << cfg.market << '\n'
            << "instruments=" << prepared.input.market.m << '\n'
            << "days=" << prepared.input.days() << '\n';
    if (cfg.mode != "fixed") summary << "grid_points=" << grid_points << '\n';
    summary << "final_wealth=" << format_double(ledger.final_wealth()) << '\n'
            << "final_log_wealth=" << format_double(ledger.final_log()) << '\n'
            << "normalized_log_return=" << format_double(ledger.log_normalized()) << '\n'
            << "best_log_wealth=" << format_double(best_log.empty() ? 0.0 : best_log.back())
            << '\n'
            << "regret=" << format_double(regret.empty() ? 0.0 : regret.back()) << '\n';
    if (cfg.mode == "sampled") summary << "warm_fallbacks=" << warm_fallbacks << '\n';
    if (cfg.margin_clamp) summary << "clamped_days=" << prepared.clamped_days.size() << '\n';
    summary << "ledger_file=" << ledger_path.string() << '\n';
    if (cfg.mode == "sampled") summary << "diagnostics_file=" << diag_path.string() << '\n';
    return 0;
}

int run_gen_market(const RunConfig& cfg, std::ostream& summary) {
    check_common(cfg);
    if (cfg.market == "csv")
        throw ConfigError("gen-market needs a synthetic generator (cover|constant|lognormal)");
    const std::vector<PriceSeries> prices = build_prices(cfg);
    const std::filesystem::path dir = output_dir(cfg);
    const std::filesystem::path file = dir / "market.csv";
    write_market_csv(file, prices);

    summary << "command=gen-market\n"
            << "generator=" << cfg.market << '\n'
            << "days=" << cfg.days << '\n';
    summary << "tickers=";
    for (std::size_t i = 0; i < prices.size(); ++i)
        summary << (i ? "," : "") << prices[i].ticker;
    summary << '\n' << "file=" << file.string() << '\n';
    return 0;
}

int run_diagnose(const RunConfig& cfg, std::ostream& summary) {
    if (cfg.mode != "sampled") throw ConfigError("diagnose requires mode=sampled");
    require_seed(cfg, "diagnose");
    PreparedRun prepared = prepare_run(cfg);
    const FloorSchedule floor{cfg.floor_epsilon};
    const GridSpec grid = build_grid(prepared.strategy->space(), cfg.grid_delta);
    if (grid.size() > cfg.tv_cap)
        throw GridTooLarge("exact TV check needs grid_points <= tv_cap (" +
                           std::to_string(grid.size()) + " > " + std::to_string(cfg.tv_cap) +
                           ")");

    const ConcavityReport concavity =
        log_concavity_check(*prepared.strategy, prepared.input, floor, cfg.concavity_trials,
                            cfg.seed, cfg.force_concavity, cfg.fd_step);

    // Day loop mirroring the sampled run: exact per-center log returns feed
    // each day's target; per-chain segments of the pooled sample give the
    // cross-chain spread.
    const SamplerBudget budget = budget_from(cfg);
    const DampingSpec damping = damping_from(cfg).value_or(default_damping(cfg.grid_delta));
    SamplerSession session(grid, budget, cfg.seed, damping);
    std::vector<ChainDiag> diags;
    std::vector<double> log_R(grid.size(), 0.0);
    double rhat_max = 1.0;
    for (std::size_t t = 0; t < prepared.input.days(); ++t) {
        const std::vector<std::int32_t>& pooled =
            session.sample_day(static_cast<int>(t), log_R, &diags, cfg.tv_cap);

        std::vector<std::vector<double>> chain_coords(static_cast<std::size_t>(cfg.chains));
        const std::uint64_t base = budget.n_samples / static_cast<std::uint64_t>(cfg.chains);
        const std::uint64_t extra = budget.n_samples % static_cast<std::uint64_t>(cfg.chains);
        std::size_t offset = 0;
        for (int c = 0; c < cfg.chains; ++c) {
            const std::size_t keep =
                static_cast<std::size_t>(base + (static_cast<std::uint64_t>(c) < extra ? 1 : 0));
            for (std::size_t i = 0; i < keep; ++i)
                chain_coords[static_cast<std::size_t>(c)].push_back(
                    grid.centers[static_cast<std::size_t>(pooled[offset + i])].coords[0]);
            offset += keep;
        }
        rhat_max = std::max(rhat_max, split_rhat(chain_coords));

        const EnvironmentSnapshot& env = prepared.input.envs[t];
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const Eigen::VectorXd alloc =
                floor_transform(prepared.strategy->describe(grid.centers[i], env), env.t, floor);
            log_R[i] += std::log(alloc.dot(prepared.input.market.returns[t]));
        }
    }

    const std::filesystem::path dir = output_dir(cfg);
    const std::filesystem::path diag_path = dir / "diagnostics.csv";
    write_diagnostics_file(diag_path, diags);

    double acceptance_mean = 0.0;
    double ess_min = diags.empty() ? 0.0 : diags.front().ess;
    double tv_max = 0.0;
    for (const ChainDiag& d : diags) {
        acceptance_mean += d.acceptance_rate;
        ess_min = std::min(ess_min, d.ess);
        tv_max = std::max(tv_max, d.tv_exact);
    }
    if (!diags.empty()) acceptance_mean /= static_cast<double>(diags.size());

    const TheoreticalBudget theory =
        theoretical_budget(prepared.strategy->meta(), prepared.input.market.m,
                           static_cast<int>(prepared.input.days()), cfg.budget_eps, cfg.budget_nu,
                           cfg.budget_kappa, cfg.budget_confidence);

    summary << "command=diagnose\n"
            << "strategy=" << cfg.strategy << '\n'
            << "grid_points=" << grid.size() << '\n'
            << "days=" << prepared.input.days() << '\n'
            << "eligible=" << (concavity.eligible ? 1 : 0) << '\n';
    if (concavity.points_checked > 0)
        summary << "concavity_max_eigenvalue=" << format_double(concavity.max_eigenvalue) << '\n'
                << "concavity_points=" << concavity.points_checked << '\n';
    summary << "acceptance_mean=" << format_double(acceptance_mean) << '\n'
            << "ess_min=" << format_double(ess_min) << '\n'
            << "rhat_max=" << format_double(rhat_max) << '\n'
            << "warm_fallbacks=" << session.warm_fallbacks() << '\n'
            << "tv_max=" << format_double(tv_max) << '\n'
            << "tv_threshold=" << format_double(cfg.tv_threshold) << '\n'
            << "theoretical_note=" << theory.note << '\n'
            << "theoretical_n_samples=" << format_double(theory.n_samples) << '\n'
            << "theoretical_gamma_t=" << format_double(theory.gamma_t) << '\n'
            << "theoretical_delta_t=" << format_double(theory.delta_t) << '\n'
            << "theoretical_delta_t_prime=" << format_double(theory.delta_t_prime) << '\n'
            << "theoretical_sigma=" << format_double(theory.sigma) << '\n'
            << "theoretical_gamma_exp=" << format_double(theory.gamma_exp) << '\n'
            << "theoretical_tau=" << format_double(theory.tau) << '\n'
            << "theoretical_tau_prime=" << format_double(theory.tau_prime) << '\n'
            << "diagnostics_file=" << diag_path.string() << '\n';
    return tv_max > cfg.tv_threshold ? 1 : 0;
}

int run_compare(const RunConfig& cfg, std::ostream& summary) {
    require_seed(cfg, "compare (sampled leg)");
    PreparedRun prepared = prepare_run(cfg);
    const FloorSchedule floor{cfg.floor_epsilon};
    const GridSpec grid = build_grid(prepared.strategy->space(), cfg.grid_delta);

    const UniversalRun exact = universal_run(*prepared.strategy, grid, prepared.input, floor,
                                             /*keep_descriptions=*/true);
    const UniversalRun sampled =
        sampled_universal_run(*prepared.strategy, grid, prepared.input, floor, budget_from(cfg),
                              cfg.seed, damping_from(cfg), nullptr, 0,
                              /*keep_descriptions=*/true);

    const std::filesystem::path dir = output_dir(cfg);
    const std::filesystem::path file = dir / "compare.csv";
    std::ofstream out = open_output(file);
    out << "day,component,exact,sampled,abs_deviation\n";
    double max_deviation = 0.0;
    for (std::size_t t = 0; t < exact.descriptions.size(); ++t) {
        for (Eigen::Index i = 0; i < exact.descriptions[t].size(); ++i) {
            const double e = exact.descriptions[t][i];
            const double s = sampled.descriptions[t][i];
            const double dev = std::abs(e - s);
            max_deviation = std::max(max_deviation, dev);
            out << t << ',' << i << ',' << format_double(e) << ',' << format_double(s) << ','
                << format_double(dev) << '\n';
        }
    }

    summary << "command=compare\n"
            << "strategy=" << cfg.strategy << '\n'
            << "grid_points=" << grid.size() << '\n'
            << "days=" << prepared.input.days() << '\n'
            << "max_deviation=" << format_double(max_deviation) << '\n'
            << "compare_file=" << file.string() << '\n';
    return 0;
}

int run_command(const std::string& command, const RunConfig& cfg, std::ostream& summary,
                std::ostream& errors) {
    try {
        if (command == "backtest") return run_backtest(cfg, summary);
        if (command == "gen-market") return run_gen_market(cfg, summary);
        if (command == "diagnose") return run_diagnose(cfg, summary);
        if (command == "compare") return run_compare(cfg, summary);
        throw ConfigError("unknown command: " + command);
    } catch (const ConfigError& e) {
        errors << "config error: " << e.what() << '\n';
        return 2;
    } catch (const PartitionError& e) {
        errors << "config error: " << e.what() << '\n';
        return 2;
    } catch (const GridTooLarge& e) {
        errors << "config error: " << e.what() << '\n';
        return 2;
    } catch (const BudgetTooSmall& e) {
        errors << "config error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        errors << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        errors << "error: " << e.what() << '\n';
        return 3;
    }
}

} // namespace unistrat
