#include "unistrat/market.hpp"

#include "unistrat/errors.hpp"
#include "unistrat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace unistrat {

namespace {

void check_prices(const PriceSeries& series, std::size_t min_len) {
    if (series.prices.size() < min_len)
        throw InsufficientHistory("price series '" + series.ticker + "' needs at least " +
                                  std::to_string(min_len) + " prices");
    for (double p : series.prices)
        if (!(p > 0.0))
            throw NonPositivePrice("price series '" + series.ticker + "' has a nonpositive price");
}

bool iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (s[i] < '0' || s[i] > '9') return false;
    return true;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

// Keeps the short factor barely positive when the caller asked to clamp
// instead of erroring; records the day so callers can log it.
double breach_checked_factor(double x, double alpha, std::size_t day, bool clamp,
                             std::vector<long>* clamped_days) {
    if (x < 1.0 + alpha) return x;
    if (!clamp)
        throw MarginBreach("margin breach on day " + std::to_string(day) + ": factor " +
                               std::to_string(x) + " >= 1 + alpha",
                           static_cast<long>(day));
    if (clamped_days) clamped_days->push_back(static_cast<long>(day));
    return (1.0 + alpha) * (1.0 - 1e-9);
}

} // namespace

double short_return(double x, const MarginSpec& margin) {
    if (!(x > 0.0)) throw DataError("daily factor must be positive");
    if (!(margin.alpha > 0.0 && margin.alpha <= 1.0))
        throw DataError("margin alpha must lie in (0, 1]");
    if (x >= 1.0 + margin.alpha)
        throw MarginBreach("daily factor " + std::to_string(x) +
                           " consumes the margin at alpha=" + std::to_string(margin.alpha));
    return 1.0 + (1.0 - x) / margin.alpha;
}

MarketSeries trading_market(const PriceSeries& prices, const MarginSpec& margin,
                            bool clamp_breaches, std::vector<long>* clamped_days) {
    check_prices(prices, 2);
    if (!(margin.alpha > 0.0 && margin.alpha <= 1.0))
        throw DataError("margin alpha must lie in (0, 1]");
    MarketSeries out;
    out.m = 2;
    out.labels = {prices.ticker + ":long", prices.ticker + ":short"};
    out.returns.reserve(prices.prices.size() - 1);
    for (std::size_t t = 0; t + 1 < prices.prices.size(); ++t) {
        const double x = breach_checked_factor(prices.prices[t + 1] / prices.prices[t],
                                               margin.alpha, t, clamp_breaches, clamped_days);
        Eigen::VectorXd r(2);
        r << x, 1.0 + (1.0 - x) / margin.alpha;
        out.returns.push_back(std::move(r));
    }
    return out;
}

MarketSeries cover_market(int num_days) {
    if (num_days < 1) throw DataError("cover_market needs at least one day");
    MarketSeries out;
    out.m = 2;
    out.labels = {"hold", "swing"};
    out.returns.reserve(static_cast<std::size_t>(num_days));
    for (int t = 0; t < num_days; ++t) {
        Eigen::VectorXd r(2);
        r << 1.0, (t % 2 == 0) ? 2.0 : 0.5;
        out.returns.push_back(std::move(r));
    }
    return out;
}

MarketSeries constant_market(int m, int num_days) {
    if (m < 1 || num_days < 1) throw DataError("constant_market needs m >= 1, days >= 1");
    MarketSeries out;
    out.m = m;
    for (int i = 0; i < m; ++i) out.labels.push_back("const" + std::to_string(i + 1));
    out.returns.assign(static_cast<std::size_t>(num_days), Eigen::VectorXd::Ones(m));
    return out;
}

MarketSeries lognormal_market(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma,
                              int num_days, std::uint64_t seed) {
    if (mu.size() != sigma.size() || mu.size() == 0)
        throw DimensionMismatch("mu and sigma must have equal, nonzero length");
    if (num_days < 1) throw DataError("lognormal_market needs days >= 1");
    const int m = static_cast<int>(mu.size());
    MarketSeries out;
    out.m = m;
    for (int i = 0; i < m; ++i) out.labels.push_back("ln" + std::to_string(i + 1));
    SeqRng rng(seed);
    out.returns.reserve(static_cast<std::size_t>(num_days));
    for (int t = 0; t < num_days; ++t) {
        Eigen::VectorXd r(m);
        for (int i = 0; i < m; ++i) r[i] = std::exp(mu[i] + sigma[i] * rng.normal());
        out.returns.push_back(std::move(r));
    }
    return out;
}

EnvironmentSnapshot normalize_environment(std::span<const double> prices, int k) {
    if (k < 1) throw DataError("window k must be >= 1");
    if (prices.size() < static_cast<std::size_t>(k) + 1)
        throw InsufficientHistory("window " + std::to_string(k) + " needs " +
                                  std::to_string(k + 1) + " prices, have " +
                                  std::to_string(prices.size()));
    for (double p : prices)
        if (!(p > 0.0)) throw NonPositivePrice("nonpositive price in environment window");

    const std::size_t d = prices.size() - 1; // current day
    EnvironmentSnapshot env;
    env.price_history.resize(k);
    env.min_history.resize(k);
    env.max_history.resize(k);
    double lo = prices[d - 1];
    double hi = prices[d - 1];
    for (int j = 1; j <= k; ++j) {
        const double p = prices[d - static_cast<std::size_t>(j)];
        lo = std::min(lo, p);
        hi = std::max(hi, p);
        env.price_history[j - 1] = p;
        env.min_history[j - 1] = lo;
        env.max_history[j - 1] = hi;
    }
    env.current_price = prices[d];

    const double scale = std::max(env.current_price, env.price_history.maxCoeff());
    env.price_history /= scale;
    env.min_history /= scale;
    env.max_history /= scale;
    env.current_price /= scale;
    return env;
}

std::vector<PriceSeries> ingest_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file: " + path, 0);
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);

    const std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "date")
        throw ParseError("header must be date,<ticker>,...", 0);

    std::vector<PriceSeries> series(header.size() - 1);
    for (std::size_t i = 1; i < header.size(); ++i) {
        if (header[i].empty()) throw ParseError("empty ticker name", 0, static_cast<long>(i));
        series[i - 1].ticker = header[i];
    }

    std::string prev_date;
    long row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw ParseError("row " + std::to_string(row) + " has " +
                                 std::to_string(fields.size()) + " fields, expected " +
                                 std::to_string(header.size()),
                             row);
        if (!iso_date(fields[0]))
            throw ParseError("bad date '" + fields[0] + "'", row, 0);
        if (!prev_date.empty() && fields[0] <= prev_date)
            throw ParseError("dates must be strictly ascending at '" + fields[0] + "'", row, 0);
        prev_date = fields[0];
        for (std::size_t i = 1; i < fields.size(); ++i) {
            std::size_t pos = 0;
            double value = 0.0;
            try {
                value = std::stod(fields[i], &pos);
            } catch (const std::exception&) {
                throw ParseError("bad price '" + fields[i] + "'", row, static_cast<long>(i));
            }
            if (pos != fields[i].size())
                throw ParseError("bad price '" + fields[i] + "'", row, static_cast<long>(i));
            if (!(value > 0.0))
                throw NonPositivePrice("nonpositive price at row " + std::to_string(row), row,
                                       static_cast<long>(i));
            series[i - 1].prices.push_back(value);
        }
    }
    if (series[0].prices.empty()) throw ParseError("no data rows in " + path, 1);
    return series;
}

RunInput plain_run_input(const MarketSeries& market) {
    RunInput in;
    in.market = market;
    in.envs.resize(market.days());
    for (std::size_t t = 0; t < market.days(); ++t) in.envs[t].t = static_cast<int>(t);
    return in;
}

RunInput crpside_run_input(const MarketSeries& market) {
    RunInput in = plain_run_input(market);
    for (std::size_t t = 0; t < market.days(); ++t)
        in.envs[t].side_info =
            t == 0 ? Eigen::VectorXd::Ones(market.m).eval() : market.returns[t - 1];
    return in;
}

RunInput trading_run_input(const PriceSeries& prices, const MarginSpec& margin, int k,
                           bool clamp_breaches, std::vector<long>* clamped_days) {
    check_prices(prices, static_cast<std::size_t>(k) + 2);
    if (!(margin.alpha > 0.0 && margin.alpha <= 1.0))
        throw DataError("margin alpha must lie in (0, 1]");
    const std::size_t len = prices.prices.size();
    RunInput in;
    in.market.m = 2;
    in.market.labels = {prices.ticker + ":long", prices.ticker + ":short"};
    // Tradable price days d = k .. len-2.
    for (std::size_t d = static_cast<std::size_t>(k); d + 1 < len; ++d) {
        const double x = breach_checked_factor(prices.prices[d + 1] / prices.prices[d],
                                               margin.alpha, d, clamp_breaches, clamped_days);
        Eigen::VectorXd r(2);
        r << x, 1.0 + (1.0 - x) / margin.alpha;
        in.market.returns.push_back(std::move(r));

        EnvironmentSnapshot env = normalize_environment(
            std::span<const double>(prices.prices.data(), d + 1), k);
        env.t = static_cast<int>(d - static_cast<std::size_t>(k));
        in.envs.push_back(std::move(env));
    }
    return in;
}

RunInput indicator_run_input(const std::vector<PriceSeries>& series, int k) {
    if (series.empty()) throw DataError("indicator_run_input needs at least one series");
    const std::size_t len = series[0].prices.size();
    for (const PriceSeries& s : series) {
        check_prices(s, static_cast<std::size_t>(k) + 2);
        if (s.prices.size() != len)
            throw DimensionMismatch("price series lengths differ");
    }
    const int m = static_cast<int>(series.size());
    RunInput in;
    in.market.m = m;
    for (const PriceSeries& s : series) in.market.labels.push_back(s.ticker);
    for (std::size_t d = static_cast<std::size_t>(k); d + 1 < len; ++d) {
        Eigen::VectorXd r(m);
        Eigen::MatrixXd ind(m, k);
        for (int i = 0; i < m; ++i) {
            const std::vector<double>& p = series[static_cast<std::size_t>(i)].prices;
            r[i] = p[d + 1] / p[d];
            for (int j = 1; j <= k; ++j)
                ind(i, j - 1) = p[d] / p[d - static_cast<std::size_t>(j)];
        }
        for (int j = 0; j < k; ++j) ind.col(j) /= ind.col(j).maxCoeff();
        in.market.returns.push_back(std::move(r));
        EnvironmentSnapshot env;
        env.t = static_cast<int>(d - static_cast<std::size_t>(k));
        env.indicators = std::move(ind);
        in.envs.push_back(std::move(env));
    }
    return in;
}

} // namespace unistrat
