#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace unistrat {

// Per-day prices for one instrument. Day-indexed from 0; every price > 0.
struct PriceSeries {
    std::string ticker;
    std::vector<double> prices;
};

// Margin requirement alpha in (0, 1] for short positions. A short's daily value
// factor is 1 + (1 - x)/alpha and stays positive only while x < 1 + alpha.
struct MarginSpec {
    double alpha = 1.0;
};

// Day-indexed return vectors x_t in (0,inf)^m; index t spans prices t -> t+1.
struct MarketSeries {
    int m = 0;
    std::vector<Eigen::VectorXd> returns;
    std::vector<std::string> labels;

    std::size_t days() const { return returns.size(); }
};

// What a strategy may see when describing day t: normalized trailing prices,
// trailing window minima/maxima, the current normalized price, per-instrument
// indicator vectors, and a raw side-information vector. All normalized
// values lie in (0,1]; side_info is unrestricted.
struct EnvironmentSnapshot {
    int t = 0;
    Eigen::VectorXd price_history; // v_t, entry j-1 = price at day t-j, j = 1..k
    Eigen::VectorXd min_history;   // window minima over the last j days
    Eigen::VectorXd max_history;   // window maxima over the last j days
    double current_price = 1.0;
    Eigen::MatrixXd indicators;    // m x k, column max = 1 (indicator strategies)
    Eigen::VectorXd side_info;     // state-splitting strategies
};

// Daily value factor of a short position: 1 + (1 - x)/alpha.
// Throws MarginBreach when x >= 1 + alpha.
double short_return(double x, const MarginSpec& margin);

// Two-instrument market (long factor, short factor) built from one price
// series. Throws MarginBreach with the offending day index unless
// clamp_breaches is set, in which case the factor is clamped just below
// 1 + alpha and the day recorded in clamped_days.
MarketSeries trading_market(const PriceSeries& prices, const MarginSpec& margin,
                            bool clamp_breaches = false,
                            std::vector<long>* clamped_days = nullptr);

// Stock 1 holds value; stock 2 alternates x2 = 2 on even days, 1/2 on odd.
MarketSeries cover_market(int num_days);

MarketSeries constant_market(int m, int num_days);

// i.i.d. returns x_ti = exp(mu_i + sigma_i * z), z standard normal, seeded.
MarketSeries lognormal_market(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma,
                              int num_days, std::uint64_t seed);

// Snapshot for the last day of `prices` over window k: needs k+1 prices.
// Every quantity (trailing prices, window minima/maxima, current price) is
// divided by the largest raw value among them, so the max is exactly 1.
EnvironmentSnapshot normalize_environment(std::span<const double> prices, int k);

// Columns: date,<ticker1>,...; ISO-8601 dates ascending; positive prices.
std::vector<PriceSeries> ingest_csv(const std::string& path);

// A market and the per-day snapshots a strategy sees, aligned by run day.
struct RunInput {
    MarketSeries market;
    std::vector<EnvironmentSnapshot> envs;

    std::size_t days() const { return market.days(); }
};

// CRP-style runs: snapshots carry only the day index.
RunInput plain_run_input(const MarketSeries& market);

// Side information for day t is the previous day's return vector (ones on
// day 0).
RunInput crpside_run_input(const MarketSeries& market);

// Long/short market plus windowed snapshots from one price series. Run day
// tau trades price day tau+k, so day 0 is the first day with k past prices.
RunInput trading_run_input(const PriceSeries& prices, const MarginSpec& margin, int k,
                           bool clamp_breaches = false,
                           std::vector<long>* clamped_days = nullptr);

// Multi-asset market with per-instrument indicator vectors: indicator j of
// stock i on price day d is p_i(d)/p_i(d-j), columns scaled so the
// cross-sectional max is 1.
RunInput indicator_run_input(const std::vector<PriceSeries>& series, int k);

} // namespace unistrat
