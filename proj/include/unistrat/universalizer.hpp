#pragma once

#include "unistrat/market.hpp"
#include "unistrat/simplex_geom.hpp"
#include "unistrat/strategies.hpp"

#include <Eigen/Dense>

#include <span>
#include <utility>
#include <vector>

namespace unistrat {

// Daily factors S_t(w).x_t and their running log product. R_0 = 1 by
// convention; log_wealth[t] is log R_{t+1}, the wealth after day t.
struct WealthLedger {
    std::vector<double> daily_factor;
    std::vector<double> log_wealth;

    std::size_t days() const { return daily_factor.size(); }
    double final_log() const { return log_wealth.empty() ? 0.0 : log_wealth.back(); }
    double final_wealth() const { return std::exp(final_log()); }
    // L_n = (1/n) log R_n.
    double log_normalized() const {
        return log_wealth.empty() ? 0.0 : final_log() / static_cast<double>(days());
    }
};

WealthLedger cumulative_return(const Strategy& strategy, const ParamPoint& w,
                               const RunInput& input, const FloorSchedule& floor);

// Quadrature mean of log-scale values over the grid's cell-volume weights:
// logsumexp(lw + v) - logsumexp(lw).
double weighted_log_mean(const GridSpec& grid, std::span<const double> log_values);

struct UniversalRun {
    WealthLedger ledger;
    // Per day: max over the grid of log R_{t+1}(w). For dynamic runs this is
    // the benchmark: completed intervals contribute their own best.
    std::vector<double> best_log;
    // Investment descriptions U_t, kept when requested.
    std::vector<Eigen::VectorXd> descriptions;
    // log R_n(w) per grid center at the end of the run.
    std::vector<double> final_log_returns;
};

// Day-t description: quadrature average of S_t(w) weighted by R_t(w), both
// floored, computed in log space with max subtraction.
Eigen::VectorXd universal_describe(const Strategy& strategy, const GridSpec& grid,
                                   const RunInput& input, int t, const FloorSchedule& floor);

UniversalRun universal_run(const Strategy& strategy, const GridSpec& grid, const RunInput& input,
                           const FloorSchedule& floor, bool keep_descriptions = false);

struct HindsightOptimum {
    std::int64_t index = 0; // grid index of the argmax, lowest on ties
    ParamPoint point;
    double log_value = 0.0; // log R_n at the argmax
};

HindsightOptimum hindsight_optimum(const Strategy& strategy, const GridSpec& grid,
                                   const RunInput& input, const FloorSchedule& floor);

// Per-day gap (best_log[t] - universal_log[t]) / (t+1); nonnegative when both
// come from the same grid and floor.
std::vector<double> regret_series(std::span<const double> best_log,
                                  std::span<const double> universal_log);

// Consecutive day intervals [begin, end) that must exactly cover [0, n).
struct DynamicSchedule {
    std::vector<std::pair<int, int>> intervals;

    static DynamicSchedule from_lengths(const std::vector<int>& lengths);
};

void validate_schedule(const DynamicSchedule& schedule, std::size_t days);

// Universalization with per-interval weight resets: R restarts at 1 on each
// interval boundary, so each interval's parameters are chosen independently.
// The benchmark (best_log) is the sum of per-interval bests.
UniversalRun dynamic_universal_run(const Strategy& strategy, const GridSpec& grid,
                                   const RunInput& input, const DynamicSchedule& schedule,
                                   const FloorSchedule& floor, bool keep_descriptions = false);

} // namespace unistrat
