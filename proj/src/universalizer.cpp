#include "unistrat/universalizer.hpp"

#include "unistrat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace unistrat {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_run(const Strategy& strategy, const RunInput& input) {
    const StrategyMeta info = strategy.meta();
    if (input.market.m != info.m)
        throw DimensionMismatch("market has " + std::to_string(input.market.m) +
                                " instruments, strategy expects " + std::to_string(info.m));
    if (input.envs.size() != input.market.days())
        throw DimensionMismatch("environment count must match market days");
}

void check_grid(const Strategy& strategy, const GridSpec& grid) {
    const StrategyMeta info = strategy.meta();
    if (grid.space.k != info.k || grid.space.ell != info.ell)
        throw DimensionMismatch("grid space does not match the strategy's parameter space");
    if (grid.size() == 0) throw DimensionMismatch("grid is empty");
}

// One day of the universal update. log_R holds log R_t per center on entry
// and log R_{t+1} on exit. Returns U_t.
Eigen::VectorXd advance_day(const Strategy& strategy, const GridSpec& grid,
                            const Eigen::VectorXd& x, const EnvironmentSnapshot& env,
                            const FloorSchedule& floor, std::vector<double>& log_R) {
    const int m = static_cast<int>(x.size());
    double shift = kNegInf;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.log_weight[i] == kNegInf) continue;
        shift = std::max(shift, grid.log_weight[i] + log_R[i]);
    }

    Eigen::VectorXd numerator = Eigen::VectorXd::Zero(m);
    double denominator = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Eigen::VectorXd alloc =
            floor_transform(strategy.describe(grid.centers[i], env), env.t, floor);
        if (grid.log_weight[i] != kNegInf) {
            const double mass = std::exp(grid.log_weight[i] + log_R[i] - shift);
            numerator += mass * alloc;
            denominator += mass;
        }
        log_R[i] += std::log(alloc.dot(x));
    }
    return numerator / denominator;
}

} // namespace

WealthLedger cumulative_return(const Strategy& strategy, const ParamPoint& w,
                               const RunInput& input, const FloorSchedule& floor) {
    check_run(strategy, input);
    WealthLedger ledger;
    ledger.daily_factor.reserve(input.days());
    ledger.log_wealth.reserve(input.days());
    double log_R = 0.0;
    for (std::size_t t = 0; t < input.days(); ++t) {
        const Eigen::VectorXd alloc =
            floor_transform(strategy.describe(w, input.envs[t]), input.envs[t].t, floor);
        const double factor = alloc.dot(input.market.returns[t]);
        if (!(factor > 0.0)) throw DataError("daily factor must stay positive");
        log_R += std::log(factor);
        ledger.daily_factor.push_back(factor);
        ledger.log_wealth.push_back(log_R);
    }
    return ledger;
}

double weighted_log_mean(const GridSpec& grid, std::span<const double> log_values) {
    if (log_values.size() != grid.size())
        throw LengthMismatch("one log value per grid center required");
    double shift = kNegInf;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.log_weight[i] == kNegInf) continue;
        shift = std::max(shift, grid.log_weight[i] + log_values[i]);
    }
    double wshift = kNegInf;
    for (std::size_t i = 0; i < grid.size(); ++i) wshift = std::max(wshift, grid.log_weight[i]);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.log_weight[i] == kNegInf) continue;
        num += std::exp(grid.log_weight[i] + log_values[i] - shift);
        den += std::exp(grid.log_weight[i] - wshift);
    }
    return std::log(num) + shift - (std::log(den) + wshift);
}

Eigen::VectorXd universal_describe(const Strategy& strategy, const GridSpec& grid,
                                   const RunInput& input, int t, const FloorSchedule& floor) {
    check_run(strategy, input);
    check_grid(strategy, grid);
    if (t < 0 || static_cast<std::size_t>(t) >= input.days())
        throw LengthMismatch("describe day outside the run");

    std::vector<double> log_R(grid.size(), 0.0);
    for (int s = 0; s < t; ++s)
        advance_day(strategy, grid, input.market.returns[static_cast<std::size_t>(s)],
                    input.envs[static_cast<std::size_t>(s)], floor, log_R);

    // Description for day t without consuming day t's return.
    double shift = kNegInf;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.log_weight[i] == kNegInf) continue;
        shift = std::max(shift, grid.log_weight[i] + log_R[i]);
    }
    Eigen::VectorXd numerator = Eigen::VectorXd::Zero(input.market.m);
    double denominator = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.log_weight[i] == kNegInf) continue;
        const Eigen::VectorXd alloc = floor_transform(
            strategy.describe(grid.centers[i], input.envs[static_cast<std::size_t>(t)]),
            input.envs[static_cast<std::size_t>(t)].t, floor);
        const double mass = std::exp(grid.log_weight[i] + log_R[i] - shift);
        numerator += mass * alloc;
        denominator += mass;
    }
    return numerator / denominator;
}

UniversalRun universal_run(const Strategy& strategy, const GridSpec& grid, const RunInput& input,
                           const FloorSchedule& floor, bool keep_descriptions) {
    check_run(strategy, input);
    check_grid(strategy, grid);

    UniversalRun run;
    run.final_log_returns.assign(grid.size(), 0.0);
    double log_U = 0.0;
    for (std::size_t t = 0; t < input.days(); ++t) {
        const Eigen::VectorXd u = advance_day(strategy, grid, input.market.returns[t],
                                              input.envs[t], floor, run.final_log_returns);
        const double factor = u.dot(input.market.returns[t]);
        log_U += std::log(factor);
        run.ledger.daily_factor.push_back(factor);
        run.ledger.log_wealth.push_back(log_U);
        run.best_log.push_back(
            *std::max_element(run.final_log_returns.begin(), run.final_log_returns.end()));
        if (keep_descriptions) run.descriptions.push_back(u);
    }
    return run;
}

HindsightOptimum hindsight_optimum(const Strategy& strategy, const GridSpec& grid,
                                   const RunInput& input, const FloorSchedule& floor) {
    check_run(strategy, input);
    check_grid(strategy, grid);

    HindsightOptimum best;
    best.index = -1;
    best.log_value = kNegInf;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double log_R = 0.0;
        for (std::size_t t = 0; t < input.days(); ++t) {
            const Eigen::VectorXd alloc = floor_transform(
                strategy.describe(grid.centers[i], input.envs[t]), input.envs[t].t, floor);
            log_R += std::log(alloc.dot(input.market.returns[t]));
        }
        if (log_R > best.log_value) {
            best.log_value = log_R;
            best.index = static_cast<std::int64_t>(i);
        }
    }
    best.point = grid.centers[static_cast<std::size_t>(best.index)];
    return best;
}

std::vector<double> regret_series(std::span<const double> best_log,
                                  std::span<const double> universal_log) {
    if (best_log.size() != universal_log.size())
        throw LengthMismatch("ledger lengths differ");
    std::vector<double> gap(best_log.size());
    for (std::size_t t = 0; t < best_log.size(); ++t)
        gap[t] = (best_log[t] - universal_log[t]) / static_cast<double>(t + 1);
    return gap;
}

DynamicSchedule DynamicSchedule::from_lengths(const std::vector<int>& lengths) {
    DynamicSchedule schedule;
    int begin = 0;
    for (int len : lengths) {
        if (len <= 0) throw PartitionError("interval lengths must be positive");
        schedule.intervals.emplace_back(begin, begin + len);
        begin += len;
    }
    return schedule;
}

void validate_schedule(const DynamicSchedule& schedule, std::size_t days) {
    if (schedule.intervals.empty()) throw PartitionError("schedule has no intervals");
    int expect = 0;
    for (const auto& [begin, end] : schedule.intervals) {
        if (begin != expect || end <= begin)
            throw PartitionError("intervals must be consecutive, nonempty, and ordered");
        expect = end;
    }
    if (static_cast<std::size_t>(expect) != days)
        throw PartitionError("schedule covers " + std::to_string(expect) + " days, market has " +
                             std::to_string(days));
}

UniversalRun dynamic_universal_run(const Strategy& strategy, const GridSpec& grid,
                                   const RunInput& input, const DynamicSchedule& schedule,
                                   const FloorSchedule& floor, bool keep_descriptions) {
    check_run(strategy, input);
    check_grid(strategy, grid);
    validate_schedule(schedule, input.days());

    UniversalRun run;
    run.final_log_returns.assign(grid.size(), 0.0);
    double log_U = 0.0;
    double benchmark_done = 0.0; // sum of completed intervals' best logs
    for (const auto& [begin, end] : schedule.intervals) {
        std::fill(run.final_log_returns.begin(), run.final_log_returns.end(), 0.0);
        for (int t = begin; t < end; ++t) {
            const std::size_t day = static_cast<std::size_t>(t);
            const Eigen::VectorXd u = advance_day(strategy, grid, input.market.returns[day],
                                                  input.envs[day], floor, run.final_log_returns);
            const double factor = u.dot(input.market.returns[day]);
            log_U += std::log(factor);
            run.ledger.daily_factor.push_back(factor);
            run.ledger.log_wealth.push_back(log_U);
            run.best_log.push_back(benchmark_done +
                                   *std::max_element(run.final_log_returns.begin(),
                                                     run.final_log_returns.end()));
            if (keep_descriptions) run.descriptions.push_back(u);
        }
        benchmark_done = run.best_log.back();
    }
    return run;
}

} // namespace unistrat
