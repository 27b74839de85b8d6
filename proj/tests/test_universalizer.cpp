#include "doctest.h"

#include "unistrat/errors.hpp"
#include "unistrat/market.hpp"
#include "unistrat/rng.hpp"
#include "unistrat/simplex_geom.hpp"
#include "unistrat/strategies.hpp"
#include "unistrat/universalizer.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <vector>

using namespace unistrat;

namespace {

ParamPoint point2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return make_point(ParamSpace{2, 1}, v);
}

GridSpec single_point_grid(ParamPoint w) {
    GridSpec grid;
    grid.space = ParamSpace{w.k, w.ell};
    grid.delta = 1.0;
    grid.centers.push_back(std::move(w));
    grid.log_weight.push_back(0.0);
    grid.neighbor.assign(static_cast<std::size_t>(grid.slots()), -1);
    return grid;
}

PriceSeries random_walk(int len, std::uint64_t seed, double spread = 0.25) {
    SeqRng rng(seed);
    PriceSeries out{"w", {}};
    double p = 1.0;
    for (int i = 0; i < len; ++i) {
        out.prices.push_back(p);
        p *= std::exp(rng.uniform(-spread, spread));
    }
    return out;
}

bool close_log(double a, double b, double rel) {
    return std::abs(a - b) <= rel * std::max(1.0, std::abs(b));
}

} // namespace

TEST_CASE("cumulative_return on the alternating market") {
    CrpStrategy crp(2);
    RunInput input = plain_run_input(cover_market(4));
    WealthLedger ledger = cumulative_return(crp, point2(0.5, 0.5), input, FloorSchedule{0.0});
    REQUIRE(ledger.days() == 4);
    CHECK(ledger.daily_factor[0] == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(ledger.daily_factor[1] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(ledger.daily_factor[2] == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(ledger.final_wealth() == doctest::Approx(81.0 / 64.0).epsilon(1e-14));
    CHECK(ledger.final_log() == doctest::Approx(2.0 * std::log(9.0 / 8.0)).epsilon(1e-14));
    CHECK(ledger.log_normalized() == doctest::Approx(std::log(9.0 / 8.0) / 2.0).epsilon(1e-14));

    // holding one stock keeps wealth constant on this market
    WealthLedger hold = cumulative_return(crp, point2(1.0, 0.0), input, FloorSchedule{0.0});
    CHECK(hold.final_wealth() == 1.0);

    // two-day wealth is (1 + w2)(1 - w2/2)
    for (double w2 : {0.0, 0.25, 0.6, 1.0}) {
        WealthLedger two = cumulative_return(crp, point2(1.0 - w2, w2),
                                             plain_run_input(cover_market(2)), FloorSchedule{0.0});
        CHECK(two.final_wealth() ==
              doctest::Approx((1.0 + w2) * (1.0 - w2 / 2.0)).epsilon(1e-14));
    }
}

TEST_CASE("cumulative_return applies the floor schedule") {
    CrpStrategy crp(2);
    RunInput input = plain_run_input(cover_market(2));
    FloorSchedule floor{0.4};
    WealthLedger ledger = cumulative_return(crp, point2(1.0, 0.0), input, floor);
    // t = 0: lambda = 0.2, allocation (0.9, 0.1), factor 0.9 + 0.2
    CHECK(ledger.daily_factor[0] == doctest::Approx(1.1).epsilon(1e-14));
    // t = 1: lambda = 0.05, allocation (0.975, 0.025), factor 0.975 + 0.0125
    CHECK(ledger.daily_factor[1] == doctest::Approx(0.9875).epsilon(1e-14));
}

TEST_CASE("floored wealth keeps at least a 1 - eps share of the raw wealth") {
    SeqRng rng(77);
    Eigen::VectorXd mu(3), sg(3);
    mu << 0.0, 0.05, -0.05;
    sg << 0.3, 0.2, 0.4;
    CrpStrategy crp(3);
    for (int trial = 0; trial < 30; ++trial) {
        RunInput input = plain_run_input(lognormal_market(mu, sg, 15, 100 + trial));
        Eigen::VectorXd w(3);
        w << rng.uniform(), rng.uniform(), rng.uniform();
        w /= w.sum();
        ParamPoint p = make_point(ParamSpace{3, 1}, w);
        double eps = 0.05 + 0.9 * rng.uniform();
        double raw = cumulative_return(crp, p, input, FloorSchedule{0.0}).final_log();
        double floored = cumulative_return(crp, p, input, FloorSchedule{eps}).final_log();
        CHECK(floored >= raw + std::log1p(-eps) - 1e-12);
    }
}

TEST_CASE("run inputs are validated against the strategy") {
    CrpStrategy crp(3);
    RunInput input = plain_run_input(cover_market(2));
    CHECK_THROWS_AS(cumulative_return(crp, point2(0.5, 0.5), input, FloorSchedule{}),
                    DimensionMismatch);
    CrpStrategy crp2(2);
    GridSpec grid3 = build_grid(ParamSpace{3, 1}, 0.5);
    CHECK_THROWS_AS(universal_run(crp2, grid3, input, FloorSchedule{}), DimensionMismatch);
}

TEST_CASE("weighted_log_mean is the log of the volume-weighted average") {
    GridSpec grid = build_grid(ParamSpace{2, 1}, 0.5); // weights 1/4, 1/2, 1/4
    std::vector<double> logs = {std::log(2.0), std::log(1.5), std::log(4.0)};
    double expect = std::log(0.25 * 2.0 + 0.5 * 1.5 + 0.25 * 4.0);
    CHECK(weighted_log_mean(grid, logs) == doctest::Approx(expect).epsilon(1e-14));

    std::vector<double> wrong = {0.0, 0.0};
    CHECK_THROWS_AS(weighted_log_mean(grid, wrong), LengthMismatch);

    GridSpec one = single_point_grid(point2(0.3, 0.7));
    std::vector<double> single = {-1.25};
    CHECK(weighted_log_mean(one, single) == doctest::Approx(-1.25).epsilon(1e-15));
}

TEST_CASE("universal_describe starts at the grid mean and reweights by wealth") {
    CrpStrategy crp(2);
    RunInput input = plain_run_input(cover_market(2));
    GridSpec grid = build_grid(ParamSpace{2, 1}, 0.5);
    FloorSchedule off{0.0};

    Eigen::VectorXd u0 = universal_describe(crp, grid, input, 0, off);
    CHECK(u0(0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(u0(1) == doctest::Approx(0.5).epsilon(1e-14));

    // day 1 weights each center by R_1 = w1 + 2 w2: masses (1/2, 3/4, 1/4)
    Eigen::VectorXd u1 = universal_describe(crp, grid, input, 1, off);
    CHECK(u1(0) == doctest::Approx(5.0 / 12.0).epsilon(1e-14));
    CHECK(u1(1) == doctest::Approx(7.0 / 12.0).epsilon(1e-14));

    CHECK_THROWS_AS(universal_describe(crp, grid, input, 2, off), LengthMismatch);
    CHECK_THROWS_AS(universal_describe(crp, grid, input, -1, off), LengthMismatch);
}

TEST_CASE("a one-point grid reproduces the pointwise strategy") {
    CrpStrategy crp(2);
    RunInput input = plain_run_input(cover_market(6));
    ParamPoint w = point2(0.3, 0.7);
    GridSpec grid = single_point_grid(w);
    FloorSchedule floor{0.25};

    Eigen::VectorXd u = universal_describe(crp, grid, input, 3, floor);
    Eigen::VectorXd expect = floor_transform(w.coords, 3, floor);
    CHECK((u - expect).lpNorm<Eigen::Infinity>() <= 1e-15);

    UniversalRun run = universal_run(crp, grid, input, floor);
    WealthLedger direct = cumulative_return(crp, w, input, floor);
    REQUIRE(run.ledger.days() == direct.days());
    for (std::size_t t = 0; t < direct.days(); ++t) {
        CHECK(run.ledger.daily_factor[t] == doctest::Approx(direct.daily_factor[t]).epsilon(1e-15));
        CHECK(run.best_log[t] == doctest::Approx(direct.log_wealth[t]).epsilon(1e-15));
    }
    CHECK(run.final_log_returns[0] == doctest::Approx(direct.final_log()).epsilon(1e-15));
}

TEST_CASE("universal wealth telescopes to the weighted grid mean") {
    struct Case {
        std::unique_ptr<Strategy> strategy;
        RunInput input;
        double delta;
    };
    PriceSeries walk = random_walk(20, 55);
    std::vector<PriceSeries> pair = {random_walk(20, 56), random_walk(20, 57)};
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd sg = Eigen::VectorXd::Constant(2, 0.35);

    std::vector<Case> cases;
    cases.push_back({std::make_unique<CrpStrategy>(2), plain_run_input(cover_market(16)), 0.1});
    cases.push_back({std::make_unique<CrpStrategy>(2),
                     plain_run_input(lognormal_market(mu, sg, 14, 5)), 0.1});
    cases.push_back({std::make_unique<CrpSideStrategy>(2, SideInfoModel{}),
                     crpside_run_input(lognormal_market(mu, sg, 12, 6)), 0.25});
    cases.push_back({std::make_unique<MaStrategy>(2, MaAlloc::line),
                     trading_run_input(walk, MarginSpec{1.0}, 2, true), 0.2});
    cases.push_back({std::make_unique<MaStrategy>(3, MaAlloc::step),
                     trading_run_input(walk, MarginSpec{1.0}, 3, true), 0.25});
    cases.push_back({std::make_unique<SrStrategy>(3, SrAlloc::smoothed, MarginSpec{0.8}),
                     trading_run_input(walk, MarginSpec{0.8}, 3, true), 0.25});
    cases.push_back({std::make_unique<IaStrategy>(2, 3), indicator_run_input(pair, 3), 0.2});

    for (const auto& c : cases) {
        GridSpec grid = build_grid(c.strategy->space(), c.delta);
        for (double eps : {0.0, 0.3}) {
            UniversalRun run = universal_run(*c.strategy, grid, c.input, FloorSchedule{eps});
            double mean = weighted_log_mean(grid, run.final_log_returns);
            CHECK(close_log(run.ledger.final_log(), mean, 1e-10));
        }
    }
}

TEST_CASE("kept descriptions match the recomputed ones") {
    CrpStrategy crp(2);
    RunInput input = plain_run_input(cover_market(6));
    GridSpec grid = build_grid(ParamSpace{2, 1}, 0.1);
    FloorSchedule floor{0.1};
    UniversalRun run = universal_run(crp, grid, input, floor, true);
    REQUIRE(run.descriptions.size() == 6);
    for (int t = 0; t < 6; ++t) {
        Eigen::VectorXd u = universal_describe(crp, grid, input, t, floor);
        CHECK((run.descriptions[static_cast<std::size_t>(t)] - u).lpNorm<Eigen::Infinity>() <=
              1e-14);
    }
}

TEST_CASE("descriptions stay inside the floored allocation hull") {
    IaStrategy ia(2, 3);
    std::vector<PriceSeries> pair = {random_walk(18, 60), random_walk(18, 61)};
    RunInput input = indicator_run_input(pair, 3);
    GridSpec grid = build_grid(ParamSpace{3, 1}, 0.2);
    FloorSchedule floor{0.2};
    UniversalRun run = universal_run(ia, grid, input, floor, true);
    for (std::size_t t = 0; t < input.days(); ++t) {
        double lo = 1.0, hi = 0.0;
        for (const auto& center : grid.centers) {
            Eigen::VectorXd s =
                floor_transform(ia.describe(center, input.envs[t]), input.envs[t].t, floor);
            lo = std::min(lo, s(0));
            hi = std::max(hi, s(0));
        }
        CHECK(run.descriptions[t](0) >= lo - 1e-12);
        CHECK(run.descriptions[t](0) <= hi + 1e-12);
    }
}

TEST_CASE("hindsight_optimum finds the best constant mix") {
    CrpStrategy crp(2);
    RunInput input = plain_run_input(cover_market(2));
    GridSpec grid = build_grid(ParamSpace{2, 1}, 0.5);
    HindsightOptimum best = hindsight_optimum(crp, grid, input, FloorSchedule{0.0});
    CHECK(best.index == 1);
    CHECK(best.point.coords(0) == doctest::Approx(0.5));
    CHECK(best.log_value == doctest::Approx(std::log(9.0 / 8.0)).epsilon(1e-14));

    // doubling market: all mass on the growing stock, vertex (0, 1) is center 0
    MarketSeries doubling = constant_market(2, 3);
    for (auto& x : doubling.returns) x(1) = 2.0;
    HindsightOptimum vertex =
        hindsight_optimum(crp, grid, plain_run_input(doubling), FloorSchedule{0.0});
    CHECK(vertex.index == 0);
    CHECK(vertex.point.coords(1) == doctest::Approx(1.0));
    CHECK(vertex.log_value == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-14));

    // flat market: every center ties, lowest index wins
    HindsightOptimum tie =
        hindsight_optimum(crp, grid, plain_run_input(constant_market(2, 4)), FloorSchedule{0.0});
    CHECK(tie.index == 0);
    CHECK(tie.log_value == doctest::Approx(0.0));
}

TEST_CASE("regret is nonnegative and shrinks toward the known two-day gap") {
    CrpStrategy crp(2);
    RunInput input = plain_run_input(cover_market(2));
    GridSpec grid = build_grid(ParamSpace{2, 1}, 0.001);
    UniversalRun run = universal_run(crp, grid, input, FloorSchedule{0.0});
    std::vector<double> gap = regret_series(run.best_log, run.ledger.log_wealth);
    REQUIRE(gap.size() == 2);
    for (double g : gap) CHECK(g >= -1e-12);
    // best log 9/8 sits on-grid; universal wealth approaches 13/12
    CHECK(gap[1] == doctest::Approx(0.5 * std::log(27.0 / 26.0)).epsilon(1e-5));

    std::vector<double> short_series = {0.0};
    CHECK_THROWS_AS(regret_series(run.best_log, short_series), LengthMismatch);
}

TEST_CASE("finer grids approach the continuum universal wealth") {
    CrpStrategy crp(2);
    RunInput input = plain_run_input(cover_market(2));
    double target = 13.0 / 12.0;
    double coarse = std::abs(universal_run(crp, build_grid(ParamSpace{2, 1}, 0.02), input,
                                           FloorSchedule{0.0})
                                 .ledger.final_wealth() -
                             target);
    double fine = std::abs(universal_run(crp, build_grid(ParamSpace{2, 1}, 0.002), input,
                                         FloorSchedule{0.0})
                               .ledger.final_wealth() -
                           target);
    CHECK(fine < coarse);
    CHECK(fine < 1e-6);
}

TEST_CASE("schedules are built and validated strictly") {
    DynamicSchedule schedule = DynamicSchedule::from_lengths({2, 3});
    REQUIRE(schedule.intervals.size() == 2);
    CHECK(schedule.intervals[0] == std::pair<int, int>{0, 2});
    CHECK(schedule.intervals[1] == std::pair<int, int>{2, 5});
    CHECK_NOTHROW(validate_schedule(schedule, 5));
    CHECK_THROWS_AS(validate_schedule(schedule, 6), PartitionError);
    CHECK_THROWS_AS(validate_schedule(DynamicSchedule{}, 0), PartitionError);
    CHECK_THROWS_AS(DynamicSchedule::from_lengths({2, 0}), PartitionError);

    DynamicSchedule gap;
    gap.intervals = {{0, 2}, {3, 5}};
    CHECK_THROWS_AS(validate_schedule(gap, 5), PartitionError);
    DynamicSchedule overlap;
    overlap.intervals = {{0, 3}, {2, 5}};
    CHECK_THROWS_AS(validate_schedule(overlap, 5), PartitionError);
    DynamicSchedule backwards;
    backwards.intervals = {{0, 0}};
    CHECK_THROWS_AS(validate_schedule(backwards, 0), PartitionError);
}

TEST_CASE("a single interval reproduces the static universal run") {
    CrpStrategy crp(2);
    RunInput input = plain_run_input(cover_market(6));
    GridSpec grid = build_grid(ParamSpace{2, 1}, 0.1);
    FloorSchedule floor{0.1};
    UniversalRun stat = universal_run(crp, grid, input, floor);
    UniversalRun dyn = dynamic_universal_run(crp, grid, input,
                                             DynamicSchedule::from_lengths({6}), floor);
    REQUIRE(dyn.ledger.days() == stat.ledger.days());
    for (std::size_t t = 0; t < 6; ++t) {
        CHECK(dyn.ledger.daily_factor[t] == doctest::Approx(stat.ledger.daily_factor[t]).epsilon(1e-15));
        CHECK(dyn.best_log[t] == doctest::Approx(stat.best_log[t]).epsilon(1e-15));
    }
}

TEST_CASE("daily restarts reduce to a product of day bests") {
    CrpStrategy crp(2);
    RunInput input = plain_run_input(cover_market(4));
    GridSpec grid = build_grid(ParamSpace{2, 1}, 0.25);
    UniversalRun run = dynamic_universal_run(crp, grid, input,
                                             DynamicSchedule::from_lengths({1, 1, 1, 1}),
                                             FloorSchedule{0.0}, true);
    // every interval starts from the uniform description
    for (const auto& u : run.descriptions) {
        CHECK(u(0) == doctest::Approx(0.5).epsilon(1e-14));
    }
    CHECK(run.ledger.daily_factor[0] == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(run.ledger.daily_factor[1] == doctest::Approx(0.75).epsilon(1e-14));
    // per-day benchmark picks the day's best vertex: 2, 1, 2, 1
    CHECK(run.best_log[0] == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(run.best_log[1] == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(run.best_log[3] == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("two-interval split squares the two-day universal wealth") {
    CrpStrategy crp(2);
    RunInput input = plain_run_input(cover_market(4));
    GridSpec grid = build_grid(ParamSpace{2, 1}, 0.001);
    UniversalRun run = dynamic_universal_run(crp, grid, input,
                                             DynamicSchedule::from_lengths({2, 2}),
                                             FloorSchedule{0.0});
    double target = (13.0 / 12.0) * (13.0 / 12.0);
    CHECK(run.ledger.final_wealth() == doctest::Approx(target).epsilon(1e-6));
    CHECK(run.best_log.back() == doctest::Approx(2.0 * std::log(9.0 / 8.0)).epsilon(1e-12));

    std::vector<double> gap = regret_series(run.best_log, run.ledger.log_wealth);
    CHECK(gap.back() == doctest::Approx(0.25 * std::log(729.0 / 676.0)).epsilon(1e-4));

    CHECK_THROWS_AS(dynamic_universal_run(crp, grid, input, DynamicSchedule::from_lengths({2, 3}),
                                          FloorSchedule{0.0}),
                    PartitionError);
}
