#include "doctest.h"

#include "unistrat/errors.hpp"
#include "unistrat/market.hpp"
#include "unistrat/rng.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace unistrat;

namespace {

std::string write_temp_csv(const std::string& name, const std::string& body) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << body;
    return path.string();
}

} // namespace

TEST_CASE("short_return values") {
    CHECK(short_return(1.0, MarginSpec{0.5}) == 1.0);
    CHECK(short_return(1.0, MarginSpec{1.0}) == 1.0);
    CHECK(short_return(0.5, MarginSpec{0.5}) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(short_return(1.5, MarginSpec{1.0}) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(short_return(0.5, MarginSpec{0.25}) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("short_return rejects margins outside (0, 1]") {
    CHECK_THROWS_AS(short_return(0.5, MarginSpec{0.0}), DataError);
    CHECK_THROWS_AS(short_return(0.5, MarginSpec{-0.5}), DataError);
    CHECK_THROWS_AS(short_return(0.5, MarginSpec{1.5}), DataError);
    PriceSeries prices{"p", {1.0, 1.1}};
    CHECK_THROWS_AS(trading_market(prices, MarginSpec{2.0}), DataError);
}

TEST_CASE("short_return breaches at and beyond the margin line") {
    CHECK_THROWS_AS(short_return(2.0, MarginSpec{1.0}), MarginBreach);
    CHECK_THROWS_AS(short_return(2.5, MarginSpec{1.0}), MarginBreach);
    CHECK_THROWS_AS(short_return(1.5, MarginSpec{0.5}), MarginBreach);
    // any positive factor below the line is fine
    CHECK(short_return(1.999, MarginSpec{1.0}) > 0.0);
}

TEST_CASE("short_return decreases in x and is positive on its domain") {
    MarginSpec margin{0.7};
    double prev = short_return(1e-6, margin);
    for (double x = 0.05; x < 1.0 + margin.alpha; x += 0.05) {
        double r = short_return(x, margin);
        CHECK(r > 0.0);
        CHECK(r < prev);
        prev = r;
    }
}

TEST_CASE("trading_market long and short factors") {
    PriceSeries prices{"p", {1.0, 1.8, 0.9}};
    MarketSeries market = trading_market(prices, MarginSpec{1.0});
    REQUIRE(market.m == 2);
    REQUIRE(market.days() == 2);
    CHECK(market.returns[0](0) == doctest::Approx(1.8).epsilon(1e-15));
    CHECK(market.returns[0](1) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(market.returns[1](0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(market.returns[1](1) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("trading_market on a flat series is all ones") {
    PriceSeries prices{"p", {1.0, 1.0, 1.0}};
    MarketSeries market = trading_market(prices, MarginSpec{1.0});
    for (const auto& x : market.returns) {
        CHECK(x(0) == 1.0);
        CHECK(x(1) == 1.0);
    }
}

TEST_CASE("trading_market reports the breaching day") {
    PriceSeries prices{"p", {1.0, 1.0, 2.0}};
    try {
        trading_market(prices, MarginSpec{1.0});
        FAIL("expected MarginBreach");
    } catch (const MarginBreach& e) {
        CHECK(e.day == 1);
    }
}

TEST_CASE("trading_market clamp mode records days and keeps factors positive") {
    PriceSeries prices{"p", {1.0, 2.0, 1.0, 3.0}};
    std::vector<long> clamped;
    MarketSeries market = trading_market(prices, MarginSpec{1.0}, true, &clamped);
    REQUIRE(clamped.size() == 2); // x = 2 on day 0, x = 3 on day 2
    CHECK(clamped[0] == 0);
    CHECK(clamped[1] == 2);
    for (const auto& x : market.returns) {
        CHECK(x(1) > 0.0);
    }
    // clamped factor sits just below the wipe-out point
    CHECK(market.returns[0](1) == doctest::Approx(2e-9).epsilon(1e-3));
}

TEST_CASE("no-position mix of long and short returns exactly 1") {
    for (double alpha : {0.25, 0.5, 1.0}) {
        MarginSpec margin{alpha};
        double w_long = 1.0 / (alpha + 1.0);
        double w_short = alpha / (alpha + 1.0);
        SeqRng rng(31);
        for (int i = 0; i < 200; ++i) {
            double x = rng.uniform(0.01, 1.0 + alpha - 0.01);
            double mix = w_long * x + w_short * short_return(x, margin);
            CHECK(mix == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("cover_market alternates the swing stock") {
    MarketSeries market = cover_market(5);
    REQUIRE(market.days() == 5);
    CHECK(market.labels[0] == "hold");
    CHECK(market.labels[1] == "swing");
    for (int t = 0; t < 5; ++t) {
        CHECK(market.returns[t](0) == 1.0);
        CHECK(market.returns[t](1) == (t % 2 == 0 ? 2.0 : 0.5));
    }
}

TEST_CASE("constant_market is all ones") {
    MarketSeries market = constant_market(3, 4);
    REQUIRE(market.m == 3);
    REQUIRE(market.days() == 4);
    for (const auto& x : market.returns) {
        for (int i = 0; i < 3; ++i) CHECK(x(i) == 1.0);
    }
    CHECK(market.labels[0] == "const1");
    CHECK(market.labels[2] == "const3");
}

TEST_CASE("lognormal_market is seed-deterministic and positive") {
    Eigen::VectorXd mu(2), sigma(2);
    mu << 0.05, 0.0;
    sigma << 0.3, 0.2;
    MarketSeries a = lognormal_market(mu, sigma, 50, 7);
    MarketSeries b = lognormal_market(mu, sigma, 50, 7);
    MarketSeries c = lognormal_market(mu, sigma, 50, 8);
    REQUIRE(a.days() == 50);
    bool differs = false;
    for (int t = 0; t < 50; ++t) {
        CHECK(a.returns[t] == b.returns[t]);
        CHECK(a.returns[t].minCoeff() > 0.0);
        if (a.returns[t] != c.returns[t]) differs = true;
    }
    CHECK(differs);
}

TEST_CASE("normalize_environment scales by the window maximum") {
    std::vector<double> prices = {1.0, 2.0, 4.0};
    EnvironmentSnapshot env = normalize_environment(prices, 2);
    REQUIRE(env.price_history.size() == 2);
    CHECK(env.price_history(0) == doctest::Approx(0.5));  // one day back
    CHECK(env.price_history(1) == doctest::Approx(0.25)); // two days back
    CHECK(env.current_price == 1.0);
    CHECK(env.min_history(0) == doctest::Approx(0.5));
    CHECK(env.min_history(1) == doctest::Approx(0.25));
    CHECK(env.max_history(0) == doctest::Approx(0.5));
    CHECK(env.max_history(1) == doctest::Approx(0.5));
}

TEST_CASE("normalize_environment invariants on random walks") {
    SeqRng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        int k = 1 + static_cast<int>(rng.uniform_int(5));
        std::vector<double> prices(k + 1);
        double p = 1.0;
        for (auto& v : prices) {
            p *= std::exp(rng.uniform(-0.2, 0.2));
            v = p;
        }
        EnvironmentSnapshot env = normalize_environment(prices, k);
        double top = env.current_price;
        for (int j = 0; j < k; ++j) {
            CHECK(env.price_history(j) > 0.0);
            CHECK(env.price_history(j) <= 1.0);
            CHECK(env.min_history(j) <= env.max_history(j) + 1e-15);
            CHECK(env.max_history(j) <= 1.0);
            top = std::max({top, env.price_history(j), env.max_history(j)});
        }
        CHECK(top == doctest::Approx(1.0).epsilon(1e-12)); // something attains the max
    }
}

TEST_CASE("normalize_environment needs k+1 prices") {
    std::vector<double> prices = {1.0, 2.0};
    CHECK_THROWS_AS(normalize_environment(prices, 2), InsufficientHistory);
}

TEST_CASE("ingest_csv parses a well-formed file") {
    auto path = write_temp_csv("unistrat_ok.csv",
                               "date,aaa,bbb\n"
                               "2020-01-01,1.5,2\n"
                               "2020-01-02,1.25,2.5\n"
                               "2020-01-03,2,0.125\n");
    auto series = ingest_csv(path);
    REQUIRE(series.size() == 2);
    CHECK(series[0].ticker == "aaa");
    CHECK(series[1].ticker == "bbb");
    REQUIRE(series[0].prices.size() == 3);
    CHECK(series[0].prices[1] == 1.25);
    CHECK(series[1].prices[2] == 0.125);
    std::remove(path.c_str());
}

TEST_CASE("ingest_csv rejects nonpositive prices with location") {
    auto path = write_temp_csv("unistrat_zero.csv",
                               "date,aaa\n"
                               "2020-01-01,1\n"
                               "2020-01-02,0\n");
    try {
        ingest_csv(path);
        FAIL("expected NonPositivePrice");
    } catch (const NonPositivePrice& e) {
        CHECK(e.row == 2);
        CHECK(e.col == 1);
    }
    std::remove(path.c_str());
}

TEST_CASE("ingest_csv rejects out-of-order dates") {
    auto path = write_temp_csv("unistrat_dates.csv",
                               "date,aaa\n"
                               "2020-01-02,1\n"
                               "2020-01-01,2\n");
    CHECK_THROWS_AS(ingest_csv(path), ParseError);
    std::remove(path.c_str());
}

TEST_CASE("ingest_csv rejects malformed numbers and missing files") {
    auto path = write_temp_csv("unistrat_bad.csv",
                               "date,aaa\n"
                               "2020-01-01,1x\n");
    CHECK_THROWS_AS(ingest_csv(path), ParseError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(ingest_csv("/nonexistent/unistrat.csv"), DataError);
}

TEST_CASE("plain_run_input carries day indices") {
    RunInput input = plain_run_input(cover_market(3));
    REQUIRE(input.days() == 3);
    REQUIRE(input.envs.size() == 3);
    for (int t = 0; t < 3; ++t) CHECK(input.envs[t].t == t);
}

TEST_CASE("crpside_run_input feeds the previous day's returns as side info") {
    MarketSeries market = cover_market(3);
    RunInput input = crpside_run_input(market);
    REQUIRE(input.envs.size() == 3);
    CHECK(input.envs[0].side_info == Eigen::VectorXd::Ones(2));
    CHECK(input.envs[1].side_info == market.returns[0]);
    CHECK(input.envs[2].side_info == market.returns[1]);
}

TEST_CASE("trading_run_input aligns windows, returns, and day indices") {
    PriceSeries prices{"p", {1.0, 2.0, 4.0, 2.0}};
    RunInput input = trading_run_input(prices, MarginSpec{1.0}, 2, true);
    // tradable price days are 2..2, so one run day
    REQUIRE(input.days() == 1);
    CHECK(input.envs[0].t == 0);
    CHECK(input.market.returns[0](0) == doctest::Approx(0.5)); // 2/4
    CHECK(input.envs[0].price_history(0) == doctest::Approx(0.5));  // 2/4
    CHECK(input.envs[0].price_history(1) == doctest::Approx(0.25)); // 1/4
    CHECK(input.envs[0].current_price == 1.0);
}

TEST_CASE("trading_run_input needs enough prices for one day") {
    PriceSeries prices{"p", {1.0, 2.0}};
    CHECK_THROWS_AS(trading_run_input(prices, MarginSpec{1.0}, 2), InsufficientHistory);
}

TEST_CASE("indicator_run_input builds cross-sectionally normalized momentum") {
    std::vector<PriceSeries> series = {{"a", {1.0, 2.0, 4.0, 4.0}}, {"b", {1.0, 1.0, 1.0, 2.0}}};
    RunInput input = indicator_run_input(series, 2);
    // price days 2..2 tradable, m = 2, k = 2
    REQUIRE(input.days() == 1);
    REQUIRE(input.market.m == 2);
    CHECK(input.market.returns[0](0) == doctest::Approx(1.0)); // 4/4
    CHECK(input.market.returns[0](1) == doctest::Approx(2.0)); // 2/1
    const Eigen::MatrixXd& ind = input.envs[0].indicators;
    REQUIRE(ind.rows() == 2);
    REQUIRE(ind.cols() == 2);
    // raw column 1: a 4/2=2, b 1/1=1; column 2: a 4/1=4, b 1/1=1; each over its max
    CHECK(ind(0, 0) == doctest::Approx(1.0));
    CHECK(ind(1, 0) == doctest::Approx(0.5));
    CHECK(ind(0, 1) == doctest::Approx(1.0));
    CHECK(ind(1, 1) == doctest::Approx(0.25));
    CHECK(ind.colwise().maxCoeff().minCoeff() == doctest::Approx(1.0));
}
