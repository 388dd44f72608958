#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "regime/market_data.hpp"

namespace fs = std::filesystem;
using namespace regime;

namespace {

fs::path write_temp(const std::string& name, const std::string& body) {
    fs::path dir = fs::temp_directory_path() / "regime_md_tests";
    fs::create_directories(dir);
    fs::path p = dir / name;
    std::ofstream out(p);
    out << body;
    return p;
}

}  // namespace

TEST_CASE("level ingestion computes simple returns and drops the first row") {
    auto p = write_temp("levels.csv",
                        "date,spx,riskfree\n"
                        "2020-01-01,100,2.0\n"
                        "2020-01-02,101,2.0\n"
                        "2020-01-03,99.99,2.0\n");
    IngestConfig cfg;
    cfg.kind = SeriesKind::Levels;
    ReturnPanel panel = load_return_panel(p.string(), cfg);
    REQUIRE(panel.size() == 2);
    REQUIRE(panel.assets == std::vector<std::string>{"spx"});
    CHECK(panel.returns(0, 0) == Catch::Approx(0.01).epsilon(1e-12));
    CHECK(panel.returns(1, 0) == Catch::Approx(99.99 / 101.0 - 1.0).epsilon(1e-12));
    CHECK(panel.dates[0] == parse_date("2020-01-02"));
}

TEST_CASE("return ingestion keeps the first usable row") {
    auto p = write_temp("rets.csv",
                        "date,a,riskfree\n"
                        "2020-01-01,0.01,0.0\n"
                        "2020-01-02,-0.02,0.0\n");
    IngestConfig cfg;
    cfg.kind = SeriesKind::Returns;
    ReturnPanel panel = load_return_panel(p.string(), cfg);
    REQUIRE(panel.size() == 2);
    CHECK(panel.returns(0, 0) == 0.01);
    CHECK(panel.returns(1, 0) == -0.02);
    CHECK(panel.risk_free[0] == 0.0);
}

TEST_CASE("annual yield conversion round-trips") {
    for (double y : {0.0, 0.5, 2.0, 5.25, 12.0}) {
        const double daily = annual_yield_to_daily(y);
        const double back = 100.0 * (std::pow(1.0 + daily, kTradingDaysPerYear) - 1.0);
        CHECK(back == Catch::Approx(y).margin(1e-10));
    }
    CHECK(annual_yield_to_daily(0.0) == 0.0);
}

TEST_CASE("leading incomplete rows are trimmed, interior gaps rejected") {
    auto ok = write_temp("lead_nan.csv",
                         "date,a,riskfree\n"
                         "2020-01-01,,2.0\n"
                         "2020-01-02,0.01,2.0\n"
                         "2020-01-03,0.02,2.0\n");
    IngestConfig cfg;
    cfg.kind = SeriesKind::Returns;
    ReturnPanel panel = load_return_panel(ok.string(), cfg);
    REQUIRE(panel.size() == 2);
    CHECK(panel.dates[0] == parse_date("2020-01-02"));

    auto bad = write_temp("gap.csv",
                          "date,a,riskfree\n"
                          "2020-01-01,0.01,2.0\n"
                          "2020-01-02,,2.0\n"
                          "2020-01-03,0.02,2.0\n");
    CHECK_THROWS_AS(load_return_panel(bad.string(), cfg), std::runtime_error);
}

TEST_CASE("loader rejects malformed inputs") {
    IngestConfig cfg;
    cfg.kind = SeriesKind::Returns;

    auto no_rf = write_temp("no_rf.csv", "date,a\n2020-01-01,0.01\n2020-01-02,0.02\n");
    CHECK_THROWS_AS(load_return_panel(no_rf.string(), cfg), std::runtime_error);

    auto dup = write_temp("dup.csv",
                          "date,a,riskfree\n"
                          "2020-01-02,0.01,2.0\n"
                          "2020-01-02,0.02,2.0\n");
    CHECK_THROWS_AS(load_return_panel(dup.string(), cfg), std::runtime_error);

    auto crash = write_temp("crash.csv",
                            "date,a,riskfree\n"
                            "2020-01-01,0.01,2.0\n"
                            "2020-01-02,-1.5,2.0\n");
    CHECK_THROWS_AS(load_return_panel(crash.string(), cfg), std::runtime_error);

    auto short_file = write_temp("short.csv", "date,a,riskfree\n2020-01-01,0.01,2.0\n");
    CHECK_THROWS_AS(load_return_panel(short_file.string(), cfg), std::runtime_error);
}

TEST_CASE("separate risk-free file must cover every panel date") {
    auto main_csv = write_temp("main.csv",
                               "date,a\n"
                               "2020-01-01,0.01\n"
                               "2020-01-02,0.02\n");
    auto rf_full = write_temp("rf_full.csv",
                              "date,riskfree\n"
                              "2019-12-31,2.0\n"
                              "2020-01-01,2.0\n"
                              "2020-01-02,3.0\n");
    IngestConfig cfg;
    cfg.kind = SeriesKind::Returns;
    cfg.risk_free_path = rf_full.string();
    ReturnPanel panel = load_return_panel(main_csv.string(), cfg);
    REQUIRE(panel.size() == 2);
    CHECK(panel.risk_free[1] == Catch::Approx(annual_yield_to_daily(3.0)).epsilon(1e-14));

    auto rf_missing = write_temp("rf_missing.csv", "date,riskfree\n2020-01-01,2.0\n");
    cfg.risk_free_path = rf_missing.string();
    CHECK_THROWS_AS(load_return_panel(main_csv.string(), cfg), std::runtime_error);
}

TEST_CASE("macro loader reads all five series and checks dates") {
    auto p = write_temp("macro.csv",
                        "date,yield_2y,yield_slope_10y_2y,vix_level,stock_returns,bond_returns\n"
                        "2020-01-01,1.5,1.0,15,0.001,-0.0005\n"
                        "2020-01-02,1.6,0.9,16,-0.002,0.0003\n");
    MacroPanel m = load_macro_panel(p.string());
    REQUIRE(m.dates.size() == 2);
    CHECK(m.yield_2y[1] == 1.6);
    CHECK(m.vix_level[0] == 15.0);
    CHECK(m.bond_returns[1] == 0.0003);

    auto bad = write_temp("macro_bad.csv",
                          "date,yield_2y,yield_slope_10y_2y,vix_level,stock_returns,bond_returns\n"
                          "2020-01-02,1.5,1.0,15,0.001,-0.0005\n"
                          "2020-01-01,1.6,0.9,16,-0.002,0.0003\n");
    CHECK_THROWS_AS(load_macro_panel(bad.string()), std::runtime_error);
}

TEST_CASE("adjusted ewm mean matches the explicit weighted form") {
    SECTION("halflife 1 hand example") {
        std::vector<double> out = ewm_mean({0.0, 2.0}, 1.0);
        CHECK(out[0] == 0.0);
        CHECK(out[1] == Catch::Approx(4.0 / 3.0).epsilon(1e-15));
    }
    SECTION("matches explicit decayed-weight sums") {
        std::mt19937 rng(7);
        std::normal_distribution<double> g;
        std::vector<double> x(40);
        for (double& v : x) v = g(rng);
        const double hl = 9.5;
        const double decay = std::pow(2.0, -1.0 / hl);
        std::vector<double> out = ewm_mean(x, hl);
        for (std::size_t t : {std::size_t(0), std::size_t(5), std::size_t(39)}) {
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i <= t; ++i) {
                const double w = std::pow(decay, double(t - i));
                num += w * x[i];
                den += w;
            }
            CHECK(out[t] == Catch::Approx(num / den).margin(1e-12));
        }
    }
    SECTION("halflife 0 is the identity") {
        std::vector<double> x = {3.0, -1.0, 2.5};
        CHECK(ewm_mean(x, 0.0) == x);
    }
    SECTION("output stays inside the running min and max") {
        std::mt19937 rng(11);
        std::normal_distribution<double> g;
        std::vector<double> x(200);
        for (double& v : x) v = g(rng);
        std::vector<double> out = ewm_mean(x, 4.0);
        double lo = x[0], hi = x[0];
        for (std::size_t t = 0; t < x.size(); ++t) {
            lo = std::min(lo, x[t]);
            hi = std::max(hi, x[t]);
            CHECK(out[t] >= lo - 1e-12);
            CHECK(out[t] <= hi + 1e-12);
        }
    }
}

TEST_CASE("running ewm accumulator matches the batch function") {
    std::mt19937 rng(3);
    std::normal_distribution<double> g;
    std::vector<double> x(64);
    for (double& v : x) v = g(rng);
    std::vector<double> batch = ewm_mean(x, 21.0);
    EwmMeanAccumulator acc(21.0);
    CHECK(acc.empty());
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double v = acc.add(x[t]);
        CHECK(v == batch[t]);
        CHECK(acc.value() == v);
    }
    CHECK_FALSE(acc.empty());
}

TEST_CASE("ewm covariance matches an explicit weighted oracle") {
    // Oracle: decayed weights w_i = d^(T-1-i), weighted mean subtraction.
    std::mt19937 rng(5);
    std::normal_distribution<double> g;
    const std::size_t t_count = 30, n = 3;
    Matrix x(t_count, n);
    for (std::size_t t = 0; t < t_count; ++t)
        for (std::size_t j = 0; j < n; ++j) x(t, j) = g(rng);

    const double hl = 4.0, decay = std::pow(2.0, -1.0 / hl);
    EwmCovAccumulator acc(n, hl);
    for (std::size_t t = 0; t < t_count; ++t) acc.add(x.row(t));
    Matrix cov = acc.covariance(0.0);

    std::vector<double> w(t_count), m(n, 0.0);
    double sw = 0.0;
    for (std::size_t t = 0; t < t_count; ++t) {
        w[t] = std::pow(decay, double(t_count - 1 - t));
        sw += w[t];
    }
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t t = 0; t < t_count; ++t) m[j] += w[t] * x(t, j);
        m[j] /= sw;
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double c = 0.0;
            for (std::size_t t = 0; t < t_count; ++t) c += w[t] * (x(t, i) - m[i]) * (x(t, j) - m[j]);
            c /= sw;
            CHECK(cov(i, j) == Catch::Approx(c).margin(1e-12));
        }
}

TEST_CASE("ewm covariance edge behavior") {
    SECTION("identical columns give equal entries up to the ridge") {
        EwmCovAccumulator acc(2, 10.0);
        std::mt19937 rng(9);
        std::normal_distribution<double> g;
        for (int t = 0; t < 50; ++t) {
            double v = g(rng);
            double row[2] = {v, v};
            acc.add(row);
        }
        Matrix cov = acc.covariance();
        CHECK(cov(0, 1) == Catch::Approx(cov(0, 0) - 1e-10).margin(1e-14));
        CHECK(cov(0, 0) == cov(1, 1));
    }
    SECTION("constant series leaves only the ridge") {
        EwmCovAccumulator acc(1, 10.0);
        for (int t = 0; t < 20; ++t) {
            double v = 0.42;
            acc.add(&v);
        }
        CHECK(acc.covariance()(0, 0) == Catch::Approx(1e-10).margin(1e-16));
    }
    SECTION("fewer than two observations is an error") {
        EwmCovAccumulator acc(1, 10.0);
        double v = 1.0;
        acc.add(&v);
        CHECK_THROWS_AS(acc.covariance(), std::runtime_error);
        CHECK_THROWS_AS(EwmCovAccumulator(2, 0.0), std::invalid_argument);
    }
}

TEST_CASE("ewm_covariance helper stops at the as-of date") {
    ReturnPanel panel;
    panel.assets = {"a"};
    panel.dates = {1, 2, 3, 4};
    panel.returns = Matrix(4, 1);
    panel.risk_free.assign(4, 0.0);
    panel.returns(0, 0) = 0.01;
    panel.returns(1, 0) = -0.01;
    panel.returns(2, 0) = 5.0;  // past the as-of date, must be ignored
    panel.returns(3, 0) = 5.0;

    Matrix cov = ewm_covariance(panel, 10.0, 2);
    EwmCovAccumulator acc(1, 10.0);
    double v = 0.01;
    acc.add(&v);
    v = -0.01;
    acc.add(&v);
    CHECK(cov(0, 0) == acc.covariance()(0, 0));
    CHECK_THROWS_AS(ewm_covariance(panel, 10.0, 0), std::runtime_error);
}

TEST_CASE("rolling correlation hand cases") {
    SECTION("perfect anti-correlation") {
        std::vector<double> x = {1, 2, 3, 4}, y = {4, 3, 2, 1};
        std::vector<double> c = rolling_correlation(x, y, 3);
        CHECK(std::isnan(c[0]));
        CHECK(std::isnan(c[1]));
        CHECK(c[2] == Catch::Approx(-1.0).margin(1e-14));
        CHECK(c[3] == Catch::Approx(-1.0).margin(1e-14));
    }
    SECTION("zero variance window is unavailable") {
        std::vector<double> x = {1, 1, 1}, y = {1, 2, 3};
        std::vector<double> c = rolling_correlation(x, y, 3);
        CHECK(std::isnan(c[2]));
    }
    SECTION("mixed window matches a direct Pearson computation") {
        std::vector<double> x = {0.5, -1.0, 2.0, 0.0}, y = {1.0, 1.5, -0.5, 2.0};
        std::vector<double> c = rolling_correlation(x, y, 3);
        // direct computation over the last window
        double mx = (2.0 + 0.0 - 1.0) / 3, my = (1.5 - 0.5 + 2.0) / 3;
        double sxx = 0, syy = 0, sxy = 0;
        for (int i = 1; i < 4; ++i) {
            sxx += (x[i] - mx) * (x[i] - mx);
            syy += (y[i] - my) * (y[i] - my);
            sxy += (x[i] - mx) * (y[i] - my);
        }
        CHECK(c[3] == Catch::Approx(sxy / std::sqrt(sxx * syy)).margin(1e-14));
    }
    SECTION("argument validation") {
        CHECK_THROWS_AS(rolling_correlation({1, 2}, {1, 2}, 1), std::invalid_argument);
        CHECK_THROWS_AS(rolling_correlation({1, 2}, {1}, 2), std::invalid_argument);
    }
}

TEST_CASE("panel helpers") {
    ReturnPanel panel;
    panel.assets = {"a", "b"};
    panel.dates = {10, 20, 30};
    panel.returns = Matrix(3, 2);
    panel.risk_free = {0.001, 0.001, 0.001};
    panel.returns(1, 1) = 0.05;
    CHECK(panel.asset_index("b") == 1);
    CHECK(panel.asset_index("zzz") == -1);
    CHECK(panel.lower_bound(20) == 1);
    CHECK(panel.lower_bound(21) == 2);
    CHECK(panel.lower_bound(99) == 3);
    CHECK(panel.excess(1, 1) == Catch::Approx(0.049).margin(1e-15));
}
