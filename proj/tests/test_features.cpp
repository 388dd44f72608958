#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "regime/features.hpp"

using namespace regime;

namespace {

MacroPanel flat_macro(std::size_t t_count) {
    MacroPanel m;
    for (std::size_t t = 0; t < t_count; ++t) {
        m.dates.push_back(Date(t));
        m.yield_2y.push_back(1.5);
        m.yield_slope_10y_2y.push_back(1.0);
        m.vix_level.push_back(15.0);
        // dyadic constants so zero-variance windows are exactly zero
        m.stock_returns.push_back(0.00390625);
        m.bond_returns.push_back(0.001953125);
    }
    return m;
}

}  // namespace

TEST_CASE("return features on all-zero returns hit the downside floor") {
    std::vector<double> x(30, 0.0);
    FeatureMatrix f = return_features(x);
    REQUIRE(f.dim() == 8);
    const double floor_log = std::log(kDownsideDeviationFloor);
    for (std::size_t t = 0; t < f.size(); ++t) {
        CHECK(f.values(t, 0) == floor_log);
        CHECK(f.values(t, 1) == floor_log);
        CHECK(f.values(t, 2) == 0.0);  // averages of zeros
        CHECK(f.values(t, 5) == 0.0);  // sortino numerator zero
    }
}

TEST_CASE("constant negative returns give sortino near -1") {
    // When every return equals -c, DD converges to c and avg to -c.
    std::vector<double> x(400, -0.01);
    FeatureMatrix f = return_features(x);
    const std::size_t last = f.size() - 1;
    CHECK(f.values(last, 0) == Catch::Approx(std::log(0.01)).margin(1e-9));
    CHECK(f.values(last, 2) == Catch::Approx(-0.01).margin(1e-15));
    CHECK(f.values(last, 5) == Catch::Approx(-1.0).margin(1e-9));
    CHECK(f.values(last, 6) == Catch::Approx(-1.0).margin(1e-9));
    CHECK(f.values(last, 7) == Catch::Approx(-1.0).margin(1e-9));
}

TEST_CASE("return features match a direct recomputation") {
    std::mt19937 rng(17);
    std::normal_distribution<double> g(0.0, 0.01);
    std::vector<double> x(120);
    for (double& v : x) v = g(rng);
    FeatureMatrix f = return_features(x);

    auto ewm_oracle = [&](const std::vector<double>& s, double hl, std::size_t t) {
        const double d = std::pow(2.0, -1.0 / hl);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i <= t; ++i) {
            const double w = std::pow(d, double(t - i));
            num += w * s[i];
            den += w;
        }
        return num / den;
    };
    std::vector<double> neg_sq(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double d = std::min(x[t], 0.0);
        neg_sq[t] = d * d;
    }
    for (std::size_t t : {std::size_t(3), std::size_t(60), std::size_t(119)}) {
        const double dd5 = std::sqrt(ewm_oracle(neg_sq, 5.0, t));
        const double dd10 = std::sqrt(ewm_oracle(neg_sq, 10.0, t));
        const double dd21 = std::sqrt(ewm_oracle(neg_sq, 21.0, t));
        const double a5 = ewm_oracle(x, 5.0, t);
        const double a10 = ewm_oracle(x, 10.0, t);
        const double a21 = ewm_oracle(x, 21.0, t);
        CHECK(f.values(t, 0) == Catch::Approx(std::log(std::max(dd5, kDownsideDeviationFloor))).margin(1e-10));
        CHECK(f.values(t, 1) == Catch::Approx(std::log(std::max(dd21, kDownsideDeviationFloor))).margin(1e-10));
        CHECK(f.values(t, 2) == Catch::Approx(a5).margin(1e-12));
        CHECK(f.values(t, 3) == Catch::Approx(a10).margin(1e-12));
        CHECK(f.values(t, 4) == Catch::Approx(a21).margin(1e-12));
        CHECK(f.values(t, 5) == Catch::Approx(a5 / std::max(dd5, kDownsideDeviationFloor)).margin(1e-9));
        CHECK(f.values(t, 6) == Catch::Approx(a10 / std::max(dd10, kDownsideDeviationFloor)).margin(1e-9));
        CHECK(f.values(t, 7) == Catch::Approx(a21 / std::max(dd21, kDownsideDeviationFloor)).margin(1e-9));
    }
}

TEST_CASE("return features are causal") {
    std::mt19937 rng(23);
    std::normal_distribution<double> g(0.0, 0.01);
    std::vector<double> x(100);
    for (double& v : x) v = g(rng);
    FeatureMatrix full = return_features(x);
    std::vector<double> prefix(x.begin(), x.begin() + 60);
    FeatureMatrix part = return_features(prefix);
    for (std::size_t t = 0; t < 60; ++t)
        for (std::size_t j = 0; j < 8; ++j) CHECK(part.values(t, j) == full.values(t, j));
}

TEST_CASE("macro features on constant inputs") {
    MacroPanel m = flat_macro(300);
    FeatureMatrix f = macro_features(m);
    REQUIRE(f.dim() == 5);
    const std::size_t last = f.size() - 1;
    CHECK(f.values(last, 0) == 0.0);                       // yield diffs all zero
    CHECK(f.values(last, 1) == Catch::Approx(1.0).margin(1e-12));  // slope level
    CHECK(f.values(last, 2) == 0.0);
    CHECK(f.values(last, 3) == 0.0);                       // log VIX ratio of equal levels
    CHECK(std::isnan(f.values(0, 0)));                     // first diff unavailable
    CHECK(std::isnan(f.values(250, 4)));                   // correlation window not yet full
    CHECK(std::isnan(f.values(last, 4)));                  // zero-variance window stays NaN
}

TEST_CASE("vix log-diff feature tracks multiplicative growth") {
    MacroPanel m2 = flat_macro(900);
    for (std::size_t t = 0; t < m2.dates.size(); ++t) m2.vix_level[t] = 10.0 * std::pow(1.5, double(t % 2));
    // Alternating x1.5 / /1.5: log-diffs alternate +-ln 1.5, EWM tends to a small value.
    FeatureMatrix f2 = macro_features(m2);
    CHECK(std::abs(f2.values(f2.size() - 1, 3)) < 0.01);

    // Constant multiplicative growth: smoothed log-diff equals the growth rate exactly.
    MacroPanel m3 = flat_macro(400);
    for (std::size_t t = 0; t < m3.dates.size(); ++t) m3.vix_level[t] = 10.0 * std::pow(1.02, double(t));
    FeatureMatrix f3 = macro_features(m3);
    CHECK(f3.values(f3.size() - 1, 3) == Catch::Approx(std::log(1.02)).margin(1e-12));
}

TEST_CASE("stock-bond correlation feature reaches +1 for identical series") {
    MacroPanel m = flat_macro(300);
    std::mt19937 rng(31);
    std::normal_distribution<double> g(0.0, 0.01);
    for (std::size_t t = 0; t < m.dates.size(); ++t) {
        m.stock_returns[t] = g(rng);
        m.bond_returns[t] = m.stock_returns[t];
    }
    FeatureMatrix f = macro_features(m);
    CHECK(f.values(f.size() - 1, 4) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("macro features reject non-positive VIX") {
    MacroPanel m = flat_macro(10);
    m.vix_level[4] = 0.0;
    CHECK_THROWS_AS(macro_features(m), std::runtime_error);
}

TEST_CASE("standardization uses population moments on the window only") {
    FeatureMatrix f;
    f.names = {"x"};
    f.dates = {0, 1, 2, 3};
    f.values = Matrix(4, 1);
    f.values(0, 0) = -1.0;
    f.values(1, 0) = 1.0;
    f.values(2, 0) = 100.0;  // outside the window, must not affect moments
    f.values(3, 0) = -50.0;
    FeatureMatrix z = standardize(f, DateRange{0, 2});
    CHECK(z.standardized);
    CHECK(z.standardization.mean[0] == 0.0);
    CHECK(z.standardization.std[0] == 1.0);  // population std of {-1, 1}
    CHECK(z.values(0, 0) == -1.0);
    CHECK(z.values(1, 0) == 1.0);
    CHECK(z.values(2, 0) == 100.0);  // reapplied out of window
    CHECK(z.values(3, 0) == -50.0);
}

TEST_CASE("standardized window has mean zero and unit variance") {
    std::mt19937 rng(41);
    std::normal_distribution<double> g(3.0, 2.5);
    FeatureMatrix f;
    f.names = {"a", "b"};
    f.values = Matrix(200, 2);
    for (std::size_t t = 0; t < 200; ++t) {
        f.dates.push_back(Date(t));
        f.values(t, 0) = g(rng);
        f.values(t, 1) = 10.0 * g(rng) - 4.0;
    }
    DateRange w{20, 150};
    FeatureMatrix z = standardize(f, w);
    for (std::size_t j = 0; j < 2; ++j) {
        double m = 0.0, v = 0.0;
        std::size_t cnt = 0;
        for (std::size_t t = 20; t < 150; ++t) {
            m += z.values(t, j);
            ++cnt;
        }
        m /= cnt;
        for (std::size_t t = 20; t < 150; ++t) v += (z.values(t, j) - m) * (z.values(t, j) - m);
        v /= cnt;
        CHECK(m == Catch::Approx(0.0).margin(1e-9));
        CHECK(v == Catch::Approx(1.0).margin(1e-9));
        // round-trip
        for (std::size_t t = 0; t < 200; ++t) {
            const double back = z.values(t, j) * z.standardization.std[j] + z.standardization.mean[j];
            CHECK(back == Catch::Approx(f.values(t, j)).margin(1e-10));
        }
    }
}

TEST_CASE("standardization error cases") {
    FeatureMatrix f;
    f.names = {"x"};
    f.dates = {0, 1};
    f.values = Matrix(2, 1);
    f.values(0, 0) = 5.0;
    f.values(1, 0) = 5.0;
    CHECK_THROWS_AS(standardize(f, DateRange{0, 2}), std::runtime_error);   // zero std
    CHECK_THROWS_AS(standardize(f, DateRange{10, 20}), std::invalid_argument);  // empty window
    FeatureMatrix no_dates;
    no_dates.names = {"x"};
    no_dates.values = Matrix(2, 1);
    CHECK_THROWS_AS(standardize(no_dates, DateRange{0, 2}), std::invalid_argument);
}

TEST_CASE("jump-model feature selection can drop the downside columns") {
    std::vector<double> x(50, 0.001);
    x[10] = -0.02;
    FeatureMatrix f = return_features(x);
    FeatureMatrix kept = select_jm_features(f, false);
    CHECK(kept.dim() == 8);
    FeatureMatrix dropped = select_jm_features(f, true);
    REQUIRE(dropped.dim() == 6);
    CHECK(dropped.column("dd_log_5") == -1);
    CHECK(dropped.column("dd_log_21") == -1);
    CHECK(dropped.names[0] == "avg_ret_5");
    for (std::size_t t = 0; t < f.size(); ++t)
        CHECK(dropped.values(t, 0) == f.values(t, 2));
}
