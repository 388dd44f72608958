#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "regime/market_data.hpp"

namespace regime {

// Floor applied to downside deviation inside the log and Sortino denominator.
inline constexpr double kDownsideDeviationFloor = 1e-8;

struct DateRange {
    Date begin;  // inclusive
    Date end;    // exclusive
};

struct FeatureStandardization {
    std::vector<double> mean;
    std::vector<double> std;
};

struct FeatureMatrix {
    std::vector<Date> dates;  // may be empty when the caller tracks alignment itself
    std::vector<std::string> names;
    Matrix values;  // [T x D]
    // Present after standardize(); (mean, std) captured on the training window.
    bool standardized = false;
    FeatureStandardization standardization;

    std::size_t size() const { return values.rows; }
    std::size_t dim() const { return values.cols; }

    int column(const std::string& name) const {
        for (std::size_t j = 0; j < names.size(); ++j)
            if (names[j] == name) return static_cast<int>(j);
        return -1;
    }
};

inline const std::vector<std::string>& return_feature_names() {
    static const std::vector<std::string> names = {
        "dd_log_5", "dd_log_21", "avg_ret_5", "avg_ret_10", "avg_ret_21",
        "sortino_5", "sortino_10", "sortino_21"};
    return names;
}

inline const std::vector<std::string>& macro_feature_names() {
    static const std::vector<std::string> names = {
        "yield_2y_diff_ewm21", "yield_slope_ewm10", "yield_slope_diff_ewm21",
        "vix_logdiff_ewm63", "stock_bond_corr_252"};
    return names;
}

// The eight Table-style return features: log downside deviation at halflives
// {5, 21}, EWM average return at {5, 10, 21}, and EWM Sortino at {5, 10, 21}.
// The DD(10) needed inside Sortino(10) is computed internally and not emitted.
inline FeatureMatrix return_features(const std::vector<double>& excess_returns,
                                     std::vector<Date> dates = {}) {
    if (excess_returns.empty()) throw std::invalid_argument("return_features: empty input");
    const std::size_t t_count = excess_returns.size();

    std::vector<double> neg_sq(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
        const double d = std::min(excess_returns[t], 0.0);
        neg_sq[t] = d * d;
    }

    auto downside_dev = [&](double halflife) {
        std::vector<double> dd = ewm_mean(neg_sq, halflife);
        for (double& v : dd) v = std::sqrt(v);
        return dd;
    };
    const std::vector<double> dd5 = downside_dev(5.0);
    const std::vector<double> dd10 = downside_dev(10.0);
    const std::vector<double> dd21 = downside_dev(21.0);
    const std::vector<double> avg5 = ewm_mean(excess_returns, 5.0);
    const std::vector<double> avg10 = ewm_mean(excess_returns, 10.0);
    const std::vector<double> avg21 = ewm_mean(excess_returns, 21.0);

    FeatureMatrix out;
    out.dates = std::move(dates);
    out.names = return_feature_names();
    out.values = Matrix(t_count, 8);
    for (std::size_t t = 0; t < t_count; ++t) {
        out.values(t, 0) = std::log(std::max(dd5[t], kDownsideDeviationFloor));
        out.values(t, 1) = std::log(std::max(dd21[t], kDownsideDeviationFloor));
        out.values(t, 2) = avg5[t];
        out.values(t, 3) = avg10[t];
        out.values(t, 4) = avg21[t];
        out.values(t, 5) = avg5[t] / std::max(dd5[t], kDownsideDeviationFloor);
        out.values(t, 6) = avg10[t] / std::max(dd10[t], kDownsideDeviationFloor);
        out.values(t, 7) = avg21[t] / std::max(dd21[t], kDownsideDeviationFloor);
    }
    return out;
}

namespace detail {

// EWM over a series whose leading entries may be unavailable; the NaN prefix
// propagates and smoothing starts at the first finite value.
inline std::vector<double> ewm_skipping_leading_nan(const std::vector<double>& x, double halflife) {
    std::size_t first = 0;
    while (first < x.size() && missing(x[first])) ++first;
    std::vector<double> out(x.size(), kNaN);
    EwmMeanAccumulator acc(halflife);
    for (std::size_t t = first; t < x.size(); ++t) out[t] = acc.add(x[t]);
    return out;
}

}  // namespace detail

// The five cross-asset macro features (same series for every asset).
inline FeatureMatrix macro_features(const MacroPanel& macro) {
    const std::size_t t_count = macro.dates.size();
    if (t_count == 0) throw std::invalid_argument("macro_features: empty panel");

    std::vector<double> yield_diff(t_count, kNaN), slope_diff(t_count, kNaN), vix_logdiff(t_count, kNaN);
    for (std::size_t t = 0; t < t_count; ++t) {
        if (macro.vix_level[t] <= 0.0)
            throw std::runtime_error("macro_features: non-positive VIX level at " + format_date(macro.dates[t]));
        if (t > 0) {
            yield_diff[t] = macro.yield_2y[t] - macro.yield_2y[t - 1];
            slope_diff[t] = macro.yield_slope_10y_2y[t] - macro.yield_slope_10y_2y[t - 1];
            vix_logdiff[t] = std::log(macro.vix_level[t] / macro.vix_level[t - 1]);
        }
    }

    const std::vector<double> f1 = detail::ewm_skipping_leading_nan(yield_diff, 21.0);
    const std::vector<double> f2 = ewm_mean(macro.yield_slope_10y_2y, 10.0);
    const std::vector<double> f3 = detail::ewm_skipping_leading_nan(slope_diff, 21.0);
    const std::vector<double> f4 = detail::ewm_skipping_leading_nan(vix_logdiff, 63.0);
    const std::vector<double> f5 = rolling_correlation(macro.stock_returns, macro.bond_returns, 252);

    FeatureMatrix out;
    out.dates = macro.dates;
    out.names = macro_feature_names();
    out.values = Matrix(t_count, 5);
    for (std::size_t t = 0; t < t_count; ++t) {
        out.values(t, 0) = f1[t];
        out.values(t, 1) = f2[t];
        out.values(t, 2) = f3[t];
        out.values(t, 3) = f4[t];
        out.values(t, 4) = f5[t];
    }
    return out;
}

// Z-scores with mean/std (population) estimated on the given date window and
// reapplied to every row, in or out of window.
inline FeatureMatrix standardize(const FeatureMatrix& features, const DateRange& window) {
    if (features.dates.size() != features.size())
        throw std::invalid_argument("standardize: feature matrix has no date alignment");
    const std::size_t d_count = features.dim();
    std::vector<std::size_t> in_window;
    for (std::size_t t = 0; t < features.size(); ++t)
        if (features.dates[t] >= window.begin && features.dates[t] < window.end) in_window.push_back(t);
    if (in_window.empty()) throw std::invalid_argument("standardize: empty window");

    FeatureMatrix out = features;
    out.standardized = true;
    out.standardization.mean.resize(d_count);
    out.standardization.std.resize(d_count);
    for (std::size_t j = 0; j < d_count; ++j) {
        double mean = 0.0;
        for (std::size_t t : in_window) mean += features.values(t, j);
        mean /= in_window.size();
        double var = 0.0;
        for (std::size_t t : in_window) {
            const double d = features.values(t, j) - mean;
            var += d * d;
        }
        var /= in_window.size();
        if (var <= 0.0)
            throw std::runtime_error("standardize: zero std for feature '" + features.names[j] + "'");
        const double sd = std::sqrt(var);
        out.standardization.mean[j] = mean;
        out.standardization.std[j] = sd;
        for (std::size_t t = 0; t < features.size(); ++t)
            out.values(t, j) = (features.values(t, j) - mean) / sd;
    }
    return out;
}

// Optionally drop the two log-DD columns (assets whose DD features do not
// separate the two regimes are configured with exclude_dd).
inline FeatureMatrix select_jm_features(const FeatureMatrix& features, bool exclude_dd) {
    if (!exclude_dd) return features;
    const int c0 = features.column("dd_log_5");
    const int c1 = features.column("dd_log_21");
    if (c0 < 0 || c1 < 0)
        throw std::runtime_error("select_jm_features: log-DD columns not found");
    FeatureMatrix out;
    out.dates = features.dates;
    for (std::size_t j = 0; j < features.dim(); ++j)
        if (static_cast<int>(j) != c0 && static_cast<int>(j) != c1) out.names.push_back(features.names[j]);
    out.values = Matrix(features.size(), out.names.size());
    std::size_t k = 0;
    for (std::size_t j = 0; j < features.dim(); ++j) {
        if (static_cast<int>(j) == c0 || static_cast<int>(j) == c1) continue;
        for (std::size_t t = 0; t < features.size(); ++t) out.values(t, k) = features.values(t, j);
        ++k;
    }
    return out;
}

}  // namespace regime
