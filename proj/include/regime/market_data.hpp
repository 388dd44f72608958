#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "regime/csv.hpp"
#include "regime/dates.hpp"
#include "regime/matrix.hpp"

namespace regime {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr int kTradingDaysPerYear = 252;

inline bool missing(double v) { return std::isnan(v); }

// Aligned dated panel of per-asset simple returns plus a risk-free series.
struct ReturnPanel {
    std::vector<Date> dates;          // strictly increasing trading days
    std::vector<std::string> assets;  // column order of `returns`
    Matrix returns;                   // [T x N] simple daily returns (decimal)
    std::vector<double> risk_free;    // [T] simple daily risk-free returns

    std::size_t size() const { return dates.size(); }
    std::size_t n_assets() const { return assets.size(); }

    double excess(std::size_t t, std::size_t j) const { return returns(t, j) - risk_free[t]; }

    int asset_index(const std::string& name) const {
        for (std::size_t j = 0; j < assets.size(); ++j)
            if (assets[j] == name) return static_cast<int>(j);
        return -1;
    }

    // Index of the first date >= d, or size() if none.
    std::size_t lower_bound(Date d) const {
        return std::lower_bound(dates.begin(), dates.end(), d) - dates.begin();
    }
};

// Source series for the cross-asset macro features.
struct MacroPanel {
    std::vector<Date> dates;
    std::vector<double> yield_2y;            // percent
    std::vector<double> yield_slope_10y_2y;  // percent
    std::vector<double> vix_level;           // index points, > 0
    std::vector<double> stock_returns;       // decimal
    std::vector<double> bond_returns;        // decimal
};

enum class SeriesKind { Levels, Returns };

struct IngestConfig {
    SeriesKind kind = SeriesKind::Levels;
    // Name of the risk-free column (annualized percent yield). Looked up in the
    // main file unless risk_free_path names a separate CSV.
    std::string risk_free_column = "riskfree";
    std::string risk_free_path;
};

// (1 + y)^(1/252) - 1 with y in percent per annum.
inline double annual_yield_to_daily(double percent_yield) {
    return std::pow(1.0 + percent_yield / 100.0, 1.0 / kTradingDaysPerYear) - 1.0;
}

namespace detail {

inline void check_dates_strictly_increasing(const std::vector<Date>& dates, const std::string& context) {
    for (std::size_t t = 1; t < dates.size(); ++t)
        if (dates[t] <= dates[t - 1])
            throw std::runtime_error("non-monotone or duplicate dates in " + context + " at row " +
                                     std::to_string(t));
}

}  // namespace detail

inline ReturnPanel load_return_panel(const std::string& path, const IngestConfig& config) {
    CsvTable table = read_csv(path);
    if (table.header.empty() || table.header[0] != "date")
        throw std::runtime_error("first column must be 'date' in " + path);
    if (table.rows.size() < 2) throw std::runtime_error("fewer than 2 data rows in " + path);

    int rf_col = -1;
    CsvTable rf_table;
    if (config.risk_free_path.empty()) {
        rf_col = table.column(config.risk_free_column);
        if (rf_col < 0)
            throw std::runtime_error("risk-free column '" + config.risk_free_column + "' not found in " + path);
    } else {
        rf_table = read_csv(config.risk_free_path);
        rf_col = rf_table.column(config.risk_free_column);
        if (rf_col < 0)
            throw std::runtime_error("risk-free column '" + config.risk_free_column + "' not found in " +
                                     config.risk_free_path);
    }

    const bool rf_in_main = config.risk_free_path.empty();
    ReturnPanel panel;
    for (std::size_t j = 1; j < table.header.size(); ++j)
        if (!(rf_in_main && static_cast<int>(j) == rf_col)) panel.assets.push_back(table.header[j]);

    const std::size_t n = panel.assets.size();
    std::vector<Date> raw_dates;
    std::vector<std::vector<double>> raw(n);
    std::vector<double> raw_rf_yield;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        raw_dates.push_back(parse_date(row[0]));
        std::size_t k = 0;
        for (std::size_t j = 1; j < table.header.size(); ++j) {
            if (rf_in_main && static_cast<int>(j) == rf_col) continue;
            raw[k++].push_back(parse_cell(row[j], path + " row " + std::to_string(r + 2)));
        }
        if (rf_in_main)
            raw_rf_yield.push_back(parse_cell(row[rf_col], path + " row " + std::to_string(r + 2)));
    }
    detail::check_dates_strictly_increasing(raw_dates, path);

    if (!config.risk_free_path.empty()) {
        // Separate risk-free file must cover every panel date.
        std::vector<Date> rf_dates;
        std::vector<double> rf_vals;
        for (std::size_t r = 0; r < rf_table.rows.size(); ++r) {
            rf_dates.push_back(parse_date(rf_table.rows[r][0]));
            rf_vals.push_back(parse_cell(rf_table.rows[r][rf_col], config.risk_free_path));
        }
        detail::check_dates_strictly_increasing(rf_dates, config.risk_free_path);
        for (Date d : raw_dates) {
            auto it = std::lower_bound(rf_dates.begin(), rf_dates.end(), d);
            if (it == rf_dates.end() || *it != d)
                throw std::runtime_error("risk-free file missing date " + format_date(d));
            raw_rf_yield.push_back(rf_vals[it - rf_dates.begin()]);
        }
    }

    // Trim leading rows with any missing value, then reject interior gaps.
    std::size_t start = 0;
    auto row_complete = [&](std::size_t t) {
        if (missing(raw_rf_yield[t])) return false;
        for (std::size_t j = 0; j < n; ++j)
            if (missing(raw[j][t])) return false;
        return true;
    };
    while (start < raw_dates.size() && !row_complete(start)) ++start;
    for (std::size_t t = start; t < raw_dates.size(); ++t)
        if (!row_complete(t))
            throw std::runtime_error("missing interior value at " + format_date(raw_dates[t]) + " in " + path);

    const std::size_t first = (config.kind == SeriesKind::Levels) ? start + 1 : start;
    if (raw_dates.size() < first + 1) throw std::runtime_error("fewer than 2 usable rows in " + path);

    const std::size_t t_count = raw_dates.size() - first;
    panel.dates.assign(raw_dates.begin() + first, raw_dates.end());
    panel.returns = Matrix(t_count, n);
    panel.risk_free.resize(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
        panel.risk_free[t] = annual_yield_to_daily(raw_rf_yield[first + t]);
        for (std::size_t j = 0; j < n; ++j) {
            double v;
            if (config.kind == SeriesKind::Levels)
                v = raw[j][first + t] / raw[j][first + t - 1] - 1.0;
            else
                v = raw[j][first + t];
            if (v <= -1.0) throw std::runtime_error("return <= -100% for " + panel.assets[j] + " at " +
                                                    format_date(panel.dates[t]));
            panel.returns(t, j) = v;
        }
    }
    return panel;
}

inline MacroPanel load_macro_panel(const std::string& path) {
    CsvTable table = read_csv(path);
    if (table.header.empty() || table.header[0] != "date")
        throw std::runtime_error("first column must be 'date' in " + path);
    const char* names[5] = {"yield_2y", "yield_slope_10y_2y", "vix_level", "stock_returns", "bond_returns"};
    int cols[5];
    for (int i = 0; i < 5; ++i) {
        cols[i] = table.column(names[i]);
        if (cols[i] < 0) throw std::runtime_error(std::string("column '") + names[i] + "' not found in " + path);
    }
    MacroPanel macro;
    std::vector<double>* series[5] = {&macro.yield_2y, &macro.yield_slope_10y_2y, &macro.vix_level,
                                      &macro.stock_returns, &macro.bond_returns};
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        macro.dates.push_back(parse_date(table.rows[r][0]));
        for (int i = 0; i < 5; ++i)
            series[i]->push_back(parse_cell(table.rows[r][cols[i]], path + " row " + std::to_string(r + 2)));
    }
    detail::check_dates_strictly_increasing(macro.dates, path);
    return macro;
}

// Adjusted (finite-sample-normalized) exponentially weighted mean with
// alpha = 1 - 2^(-1/halflife). halflife == 0 returns the input unchanged.
inline std::vector<double> ewm_mean(const std::vector<double>& x, double halflife) {
    if (halflife < 0.0) throw std::invalid_argument("ewm_mean: negative halflife");
    if (halflife == 0.0) return x;
    const double decay = std::pow(2.0, -1.0 / halflife);
    std::vector<double> out(x.size());
    double numer = 0.0, denom = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        numer = decay * numer + x[t];
        denom = decay * denom + 1.0;
        out[t] = numer / denom;
    }
    return out;
}

// Running adjusted EWM mean of a scalar stream.
class EwmMeanAccumulator {
public:
    explicit EwmMeanAccumulator(double halflife)
        : decay_(halflife == 0.0 ? 0.0 : std::pow(2.0, -1.0 / halflife)) {
        if (halflife < 0.0) throw std::invalid_argument("negative halflife");
    }
    double add(double x) {
        numer_ = decay_ * numer_ + x;
        denom_ = decay_ * denom_ + 1.0;
        return numer_ / denom_;
    }
    bool empty() const { return denom_ == 0.0; }
    double value() const { return numer_ / denom_; }

private:
    double decay_;
    double numer_ = 0.0;
    double denom_ = 0.0;
};

// Running exponentially weighted covariance with weighted mean subtraction,
// using the same normalized-weight convention as ewm_mean.
class EwmCovAccumulator {
public:
    EwmCovAccumulator(std::size_t n, double halflife)
        : n_(n), decay_(std::pow(2.0, -1.0 / halflife)), sum_w_(0.0), sum_x_(n, 0.0), sum_xx_(n, n) {
        if (halflife <= 0.0) throw std::invalid_argument("covariance halflife must be positive");
    }

    void add(const double* x) {
        sum_w_ = decay_ * sum_w_ + 1.0;
        for (std::size_t i = 0; i < n_; ++i) sum_x_[i] = decay_ * sum_x_[i] + x[i];
        for (std::size_t i = 0; i < n_; ++i) {
            double* row = sum_xx_.row(i);
            for (std::size_t j = 0; j < n_; ++j) row[j] = decay_ * row[j] + x[i] * x[j];
        }
        ++count_;
    }

    std::size_t count() const { return count_; }

    // Covariance plus a diagonal ridge guaranteeing strict positive definiteness.
    Matrix covariance(double ridge = 1e-10) const {
        if (count_ < 2) throw std::runtime_error("ewm covariance: fewer than 2 observations");
        Matrix cov(n_, n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const double mi = sum_x_[i] / sum_w_;
            for (std::size_t j = 0; j <= i; ++j) {
                const double mj = sum_x_[j] / sum_w_;
                double v = sum_xx_(i, j) / sum_w_ - mi * mj;
                cov(i, j) = cov(j, i) = v;
            }
            cov(i, i) += ridge;
        }
        return cov;
    }

private:
    std::size_t n_;
    double decay_;
    double sum_w_;
    std::vector<double> sum_x_;
    Matrix sum_xx_;
    std::size_t count_ = 0;
};

// EWM covariance of excess returns up to and including as_of.
inline Matrix ewm_covariance(const ReturnPanel& panel, double halflife, Date as_of) {
    const std::size_t n = panel.n_assets();
    EwmCovAccumulator acc(n, halflife);
    std::vector<double> x(n);
    for (std::size_t t = 0; t < panel.size() && panel.dates[t] <= as_of; ++t) {
        for (std::size_t j = 0; j < n; ++j) x[j] = panel.excess(t, j);
        acc.add(x.data());
    }
    if (acc.count() < 2) throw std::runtime_error("ewm_covariance: insufficient history before " + format_date(as_of));
    return acc.covariance();
}

// Trailing-window Pearson correlation; entries before the window fills, and
// windows with zero variance, are marked unavailable (NaN).
inline std::vector<double> rolling_correlation(const std::vector<double>& x, const std::vector<double>& y,
                                               std::size_t window) {
    if (window < 2) throw std::invalid_argument("rolling_correlation: window must be >= 2");
    if (x.size() != y.size()) throw std::invalid_argument("rolling_correlation: length mismatch");
    std::vector<double> out(x.size(), kNaN);
    for (std::size_t t = window - 1; t < x.size(); ++t) {
        const std::size_t b = t + 1 - window;
        double mx = 0.0, my = 0.0;
        for (std::size_t i = b; i <= t; ++i) { mx += x[i]; my += y[i]; }
        mx /= window;
        my /= window;
        double sxx = 0.0, syy = 0.0, sxy = 0.0;
        for (std::size_t i = b; i <= t; ++i) {
            const double dx = x[i] - mx, dy = y[i] - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        if (sxx > 0.0 && syy > 0.0) out[t] = sxy / std::sqrt(sxx * syy);
    }
    return out;
}

}  // namespace regime
