#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "regime/allocation.hpp"
#include "regime/features.hpp"
#include "regime/market_data.hpp"

namespace regime {

struct MetricSet {
    double ann_excess_return = kNaN;
    double ann_excess_volatility = kNaN;
    double sharpe = kNaN;   // NaN when volatility is zero
    double sortino = kNaN;
    double mdd = kNaN;      // <= 0
    double calmar = kNaN;   // NaN when mdd == 0
    double ann_turnover = kNaN;
    double avg_leverage = kNaN;
};

inline double mean(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / x.size();
}

inline double sample_std(const std::vector<double>& x) {
    if (x.size() < 2) return kNaN;
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / (x.size() - 1));
}

inline double annualized_sharpe(const std::vector<double>& excess_returns) {
    const double sd = sample_std(excess_returns);
    if (!(sd > 0.0)) return kNaN;
    return kTradingDaysPerYear * mean(excess_returns) / (std::sqrt(double(kTradingDaysPerYear)) * sd);
}

inline double max_drawdown(const std::vector<double>& wealth) {
    double peak = -std::numeric_limits<double>::infinity(), worst = 0.0;
    for (double w : wealth) {
        peak = std::max(peak, w);
        worst = std::min(worst, w / peak - 1.0);
    }
    return worst;
}

inline MetricSet compute_metrics(const std::vector<double>& net_excess, const std::vector<double>& net_total,
                                 const std::vector<double>& trades_l1, const std::vector<double>& leverage) {
    if (net_excess.empty()) throw std::invalid_argument("compute_metrics: empty series");
    MetricSet m;
    m.ann_excess_return = kTradingDaysPerYear * mean(net_excess);
    const double sd = sample_std(net_excess);
    m.ann_excess_volatility = std::sqrt(double(kTradingDaysPerYear)) * sd;
    if (m.ann_excess_volatility > 0.0) m.sharpe = m.ann_excess_return / m.ann_excess_volatility;

    double downside_sq = 0.0;
    for (double e : net_excess) downside_sq += std::min(e, 0.0) * std::min(e, 0.0);
    const double downside = std::sqrt(kTradingDaysPerYear * downside_sq / net_excess.size());
    if (downside > 0.0) m.sortino = m.ann_excess_return / downside;

    std::vector<double> wealth(net_total.size());
    double w = 1.0;
    for (std::size_t t = 0; t < net_total.size(); ++t) wealth[t] = (w *= 1.0 + net_total[t]);
    m.mdd = max_drawdown(wealth);
    const double ann_total = kTradingDaysPerYear * mean(net_total);
    if (m.mdd < 0.0) m.calmar = ann_total / std::abs(m.mdd);

    if (!trades_l1.empty()) {
        double turn = 0.0;
        for (double v : trades_l1) turn += v;
        m.ann_turnover = double(kTradingDaysPerYear) / trades_l1.size() * turn;
    }
    if (!leverage.empty()) m.avg_leverage = mean(leverage);
    return m;
}

// Per-day regime information the backtest consumes; rows align with the
// backtest window dates.
struct RegimeInputs {
    std::vector<Date> dates;
    std::vector<std::vector<int>> forecasts;                // [T][N], 1 = bullish
    std::vector<std::vector<RegimeReturnTable>> tables;     // [T][N], block-constant
};

struct BacktestResult {
    std::vector<Date> dates;
    Matrix weights_post;   // weights earning that day's return
    Matrix trades;         // post - drifted pre at the prior close
    std::vector<double> costs;
    std::vector<double> portfolio_returns;  // net total
    std::vector<double> net_excess;
    std::vector<double> wealth;             // normalized to 1 by compounding from the window start
    Matrix mu_series;      // return forecasts fed to the optimizer (optimizer strategies only)
    MetricSet metrics;
};

// Daily walk: drift, target, linear cost, compounding. Weights decided at
// close t earn day-(t+1) returns; the trade executed at a close is charged
// against the following day's return.
inline BacktestResult run_backtest(const StrategySpec& spec, const ReturnPanel& panel,
                                   const DateRange& window, const RegimeInputs* regime) {
    const std::size_t n = panel.n_assets();
    const std::size_t idx0 = panel.lower_bound(window.begin);
    const std::size_t idx_end = panel.lower_bound(window.end);
    if (idx_end <= idx0) throw std::invalid_argument("run_backtest: empty window");
    const std::size_t t_count = idx_end - idx0;

    if (spec.needs_forecasts() || spec.kind == StrategyKind::MeanVarRegime) {
        if (!regime || regime->dates.size() != t_count)
            throw std::invalid_argument("run_backtest: forecasts do not cover the window");
        for (std::size_t t = 0; t < t_count; ++t)
            if (regime->dates[t] != panel.dates[idx0 + t])
                throw std::invalid_argument("run_backtest: forecast dates misaligned");
    }

    // Prime the covariance / mean accumulators with pre-window history.
    EwmCovAccumulator cov_acc(n, spec.covariance_halflife);
    std::vector<EwmMeanAccumulator> mu_acc(n, EwmMeanAccumulator(spec.mv_mu_halflife));
    const bool wants_cov = spec.uses_optimizer();
    std::vector<double> x(n);
    if (wants_cov) {
        if (idx0 < 2) throw std::invalid_argument("run_backtest: insufficient history before window");
        for (std::size_t t = 0; t < idx0; ++t) {
            for (std::size_t j = 0; j < n; ++j) x[j] = panel.excess(t, j);
            cov_acc.add(x.data());
            for (std::size_t j = 0; j < n; ++j) mu_acc[j].add(x[j]);
        }
    }

    BacktestResult res;
    res.dates.assign(panel.dates.begin() + idx0, panel.dates.begin() + idx_end);
    res.weights_post = Matrix(t_count, n);
    res.trades = Matrix(t_count, n);
    res.costs.assign(t_count, 0.0);
    res.portfolio_returns.resize(t_count);
    res.net_excess.resize(t_count);
    res.wealth.resize(t_count);
    if (spec.uses_optimizer()) res.mu_series = Matrix(t_count, n);

    auto decide = [&](std::size_t t_local, const std::vector<double>& w_pre) {
        std::vector<int> forecasts(n, 1);
        std::vector<RegimeReturnTable> tables;
        if (regime) {
            forecasts = regime->forecasts[t_local];
            if (!regime->tables.empty()) tables = regime->tables[t_local];
        }
        std::vector<double> mu(n, 0.0);
        Matrix sigma;
        if (spec.uses_optimizer()) {
            std::vector<double> ewma_mu(n);
            for (std::size_t j = 0; j < n; ++j) ewma_mu[j] = mu_acc[j].empty() ? 0.0 : mu_acc[j].value();
            mu = build_mu(spec, forecasts, tables, ewma_mu);
            sigma = cov_acc.covariance();
            for (std::size_t j = 0; j < n; ++j) res.mu_series(t_local, j) = mu[j];
        }
        return target_weights(spec, mu, sigma, w_pre, forecasts);
    };

    std::vector<double> w_cur = decide(0, std::vector<double>(n, 0.0));
    double pending_cost = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        pending_cost += spec.cost_a * std::abs(w_cur[j]);
        res.trades(0, j) = w_cur[j];
    }

    double wealth = 1.0;
    std::vector<double> w_drift(n);
    for (std::size_t t = 0; t < t_count; ++t) {
        const std::size_t tp = idx0 + t;
        double lev = 0.0, gross = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            lev += w_cur[j];
            gross += w_cur[j] * panel.returns(tp, j);
            res.weights_post(t, j) = w_cur[j];
        }
        gross += (1.0 - lev) * panel.risk_free[tp];
        if (!std::isfinite(gross)) throw std::runtime_error("run_backtest: non-finite return at " +
                                                            format_date(panel.dates[tp]));
        const double net = gross - pending_cost;
        res.costs[t] = pending_cost;
        res.portfolio_returns[t] = net;
        res.net_excess[t] = net - panel.risk_free[tp];
        res.wealth[t] = (wealth *= 1.0 + net);

        if (t + 1 == t_count) break;
        for (std::size_t j = 0; j < n; ++j)
            w_drift[j] = w_cur[j] * (1.0 + panel.returns(tp, j)) / (1.0 + gross);
        if (wants_cov) {
            for (std::size_t j = 0; j < n; ++j) x[j] = panel.excess(tp, j);
            cov_acc.add(x.data());
            for (std::size_t j = 0; j < n; ++j) mu_acc[j].add(x[j]);
        }
        std::vector<double> w_next = decide(t + 1, w_drift);
        pending_cost = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double trade = w_next[j] - w_drift[j];
            res.trades(t + 1, j) = trade;
            pending_cost += spec.cost_a * std::abs(trade);
        }
        w_cur = std::move(w_next);
    }

    std::vector<double> trades_l1(t_count), leverage(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
        double tl = 0.0, lv = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            tl += std::abs(res.trades(t, j));
            lv += res.weights_post(t, j);
        }
        trades_l1[t] = tl;
        leverage[t] = lv;
    }
    trades_l1[0] = 0.0;  // the entry from cash is a cost, not turnover
    res.metrics = compute_metrics(res.net_excess, res.portfolio_returns, trades_l1, leverage);
    return res;
}

// Replay a stored post-trade weight path under a different linear cost rate.
// Drift uses gross returns, so the weight path is cost-invariant by
// construction and only the cost deduction changes.
inline BacktestResult replay_weight_path(const ReturnPanel& panel, const DateRange& window,
                                         const Matrix& weights_post, double cost_a) {
    const std::size_t n = panel.n_assets();
    const std::size_t idx0 = panel.lower_bound(window.begin);
    const std::size_t t_count = weights_post.rows;

    BacktestResult res;
    res.dates.assign(panel.dates.begin() + idx0, panel.dates.begin() + idx0 + t_count);
    res.weights_post = weights_post;
    res.trades = Matrix(t_count, n);
    res.costs.assign(t_count, 0.0);
    res.portfolio_returns.resize(t_count);
    res.net_excess.resize(t_count);
    res.wealth.resize(t_count);

    std::vector<double> w_drift(n, 0.0);
    double wealth = 1.0;
    for (std::size_t t = 0; t < t_count; ++t) {
        const std::size_t tp = idx0 + t;
        double cost = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double trade = weights_post(t, j) - w_drift[j];
            res.trades(t, j) = trade;
            cost += cost_a * std::abs(trade);
        }
        double lev = 0.0, gross = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            lev += weights_post(t, j);
            gross += weights_post(t, j) * panel.returns(tp, j);
        }
        gross += (1.0 - lev) * panel.risk_free[tp];
        const double net = gross - cost;
        res.costs[t] = cost;
        res.portfolio_returns[t] = net;
        res.net_excess[t] = net - panel.risk_free[tp];
        res.wealth[t] = (wealth *= 1.0 + net);
        for (std::size_t j = 0; j < n; ++j)
            w_drift[j] = weights_post(t, j) * (1.0 + panel.returns(tp, j)) / (1.0 + gross);
    }

    std::vector<double> trades_l1(t_count), leverage(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
        double tl = 0.0, lv = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            tl += std::abs(res.trades(t, j));
            lv += res.weights_post(t, j);
        }
        trades_l1[t] = tl;
        leverage[t] = lv;
    }
    trades_l1[0] = 0.0;
    res.metrics = compute_metrics(res.net_excess, res.portfolio_returns, trades_l1, leverage);
    return res;
}

struct ForecastCorrelation {
    std::vector<double> per_asset;  // NaN where undefined
    double pooled = kNaN;
};

// Pearson correlation between forecasted and realized excess returns, per
// asset and pooled over stacked (date, asset) pairs.
inline ForecastCorrelation forecast_return_correlation(const Matrix& mu_series, const Matrix& realized) {
    if (mu_series.rows != realized.rows || mu_series.cols != realized.cols)
        throw std::invalid_argument("forecast_return_correlation: misaligned panels");
    auto pearson = [](const std::vector<double>& a, const std::vector<double>& b) {
        const double ma = mean(a), mb = mean(b);
        double saa = 0.0, sbb = 0.0, sab = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            saa += (a[i] - ma) * (a[i] - ma);
            sbb += (b[i] - mb) * (b[i] - mb);
            sab += (a[i] - ma) * (b[i] - mb);
        }
        if (!(saa > 0.0) || !(sbb > 0.0)) return kNaN;
        return sab / std::sqrt(saa * sbb);
    };

    ForecastCorrelation out;
    std::vector<double> pooled_mu, pooled_r;
    for (std::size_t j = 0; j < mu_series.cols; ++j) {
        std::vector<double> a(mu_series.rows), b(mu_series.rows);
        for (std::size_t t = 0; t < mu_series.rows; ++t) {
            a[t] = mu_series(t, j);
            b[t] = realized(t, j);
            pooled_mu.push_back(a[t]);
            pooled_r.push_back(b[t]);
        }
        out.per_asset.push_back(pearson(a, b));
    }
    out.pooled = pearson(pooled_mu, pooled_r);
    return out;
}

}  // namespace regime
