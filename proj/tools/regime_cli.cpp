// Command-line front end: simulate synthetic data, tune jump penalties, run
// backtests, and re-render reports from stored daily outputs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "regime/backtest.hpp"
#include "regime/pipeline.hpp"
#include "regime/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string returns_path;
    std::string riskfree_path;
    std::string riskfree_column = "riskfree";
    regime::SeriesKind returns_kind = regime::SeriesKind::Returns;
    std::string macro_path;
    std::vector<std::string> universe;  // empty = all panel assets
    regime::DateRange testing{0, 0};
    regime::PipelineConfig pipeline;
    std::vector<regime::StrategySpec> strategies;
    bool zero_one_per_asset = true;
    std::string output_dir = "out";
    regime::RegimeProcessSpec simulate;
    json resolved;
};

double get_or(const json& j, const char* key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
}

regime::StrategySpec parse_strategy(const json& js) {
    if (!js.contains("kind")) throw ConfigError("strategy entry missing 'kind'");
    regime::StrategySpec s = regime::make_strategy(regime::strategy_kind_from_name(js.at("kind")));
    if (js.contains("name")) s.name = js.at("name").get<std::string>();
    s.gamma_risk = get_or(js, "gamma_risk", s.gamma_risk);
    s.gamma_trade = get_or(js, "gamma_trade", s.gamma_trade);
    s.cost_a = get_or(js, "cost_a", s.cost_a);
    s.w_ub = get_or(js, "w_ub", s.w_ub);
    s.leverage_cap = get_or(js, "leverage_cap", s.leverage_cap);
    s.min_bullish_count = static_cast<int>(get_or(js, "min_bullish_count", s.min_bullish_count));
    s.covariance_halflife = get_or(js, "covariance_halflife", s.covariance_halflife);
    s.bearish_return_cap = get_or(js, "bearish_return_cap", s.bearish_return_cap);
    s.bullish_minvar_mu = get_or(js, "bullish_minvar_mu", s.bullish_minvar_mu);
    s.mv_mu_halflife = get_or(js, "mv_mu_halflife", s.mv_mu_halflife);
    if (js.contains("fix_mix_weights"))
        s.fix_mix_weights = js.at("fix_mix_weights").get<std::vector<double>>();
    return s;
}

std::vector<regime::StrategySpec> default_strategies() {
    using K = regime::StrategyKind;
    std::vector<regime::StrategySpec> out;
    for (K k : {K::FixMix, K::MinVar, K::MinVarRegime, K::MeanVar, K::MeanVarRegime, K::EqualWeight,
                K::EqualWeightRegime})
        out.push_back(regime::make_strategy(k));
    return out;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const std::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }

    RunConfig cfg;
    try {
        if (j.contains("data")) {
            const json& d = j.at("data");
            cfg.returns_path = d.value("returns", "");
            cfg.riskfree_path = d.value("riskfree", "");
            cfg.riskfree_column = d.value("riskfree_column", cfg.riskfree_column);
            cfg.macro_path = d.value("macro", "");
            const std::string kind = d.value("returns_kind", "returns");
            if (kind == "returns") cfg.returns_kind = regime::SeriesKind::Returns;
            else if (kind == "levels") cfg.returns_kind = regime::SeriesKind::Levels;
            else throw ConfigError("returns_kind must be 'returns' or 'levels'");
        }
        if (j.contains("universe")) cfg.universe = j.at("universe").get<std::vector<std::string>>();
        if (j.contains("schedule")) {
            const json& s = j.at("schedule");
            if (s.contains("testing_begin"))
                cfg.testing.begin = regime::parse_date(s.at("testing_begin").get<std::string>());
            if (s.contains("testing_end"))
                cfg.testing.end = regime::parse_date(s.at("testing_end").get<std::string>());
            cfg.pipeline.refit_interval_months =
                static_cast<int>(get_or(s, "refit_interval_months", cfg.pipeline.refit_interval_months));
            cfg.pipeline.training_lookback_years =
                static_cast<int>(get_or(s, "training_lookback_years", cfg.pipeline.training_lookback_years));
            cfg.pipeline.validation_lookback_years = static_cast<int>(
                get_or(s, "validation_lookback_years", cfg.pipeline.validation_lookback_years));
        }
        if (j.contains("lambda_grid"))
            cfg.pipeline.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
        if (j.contains("smoothing_halflives"))
            cfg.pipeline.smoothing_candidates = j.at("smoothing_halflives").get<std::vector<double>>();
        cfg.pipeline.cost_a = get_or(j, "cost_a", cfg.pipeline.cost_a);
        cfg.pipeline.seed = static_cast<std::uint64_t>(get_or(j, "seed", 0.0));
        if (j.contains("jm")) {
            const json& m = j.at("jm");
            cfg.pipeline.jm_restarts =
                static_cast<std::size_t>(get_or(m, "restarts", cfg.pipeline.jm_restarts));
            cfg.pipeline.exclude_dd = m.value("exclude_dd", false);
        }
        if (j.contains("gbdt")) {
            const json& g = j.at("gbdt");
            cfg.pipeline.gbdt.rounds = static_cast<std::size_t>(get_or(g, "rounds", cfg.pipeline.gbdt.rounds));
            cfg.pipeline.gbdt.max_depth =
                static_cast<std::size_t>(get_or(g, "max_depth", cfg.pipeline.gbdt.max_depth));
            cfg.pipeline.gbdt.learning_rate = get_or(g, "learning_rate", cfg.pipeline.gbdt.learning_rate);
            cfg.pipeline.gbdt.min_child_weight =
                get_or(g, "min_child_weight", cfg.pipeline.gbdt.min_child_weight);
            cfg.pipeline.gbdt.l2_leaf_regularization =
                get_or(g, "l2_leaf_regularization", cfg.pipeline.gbdt.l2_leaf_regularization);
        }
        cfg.pipeline.cache_dir = j.value("cache_dir", "");
        cfg.output_dir = j.value("output_dir", cfg.output_dir);
        cfg.zero_one_per_asset = j.value("zero_one_per_asset", true);

        if (j.contains("strategies")) {
            if (j.at("strategies").empty()) throw ConfigError("no strategies configured");
            for (const json& js : j.at("strategies")) cfg.strategies.push_back(parse_strategy(js));
        } else {
            cfg.strategies = default_strategies();
        }
        if (j.contains("sensitivity")) {
            const json& s = j.at("sensitivity");
            json base_js = s;
            base_js["kind"] = s.value("strategy", "minvar_regime");
            base_js.erase("strategy");
            base_js.erase("gamma_risk");
            base_js.erase("gamma_trade");
            regime::StrategySpec base = parse_strategy(base_js);
            std::vector<double> risks = s.contains("gamma_risk")
                                            ? s.at("gamma_risk").get<std::vector<double>>()
                                            : std::vector<double>{base.gamma_risk};
            std::vector<double> trades = s.contains("gamma_trade")
                                             ? s.at("gamma_trade").get<std::vector<double>>()
                                             : std::vector<double>{base.gamma_trade};
            for (double gr : risks)
                for (double gt : trades) {
                    regime::StrategySpec v = base;
                    v.gamma_risk = gr;
                    v.gamma_trade = gt;
                    char buf[64];
                    std::snprintf(buf, sizeof(buf), "%s_gr%g_gt%g", v.name.c_str(), gr, gt);
                    v.name = buf;
                    cfg.strategies.push_back(v);
                }
        }
        if (j.contains("simulate")) {
            const json& s = j.at("simulate");
            auto& sp = cfg.simulate;
            sp.n_assets = static_cast<std::size_t>(get_or(s, "n_assets", sp.n_assets));
            sp.p_stay_bull = get_or(s, "p_stay_bull", sp.p_stay_bull);
            sp.p_stay_bear = get_or(s, "p_stay_bear", sp.p_stay_bear);
            sp.bull_mean = get_or(s, "bull_mean", sp.bull_mean);
            sp.bull_vol = get_or(s, "bull_vol", sp.bull_vol);
            sp.bear_mean = get_or(s, "bear_mean", sp.bear_mean);
            sp.bear_vol = get_or(s, "bear_vol", sp.bear_vol);
            sp.correlation = get_or(s, "correlation", sp.correlation);
            sp.risk_free_yield = get_or(s, "risk_free_yield", sp.risk_free_yield);
            sp.t_count = static_cast<std::size_t>(get_or(s, "t_count", sp.t_count));
            if (s.contains("start_date"))
                sp.start_date = regime::parse_date(s.at("start_date").get<std::string>());
            sp.seed = static_cast<std::uint64_t>(get_or(s, "seed", sp.seed));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }

    // Self-describing snapshot of everything the run will use.
    json r;
    r["data"] = {{"returns", cfg.returns_path},
                 {"riskfree", cfg.riskfree_path},
                 {"riskfree_column", cfg.riskfree_column},
                 {"returns_kind", cfg.returns_kind == regime::SeriesKind::Returns ? "returns" : "levels"},
                 {"macro", cfg.macro_path}};
    r["universe"] = cfg.universe;
    r["schedule"] = {{"testing_begin", cfg.testing.begin ? regime::format_date(cfg.testing.begin) : ""},
                     {"testing_end", cfg.testing.end ? regime::format_date(cfg.testing.end) : ""},
                     {"refit_interval_months", cfg.pipeline.refit_interval_months},
                     {"training_lookback_years", cfg.pipeline.training_lookback_years},
                     {"validation_lookback_years", cfg.pipeline.validation_lookback_years}};
    r["lambda_grid"] = cfg.pipeline.lambda_grid;
    r["smoothing_halflives"] = cfg.pipeline.smoothing_candidates;
    r["cost_a"] = cfg.pipeline.cost_a;
    r["seed"] = cfg.pipeline.seed;
    r["jm"] = {{"restarts", cfg.pipeline.jm_restarts}, {"exclude_dd", cfg.pipeline.exclude_dd}};
    r["gbdt"] = {{"rounds", cfg.pipeline.gbdt.rounds},
                 {"max_depth", cfg.pipeline.gbdt.max_depth},
                 {"learning_rate", cfg.pipeline.gbdt.learning_rate},
                 {"min_child_weight", cfg.pipeline.gbdt.min_child_weight},
                 {"l2_leaf_regularization", cfg.pipeline.gbdt.l2_leaf_regularization}};
    r["cache_dir"] = cfg.pipeline.cache_dir;
    r["output_dir"] = cfg.output_dir;
    r["zero_one_per_asset"] = cfg.zero_one_per_asset;
    json strats = json::array();
    for (const auto& s : cfg.strategies)
        strats.push_back({{"kind", regime::strategy_kind_name(s.kind)},
                          {"name", s.name},
                          {"gamma_risk", s.gamma_risk},
                          {"gamma_trade", s.gamma_trade},
                          {"cost_a", s.cost_a},
                          {"w_ub", s.w_ub},
                          {"leverage_cap", s.leverage_cap},
                          {"min_bullish_count", s.min_bullish_count},
                          {"covariance_halflife", s.covariance_halflife},
                          {"bearish_return_cap", s.bearish_return_cap},
                          {"bullish_minvar_mu", s.bullish_minvar_mu},
                          {"mv_mu_halflife", s.mv_mu_halflife},
                          {"fix_mix_weights", s.fix_mix_weights}});
    r["strategies"] = strats;
    r["simulate"] = {{"n_assets", cfg.simulate.n_assets},
                     {"p_stay_bull", cfg.simulate.p_stay_bull},
                     {"p_stay_bear", cfg.simulate.p_stay_bear},
                     {"bull_mean", cfg.simulate.bull_mean},
                     {"bull_vol", cfg.simulate.bull_vol},
                     {"bear_mean", cfg.simulate.bear_mean},
                     {"bear_vol", cfg.simulate.bear_vol},
                     {"correlation", cfg.simulate.correlation},
                     {"risk_free_yield", cfg.simulate.risk_free_yield},
                     {"t_count", cfg.simulate.t_count},
                     {"start_date", regime::format_date(cfg.simulate.start_date)},
                     {"seed", cfg.simulate.seed}};
    cfg.resolved = std::move(r);
    return cfg;
}

void write_resolved_config(const RunConfig& cfg) {
    fs::create_directories(cfg.output_dir);
    std::ofstream out(fs::path(cfg.output_dir) / "resolved_config.json");
    out << cfg.resolved.dump(2) << "\n";
}

struct LoadedData {
    regime::ReturnPanel panel;
    regime::MacroPanel macro;
};

LoadedData load_data(RunConfig& cfg) {
    if (cfg.returns_path.empty()) throw ConfigError("data.returns path is required");
    if (cfg.macro_path.empty()) throw ConfigError("data.macro path is required");
    LoadedData d;
    try {
        regime::IngestConfig ic;
        ic.kind = cfg.returns_kind;
        ic.risk_free_column = cfg.riskfree_column;
        ic.risk_free_path = cfg.riskfree_path;
        d.panel = regime::load_return_panel(cfg.returns_path, ic);
        d.macro = regime::load_macro_panel(cfg.macro_path);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
    if (cfg.universe.empty()) cfg.universe = d.panel.assets;
    for (const std::string& a : cfg.universe)
        if (d.panel.asset_index(a) < 0) throw DataError("configured asset not in data: " + a);
    if (cfg.testing.begin == 0) cfg.testing.begin = d.panel.dates.front();
    if (cfg.testing.end == 0) cfg.testing.end = d.panel.dates.back() + 1;
    // Restrict the panel to the configured universe, preserving order.
    if (cfg.universe != d.panel.assets) {
        regime::ReturnPanel sub;
        sub.dates = d.panel.dates;
        sub.assets = cfg.universe;
        sub.risk_free = d.panel.risk_free;
        sub.returns = regime::Matrix(d.panel.size(), cfg.universe.size());
        for (std::size_t j = 0; j < cfg.universe.size(); ++j) {
            const int src = d.panel.asset_index(cfg.universe[j]);
            for (std::size_t t = 0; t < d.panel.size(); ++t)
                sub.returns(t, j) = d.panel.returns(t, src);
        }
        d.panel = std::move(sub);
    }
    return d;
}

int cmd_simulate(RunConfig& cfg) {
    write_resolved_config(cfg);
    regime::SyntheticUniverse u = regime::generate(cfg.simulate);
    regime::write_universe_csv(u, cfg.output_dir);
    std::size_t bull_days = 0, total = 0;
    for (const auto& s : u.states)
        for (int v : s) {
            bull_days += v;
            ++total;
        }
    std::cout << "wrote returns.csv riskfree.csv macro.csv truth_states.csv to " << cfg.output_dir
              << "\nassets: " << u.panel.n_assets() << ", days: " << u.panel.size()
              << ", planted bull fraction: " << static_cast<double>(bull_days) / total << "\n";
    return 0;
}

void write_lambda_history(const regime::StageResult& stage, const std::string& output_dir) {
    std::ofstream out(fs::path(output_dir) / "lambda_history.csv");
    out << "asset,refit_date,lambda,validation_sharpe,chosen\n";
    for (const auto& a : stage.assets)
        for (const auto& r : a.refits)
            for (std::size_t i = 0; i < r.grid.size(); ++i)
                out << a.asset << "," << regime::format_date(r.refit_date) << ","
                    << regime::format_value(r.grid[i]) << "," << regime::format_value(r.validation_sharpe[i])
                    << "," << (r.grid[i] == r.chosen_lambda ? 1 : 0) << "\n";
}

int cmd_tune(RunConfig& cfg) {
    write_resolved_config(cfg);
    LoadedData data = load_data(cfg);
    regime::StageResult stage =
        regime::run_regime_stage(data.panel, data.macro, cfg.testing, cfg.pipeline);
    write_lambda_history(stage, cfg.output_dir);
    std::ofstream out(fs::path(cfg.output_dir) / "smoothing_halflives.csv");
    out << "asset,halflife\n";
    for (const auto& a : stage.assets)
        out << a.asset << "," << regime::format_value(a.smoothing_halflife) << "\n";
    std::cout << "wrote lambda_history.csv and smoothing_halflives.csv to " << cfg.output_dir << "\n";
    return 0;
}

json metrics_to_json(const regime::MetricSet& m) {
    auto v = [](double x) { return std::isnan(x) ? json() : json(x); };
    return {{"ann_excess_return", v(m.ann_excess_return)},
            {"ann_excess_volatility", v(m.ann_excess_volatility)},
            {"sharpe", v(m.sharpe)},
            {"sortino", v(m.sortino)},
            {"mdd", v(m.mdd)},
            {"calmar", v(m.calmar)},
            {"ann_turnover", v(m.ann_turnover)},
            {"avg_leverage", v(m.avg_leverage)}};
}

void write_daily_csv(const fs::path& path, const regime::BacktestResult& res,
                     const std::vector<std::string>& assets) {
    std::ofstream out(path);
    out << "date,ret,excess,cost,wealth,lev,trade_l1";
    for (const auto& a : assets) out << ",w_" << a;
    for (const auto& a : assets) out << ",t_" << a;
    out << "\n";
    for (std::size_t t = 0; t < res.dates.size(); ++t) {
        double lev = 0.0, tl1 = 0.0;
        for (std::size_t j = 0; j < assets.size(); ++j) {
            lev += res.weights_post(t, j);
            tl1 += std::abs(res.trades(t, j));
        }
        out << regime::format_date(res.dates[t]) << "," << regime::format_value(res.portfolio_returns[t])
            << "," << regime::format_value(res.net_excess[t]) << "," << regime::format_value(res.costs[t])
            << "," << regime::format_value(res.wealth[t]) << "," << regime::format_value(lev) << ","
            << regime::format_value(tl1);
        for (std::size_t j = 0; j < assets.size(); ++j)
            out << "," << regime::format_value(res.weights_post(t, j));
        for (std::size_t j = 0; j < assets.size(); ++j)
            out << "," << regime::format_value(res.trades(t, j));
        out << "\n";
    }
}

// Single-asset switch strategy packaged as a BacktestResult so reporting is
// uniform.
regime::BacktestResult zero_one_result(const regime::ReturnPanel& panel, std::size_t asset,
                                       const std::vector<regime::Date>& dates,
                                       const std::vector<int>& positions, double cost_a) {
    const std::size_t i0 = panel.lower_bound(dates.front());
    std::vector<double> rets(dates.size()), rf(dates.size());
    for (std::size_t i = 0; i < dates.size(); ++i) {
        rets[i] = panel.returns(i0 + i, asset);
        rf[i] = panel.risk_free[i0 + i];
    }
    std::vector<double> strat = regime::zero_one_strategy(positions, rets, rf, cost_a);

    regime::BacktestResult res;
    res.dates = dates;
    res.weights_post = regime::Matrix(dates.size(), 1);
    res.trades = regime::Matrix(dates.size(), 1);
    res.costs.resize(dates.size());
    res.portfolio_returns = strat;
    res.net_excess.resize(dates.size());
    res.wealth.resize(dates.size());
    std::vector<double> trades_l1(dates.size()), lev(dates.size());
    int prev = 0;
    double w = 1.0;
    for (std::size_t t = 0; t < dates.size(); ++t) {
        res.weights_post(t, 0) = positions[t];
        res.trades(t, 0) = positions[t] - prev;
        res.costs[t] = cost_a * std::abs(positions[t] - prev);
        res.net_excess[t] = strat[t] - rf[t];
        res.wealth[t] = (w *= 1.0 + strat[t]);
        trades_l1[t] = std::abs(res.trades(t, 0));
        lev[t] = positions[t];
        prev = positions[t];
    }
    trades_l1[0] = 0.0;
    res.metrics = regime::compute_metrics(res.net_excess, res.portfolio_returns, trades_l1, lev);
    return res;
}

int cmd_backtest(RunConfig& cfg) {
    write_resolved_config(cfg);
    LoadedData data = load_data(cfg);
    if (cfg.strategies.empty()) throw ConfigError("no strategies configured");

    bool needs_stage = cfg.zero_one_per_asset;
    for (const auto& s : cfg.strategies) needs_stage = needs_stage || s.needs_forecasts();

    regime::StageResult stage;
    regime::RegimeInputs inputs;
    if (needs_stage) {
        stage = regime::run_regime_stage(data.panel, data.macro, cfg.testing, cfg.pipeline);
        inputs = regime::stage_to_regime_inputs(stage);
        write_lambda_history(stage, cfg.output_dir);
    }

    json metrics;
    json correlations = json::array();
    for (auto spec : cfg.strategies) {
        spec.cost_a = cfg.pipeline.cost_a;
        regime::BacktestResult res;
        try {
            res = regime::run_backtest(spec, data.panel, cfg.testing, needs_stage ? &inputs : nullptr);
        } catch (const std::exception& e) {
            throw std::runtime_error("strategy '" + spec.name + "': " + e.what());
        }
        metrics["strategies"][spec.name] = metrics_to_json(res.metrics);
        write_daily_csv(fs::path(cfg.output_dir) / ("daily_" + spec.name + ".csv"), res, cfg.universe);

        if (spec.uses_optimizer()) {
            const std::size_t i0 = data.panel.lower_bound(cfg.testing.begin);
            regime::Matrix realized(res.dates.size(), cfg.universe.size());
            for (std::size_t t = 0; t < res.dates.size(); ++t)
                for (std::size_t j = 0; j < cfg.universe.size(); ++j)
                    realized(t, j) = data.panel.excess(i0 + t, j);
            regime::ForecastCorrelation corr = regime::forecast_return_correlation(res.mu_series, realized);
            for (std::size_t j = 0; j < cfg.universe.size(); ++j)
                correlations.push_back({{"strategy", spec.name},
                                        {"asset", cfg.universe[j]},
                                        {"correlation", std::isnan(corr.per_asset[j])
                                                            ? json()
                                                            : json(corr.per_asset[j])}});
            correlations.push_back({{"strategy", spec.name},
                                    {"asset", "Overall"},
                                    {"correlation", std::isnan(corr.pooled) ? json() : json(corr.pooled)}});
        }
    }

    if (cfg.zero_one_per_asset) {
        for (std::size_t j = 0; j < stage.assets.size(); ++j) {
            const auto& a = stage.assets[j];
            regime::BacktestResult res = zero_one_result(data.panel, j, a.forecasts.dates,
                                                         a.forecasts.forecast, cfg.pipeline.cost_a);
            metrics["strategies"]["zero_one_" + a.asset] = metrics_to_json(res.metrics);
            write_daily_csv(fs::path(cfg.output_dir) / ("daily_zero_one_" + a.asset + ".csv"), res,
                            {a.asset});
            // Buy-and-hold reference for the same window.
            std::vector<int> hold(a.forecasts.dates.size(), 1);
            regime::BacktestResult bh =
                zero_one_result(data.panel, j, a.forecasts.dates, hold, 0.0);
            metrics["strategies"]["buy_hold_" + a.asset] = metrics_to_json(bh.metrics);
        }
    }

    {
        std::ofstream out(fs::path(cfg.output_dir) / "metrics.json");
        out << metrics.dump(2) << "\n";
    }
    {
        std::ofstream out(fs::path(cfg.output_dir) / "forecast_correlation.csv");
        out << "strategy,asset,correlation\n";
        for (const auto& row : correlations)
            out << row.at("strategy").get<std::string>() << "," << row.at("asset").get<std::string>() << ","
                << (row.at("correlation").is_null()
                        ? ""
                        : regime::format_value(row.at("correlation").get<double>()))
                << "\n";
    }
    std::cout << "wrote metrics.json, forecast_correlation.csv, and daily CSVs to " << cfg.output_dir
              << "\n";
    return 0;
}

// Recompute the metric set from a stored daily CSV.
int cmd_report(RunConfig& cfg) {
    json metrics;
    bool any = false;
    for (const auto& entry : fs::directory_iterator(cfg.output_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("daily_", 0) != 0 || entry.path().extension() != ".csv") continue;
        regime::CsvTable t = regime::read_csv(entry.path().string());
        const int c_ret = t.column("ret"), c_ex = t.column("excess"), c_lev = t.column("lev"),
                  c_tl1 = t.column("trade_l1");
        if (c_ret < 0 || c_ex < 0 || c_lev < 0 || c_tl1 < 0)
            throw DataError("daily CSV missing metric columns: " + name);
        std::vector<double> ret, ex, lev, tl1;
        for (const auto& row : t.rows) {
            ret.push_back(regime::parse_cell(row[c_ret], name));
            ex.push_back(regime::parse_cell(row[c_ex], name));
            lev.push_back(regime::parse_cell(row[c_lev], name));
            tl1.push_back(regime::parse_cell(row[c_tl1], name));
        }
        const std::string strategy = name.substr(6, name.size() - 10);
        metrics["strategies"][strategy] = metrics_to_json(regime::compute_metrics(ex, ret, tl1, lev));
        any = true;
    }
    if (!any) throw DataError("no daily_*.csv files found in " + cfg.output_dir);
    std::ofstream out(fs::path(cfg.output_dir) / "metrics.json");
    out << metrics.dump(2) << "\n";
    std::cout << "re-rendered metrics.json from daily CSVs in " << cfg.output_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"regime-switching asset allocation engine"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("-c,--config", config_path, "JSON config file")->required();

    auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
    auto* tune = app.add_subcommand("tune", "select jump penalties and smoothing halflives");
    auto* bt = app.add_subcommand("backtest", "run the configured strategies");
    auto* rep = app.add_subcommand("report", "re-render metrics from stored daily CSVs");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = parse_config(config_path);
        if (sim->parsed()) return cmd_simulate(cfg);
        if (tune->parsed()) return cmd_tune(cfg);
        if (bt->parsed()) return cmd_backtest(cfg);
        if (rep->parsed()) return cmd_report(cfg);
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
