#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "regime/allocation.hpp"
#include "regime/backtest.hpp"
#include "regime/features.hpp"
#include "regime/gbdt.hpp"
#include "regime/jump_model.hpp"
#include "regime/market_data.hpp"

namespace regime {

// Jump penalty grid: zero plus 16 log-spaced points on [0.1, 100].
inline std::vector<double> default_lambda_grid() {
    std::vector<double> grid = {0.0};
    const double lo = std::log(0.1), hi = std::log(100.0);
    for (int i = 0; i < 16; ++i) grid.push_back(std::exp(lo + (hi - lo) * i / 15.0));
    return grid;
}

struct PipelineConfig {
    std::vector<double> lambda_grid = default_lambda_grid();
    std::vector<double> smoothing_candidates = {0.0, 2.0, 4.0, 8.0};
    int refit_interval_months = 6;
    int training_lookback_years = 11;
    int validation_lookback_years = 5;
    double cost_a = 0.0005;
    double probability_threshold = 0.5;
    std::size_t k_states = 2;
    std::size_t jm_restarts = 10;
    std::size_t jm_max_iterations = 100;
    std::uint64_t seed = 0;
    GbdtParams gbdt;
    bool exclude_dd = false;       // drop the log-DD columns from the regime-model features
    std::string cache_dir;         // empty disables the on-disk block cache
};

struct RegimeForecastSeries {
    std::vector<Date> dates;
    std::vector<double> raw_prob;
    std::vector<double> smoothed_prob;
    std::vector<int> forecast;          // 1 = bullish
    std::vector<double> lambda_used;    // active jump penalty per date
    double smoothing_halflife = 0.0;
};

// Per-asset state reused across blocks and penalties: the full causal feature
// panel (return features then macro features) aligned to the return panel.
struct AssetContext {
    std::string name;
    const ReturnPanel* panel = nullptr;
    std::size_t asset = 0;
    std::vector<double> excess;
    std::vector<double> total;
    FeatureMatrix features;  // [T x 13]
};

inline AssetContext build_asset_context(const ReturnPanel& panel, const MacroPanel& macro,
                                        const std::string& asset_name) {
    if (macro.dates != panel.dates)
        throw std::invalid_argument("build_asset_context: macro panel dates must match the return panel");
    AssetContext ctx;
    ctx.name = asset_name;
    ctx.panel = &panel;
    const int idx = panel.asset_index(asset_name);
    if (idx < 0) throw std::invalid_argument("build_asset_context: unknown asset '" + asset_name + "'");
    ctx.asset = static_cast<std::size_t>(idx);
    const std::size_t t_count = panel.dates.size();
    ctx.excess.resize(t_count);
    ctx.total.resize(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
        ctx.excess[t] = panel.excess(t, ctx.asset);
        ctx.total[t] = panel.returns(t, ctx.asset);
    }
    const FeatureMatrix ret = return_features(ctx.excess, panel.dates);
    const FeatureMatrix mac = macro_features(macro);
    ctx.features.dates = panel.dates;
    ctx.features.names = ret.names;
    ctx.features.names.insert(ctx.features.names.end(), mac.names.begin(), mac.names.end());
    ctx.features.values = Matrix(t_count, ret.dim() + mac.dim());
    for (std::size_t t = 0; t < t_count; ++t) {
        for (std::size_t j = 0; j < ret.dim(); ++j) ctx.features.values(t, j) = ret.values(t, j);
        for (std::size_t j = 0; j < mac.dim(); ++j) ctx.features.values(t, ret.dim() + j) = mac.values(t, j);
    }
    return ctx;
}

// One refit block: out-of-sample bull probabilities for [start, end) plus the
// regime-conditional return table from the training fit that produced them.
struct BlockResult {
    Date start = 0;
    Date end = 0;
    double lambda = 0.0;
    std::vector<Date> dates;
    std::vector<double> raw_prob;
    RegimeReturnTable table;
    std::size_t train_switches = 0;  // state changes in the training fit
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, const std::string& name, Date block_start) {
    std::uint64_t h = 1469598103934665603ULL ^ seed;
    for (char c : name) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
    h = (h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(block_start) + (1LL << 31))) *
        1099511628211ULL;
    return h;
}

inline std::string lambda_tag(double lambda) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", lambda);
    return buf;
}

}  // namespace detail

// Fit the regime model on the trailing training window, train the classifier
// on one-day-shifted labels, and emit daily bull probabilities for the block.
inline BlockResult compute_block(const AssetContext& ctx, double lambda, Date block_start,
                                 const PipelineConfig& config) {
    const ReturnPanel& panel = *ctx.panel;
    BlockResult block;
    block.start = block_start;
    block.end = add_months(block_start, config.refit_interval_months);
    block.lambda = lambda;

    const Date train_begin = add_years(block_start, -config.training_lookback_years);
    if (panel.dates.front() > train_begin) {
        const int shortfall = train_begin >= panel.dates.front() ? 0 : panel.dates.front() - train_begin;
        throw std::runtime_error("insufficient history for " + ctx.name + " refit " +
                                 format_date(block_start) + ": training window starts " +
                                 format_date(train_begin) + ", data starts " +
                                 format_date(panel.dates.front()) + " (" + std::to_string(shortfall) +
                                 " calendar days short)");
    }
    const std::size_t a = panel.lower_bound(train_begin);
    const std::size_t b = panel.lower_bound(block_start);
    if (b - a < 64) throw std::runtime_error("training window too small for " + ctx.name + " refit " +
                                             format_date(block_start));

    // Regime model: standardized return features over the training window.
    FeatureMatrix jm_all = select_jm_features(
        FeatureMatrix{ctx.features.dates, return_feature_names(),
                      [&] {
                          Matrix m(ctx.features.size(), 8);
                          for (std::size_t t = 0; t < ctx.features.size(); ++t)
                              for (std::size_t j = 0; j < 8; ++j) m(t, j) = ctx.features.values(t, j);
                          return m;
                      }(),
                      false, {}},
        config.exclude_dd);
    jm_all = standardize(jm_all, DateRange{train_begin, block_start});
    Matrix jm_x(b - a, jm_all.dim());
    for (std::size_t t = a; t < b; ++t)
        for (std::size_t j = 0; j < jm_all.dim(); ++j) jm_x(t - a, j) = jm_all.values(t, j);

    std::vector<double> train_excess(ctx.excess.begin() + a, ctx.excess.begin() + b);
    std::vector<double> train_total(ctx.total.begin() + a, ctx.total.begin() + b);
    JumpModelOptions jm_opts;
    jm_opts.restarts = config.jm_restarts;
    jm_opts.max_iterations = config.jm_max_iterations;
    jm_opts.seed = detail::mix_seed(config.seed, ctx.name, block_start);
    JumpModelFit fit;
    try {
        fit = fit_jump_model(jm_x, config.k_states, lambda, jm_opts, train_excess, train_total);
    } catch (const std::exception& e) {
        throw std::runtime_error("regime fit failed for " + ctx.name + " refit " +
                                 format_date(block_start) + ": " + e.what());
    }

    for (std::size_t t = 1; t < fit.states.size(); ++t)
        if (fit.states[t] != fit.states[t - 1]) ++block.train_switches;

    const int bull_raw = fit.raw_state_for(0), bear_raw = fit.raw_state_for(1);
    if (bull_raw >= 0 && bear_raw >= 0 && fit.stats[bull_raw].occupied && fit.stats[bear_raw].occupied) {
        block.table.bull_mean_excess = fit.stats[bull_raw].mean_excess;
        block.table.bear_mean_excess = fit.stats[bear_raw].mean_excess;
        block.table.valid = true;
    }

    // Classifier targets: label of the next day (1 = bullish). Rows whose
    // macro features are still warming up are dropped from training.
    std::vector<std::size_t> rows;
    std::vector<int> y;
    for (std::size_t t = a; t + 1 < b; ++t) {
        bool finite = true;
        for (std::size_t j = 0; j < ctx.features.dim(); ++j)
            if (!std::isfinite(ctx.features.values(t, j))) { finite = false; break; }
        if (!finite) continue;
        rows.push_back(t);
        y.push_back(fit.labels[fit.states[t + 1 - a]] == 0 ? 1 : 0);
    }
    if (rows.empty())
        throw std::runtime_error("no usable classifier rows for " + ctx.name + " refit " +
                                 format_date(block_start));

    std::size_t positives = 0;
    for (int v : y) positives += v;

    const std::size_t p0 = panel.lower_bound(block_start);
    const std::size_t p1 = panel.lower_bound(block.end);
    if (p0 == 0) throw std::runtime_error("no prior trading day before " + format_date(block_start));

    if (positives == 0 || positives == y.size()) {
        // Degenerate training labels (one regime only, typical at extreme
        // penalties): forecast that regime throughout the block.
        const double p = positives == 0 ? 0.0 : 1.0;
        for (std::size_t t = p0; t < p1; ++t) {
            block.dates.push_back(panel.dates[t]);
            block.raw_prob.push_back(p);
        }
        return block;
    }

    Matrix train_x(rows.size(), ctx.features.dim());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < ctx.features.dim(); ++j)
            train_x(i, j) = ctx.features.values(rows[i], j);
    BoostedTreesModel model;
    try {
        model = gbdt_train(train_x, y, config.gbdt);
    } catch (const std::exception& e) {
        throw std::runtime_error("classifier training failed for " + ctx.name + " refit " +
                                 format_date(block_start) + ": " + e.what());
    }

    for (std::size_t t = p0; t < p1; ++t) {
        const double* x = ctx.features.values.row(t - 1);
        for (std::size_t j = 0; j < ctx.features.dim(); ++j)
            if (!std::isfinite(x[j]))
                throw std::runtime_error("features unavailable at " + format_date(panel.dates[t - 1]) +
                                         " for " + ctx.name);
        block.dates.push_back(panel.dates[t]);
        block.raw_prob.push_back(gbdt_predict_proba_one(model, x));
    }
    return block;
}

inline nlohmann::json to_json(const BlockResult& block) {
    return {{"start", static_cast<int>(block.start)},
            {"end", static_cast<int>(block.end)},
            {"lambda", block.lambda},
            {"dates", block.dates},
            {"raw_prob", block.raw_prob},
            {"bull_mean_excess", block.table.bull_mean_excess},
            {"bear_mean_excess", block.table.bear_mean_excess},
            {"table_valid", block.table.valid},
            {"train_switches", block.train_switches}};
}

inline BlockResult block_result_from_json(const nlohmann::json& j) {
    BlockResult block;
    block.start = j.at("start").get<int>();
    block.end = j.at("end").get<int>();
    block.lambda = j.at("lambda");
    block.dates = j.at("dates").get<std::vector<Date>>();
    block.raw_prob = j.at("raw_prob").get<std::vector<double>>();
    block.table.bull_mean_excess = j.at("bull_mean_excess");
    block.table.bear_mean_excess = j.at("bear_mean_excess");
    block.table.valid = j.at("table_valid");
    block.train_switches = j.at("train_switches");
    return block;
}

// Insert-or-get cache of immutable block results, optionally persisted as
// cache/<asset>/<block-start>/<lambda>.json.
class BlockCache {
  public:
    BlockCache(std::string cache_dir, std::uint64_t config_fingerprint)
        : dir_(std::move(cache_dir)), fingerprint_(config_fingerprint) {}

    const BlockResult& get(const AssetContext& ctx, double lambda, Date block_start,
                           const PipelineConfig& config) {
        const std::string key =
            ctx.name + "|" + format_date(block_start) + "|" + detail::lambda_tag(lambda);
        auto it = memory_.find(key);
        if (it != memory_.end()) return it->second;

        if (!dir_.empty()) {
            const auto path = disk_path(ctx.name, lambda, block_start);
            std::ifstream in(path);
            if (in) {
                nlohmann::json j = nlohmann::json::parse(in);
                if (j.value("fingerprint", std::uint64_t(0)) == fingerprint_)
                    return memory_.emplace(key, block_result_from_json(j)).first->second;
            }
        }

        BlockResult block = compute_block(ctx, lambda, block_start, config);
        if (!dir_.empty()) {
            const auto path = disk_path(ctx.name, lambda, block_start);
            std::filesystem::create_directories(path.parent_path());
            nlohmann::json j = to_json(block);
            j["fingerprint"] = fingerprint_;
            std::ofstream out(path);
            out << j.dump();
        }
        return memory_.emplace(key, std::move(block)).first->second;
    }

  private:
    std::filesystem::path disk_path(const std::string& asset, double lambda, Date block_start) const {
        return std::filesystem::path(dir_) / asset / format_date(block_start) /
               (detail::lambda_tag(lambda) + ".json");
    }

    std::string dir_;
    std::uint64_t fingerprint_;
    std::map<std::string, BlockResult> memory_;
};

// Fingerprint of every config field a cached block depends on.
inline std::uint64_t block_config_fingerprint(const PipelineConfig& c) {
    std::string s = std::to_string(c.training_lookback_years) + "|" +
                    std::to_string(c.refit_interval_months) + "|" + std::to_string(c.k_states) + "|" +
                    std::to_string(c.jm_restarts) + "|" + std::to_string(c.jm_max_iterations) + "|" +
                    std::to_string(c.seed) + "|" + std::to_string(c.exclude_dd) + "|" +
                    std::to_string(c.gbdt.rounds) + "|" + std::to_string(c.gbdt.max_depth) + "|" +
                    detail::lambda_tag(c.gbdt.learning_rate) + "|" +
                    detail::lambda_tag(c.gbdt.min_child_weight) + "|" +
                    detail::lambda_tag(c.gbdt.l2_leaf_regularization);
    return detail::mix_seed(0, s, 0);
}

namespace detail {

// Block starts from a fixed anchor grid covering [window.begin, window.end):
// anchor + interval*i for integer i, so overlapping windows share blocks.
inline std::vector<Date> block_starts(const DateRange& window, Date anchor, int interval_months) {
    int i = 0;
    while (add_months(anchor, interval_months * i) > window.begin) --i;
    while (add_months(anchor, interval_months * (i + 1)) <= window.begin) ++i;
    std::vector<Date> starts;
    for (; add_months(anchor, interval_months * i) < window.end; ++i)
        starts.push_back(add_months(anchor, interval_months * i));
    return starts;
}

}  // namespace detail

// Concatenated out-of-sample bull probabilities for a window, smoothed
// continuously across refit boundaries and thresholded.
inline RegimeForecastSeries generate_forecasts(const AssetContext& ctx, double lambda,
                                               const DateRange& window, const PipelineConfig& config,
                                               BlockCache& cache, double smoothing_halflife,
                                               Date anchor, std::vector<RegimeReturnTable>* tables = nullptr) {
    RegimeForecastSeries series;
    series.smoothing_halflife = smoothing_halflife;
    for (Date start : detail::block_starts(window, anchor, config.refit_interval_months)) {
        const BlockResult& block = cache.get(ctx, lambda, start, config);
        for (std::size_t i = 0; i < block.dates.size(); ++i) {
            if (block.dates[i] < window.begin || block.dates[i] >= window.end) continue;
            series.dates.push_back(block.dates[i]);
            series.raw_prob.push_back(block.raw_prob[i]);
            series.lambda_used.push_back(lambda);
            if (tables) tables->push_back(block.table);
        }
    }
    series.smoothed_prob = ewm_mean(series.raw_prob, smoothing_halflife);
    for (double p : series.smoothed_prob)
        series.forecast.push_back(p >= config.probability_threshold ? 1 : 0);
    return series;
}

// Single-asset switch strategy: fully invested when bullish, fully in the
// risk-free asset otherwise; entry/exit charged at the one-way cost rate.
inline std::vector<double> zero_one_strategy(const std::vector<int>& positions,
                                             const std::vector<double>& asset_returns,
                                             const std::vector<double>& risk_free, double cost_a) {
    if (positions.size() != asset_returns.size() || positions.size() != risk_free.size())
        throw std::invalid_argument("zero_one_strategy: misaligned inputs");
    std::vector<double> out(positions.size());
    int prev = 0;  // entered from cash
    for (std::size_t t = 0; t < positions.size(); ++t) {
        const int pos = positions[t];
        out[t] = pos * asset_returns[t] + (1 - pos) * risk_free[t] - cost_a * std::abs(pos - prev);
        prev = pos;
    }
    return out;
}

inline std::vector<double> zero_one_strategy(const RegimeForecastSeries& forecasts,
                                             const std::vector<double>& asset_returns,
                                             const std::vector<double>& risk_free, double cost_a) {
    return zero_one_strategy(forecasts.forecast, asset_returns, risk_free, cost_a);
}

namespace detail {

// Annualized Sharpe of the validation-window switch strategy at (lambda,
// smoothing halflife); NaN when the strategy has zero variance.
inline double validation_sharpe(const AssetContext& ctx, double lambda, double halflife,
                                const DateRange& validation, Date anchor, const PipelineConfig& config,
                                BlockCache& cache) {
    RegimeForecastSeries fc = generate_forecasts(ctx, lambda, validation, config, cache, halflife, anchor);
    const ReturnPanel& panel = *ctx.panel;
    const std::size_t i0 = panel.lower_bound(validation.begin);
    std::vector<double> rets(fc.dates.size()), rf(fc.dates.size());
    for (std::size_t i = 0; i < fc.dates.size(); ++i) {
        if (panel.dates[i0 + i] != fc.dates[i])
            throw std::logic_error("validation_sharpe: forecast dates misaligned");
        rets[i] = ctx.total[i0 + i];
        rf[i] = panel.risk_free[i0 + i];
    }
    std::vector<double> strat = zero_one_strategy(fc, rets, rf, config.cost_a);
    std::vector<double> excess(strat.size());
    for (std::size_t i = 0; i < strat.size(); ++i) excess[i] = strat[i] - rf[i];
    return annualized_sharpe(excess);
}

}  // namespace detail

struct LambdaSelection {
    double chosen_lambda = 0.0;
    double smoothing_halflife = 0.0;
    std::vector<double> grid;
    std::vector<double> validation_sharpe;  // at the selected halflife, NaN where undefined
};

// Jump-penalty selection at one refit date: highest validation Sharpe of the
// switch strategy over the trailing validation window; ties go to the larger
// penalty. With select_halflife, the smoothing halflife is chosen jointly
// (penalty remains the primary tie-break, then the larger halflife).
inline LambdaSelection select_lambda(const AssetContext& ctx, Date refit_date,
                                     const PipelineConfig& config, BlockCache& cache, Date anchor,
                                     double frozen_halflife, bool select_halflife) {
    const DateRange validation{add_years(refit_date, -config.validation_lookback_years), refit_date};
    const std::vector<double> halflives =
        select_halflife ? config.smoothing_candidates : std::vector<double>{frozen_halflife};

    LambdaSelection sel;
    sel.grid = config.lambda_grid;
    double best = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (double lambda : config.lambda_grid)
        for (double hl : halflives) {
            const double sharpe = detail::validation_sharpe(ctx, lambda, hl, validation, anchor, config, cache);
            if (std::isnan(sharpe)) continue;
            if (!found || sharpe >= best) {
                best = sharpe;
                sel.chosen_lambda = lambda;
                sel.smoothing_halflife = hl;
                found = true;
            }
        }
    if (!found)
        throw std::runtime_error("penalty selection failed for " + ctx.name + " at " +
                                 format_date(refit_date) + ": no grid point has a defined Sharpe");
    for (double lambda : config.lambda_grid)
        sel.validation_sharpe.push_back(detail::validation_sharpe(ctx, lambda, sel.smoothing_halflife,
                                                                  validation, anchor, config, cache));
    return sel;
}

struct RefitRecord {
    Date refit_date;
    double chosen_lambda = 0.0;
    std::vector<double> grid;
    std::vector<double> validation_sharpe;
};

struct AssetStageResult {
    std::string asset;
    double smoothing_halflife = 0.0;
    RegimeForecastSeries forecasts;
    std::vector<RefitRecord> refits;
    std::vector<RegimeReturnTable> tables;  // per forecast date, block-constant
};

struct StageResult {
    DateRange window;
    std::vector<AssetStageResult> assets;
};

// Algorithm: per asset, per refit block, select the penalty on the trailing
// validation window, then emit that block's out-of-sample forecasts under it.
// The smoothing halflife is chosen at the first refit and frozen.
inline AssetStageResult run_asset_stage(const AssetContext& ctx, const DateRange& testing_window,
                                        const PipelineConfig& config, BlockCache& cache) {
    AssetStageResult out;
    out.asset = ctx.name;
    const Date anchor = testing_window.begin;

    RegimeForecastSeries& series = out.forecasts;
    for (Date refit : detail::block_starts(testing_window, anchor, config.refit_interval_months)) {
        const bool first = out.refits.empty();
        LambdaSelection sel = select_lambda(ctx, refit, config, cache, anchor,
                                            first ? 0.0 : out.smoothing_halflife, first);
        if (first) out.smoothing_halflife = sel.smoothing_halflife;
        out.refits.push_back({refit, sel.chosen_lambda, sel.grid, sel.validation_sharpe});

        const BlockResult& block = cache.get(ctx, sel.chosen_lambda, refit, config);
        for (std::size_t i = 0; i < block.dates.size(); ++i) {
            if (block.dates[i] < testing_window.begin || block.dates[i] >= testing_window.end) continue;
            series.dates.push_back(block.dates[i]);
            series.raw_prob.push_back(block.raw_prob[i]);
            series.lambda_used.push_back(sel.chosen_lambda);
            out.tables.push_back(block.table);
        }
    }
    series.smoothing_halflife = out.smoothing_halflife;
    series.smoothed_prob = ewm_mean(series.raw_prob, out.smoothing_halflife);
    for (double p : series.smoothed_prob)
        series.forecast.push_back(p >= config.probability_threshold ? 1 : 0);
    return out;
}

inline StageResult run_regime_stage(const ReturnPanel& panel, const MacroPanel& macro,
                                    const DateRange& testing_window, const PipelineConfig& config) {
    StageResult result;
    result.window = testing_window;
    const std::uint64_t fp = block_config_fingerprint(config);
    for (const std::string& asset : panel.assets) {
        AssetContext ctx = build_asset_context(panel, macro, asset);
        BlockCache cache(config.cache_dir, fp);
        result.assets.push_back(run_asset_stage(ctx, testing_window, config, cache));
    }
    return result;
}

// Repackage stage output as the per-day panel the backtest engine consumes.
inline RegimeInputs stage_to_regime_inputs(const StageResult& stage) {
    RegimeInputs inputs;
    if (stage.assets.empty()) return inputs;
    inputs.dates = stage.assets.front().forecasts.dates;
    const std::size_t t_count = inputs.dates.size(), n = stage.assets.size();
    for (const AssetStageResult& a : stage.assets)
        if (a.forecasts.dates != inputs.dates)
            throw std::logic_error("stage_to_regime_inputs: asset forecast dates misaligned");
    inputs.forecasts.assign(t_count, std::vector<int>(n));
    inputs.tables.assign(t_count, std::vector<RegimeReturnTable>(n));
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t t = 0; t < t_count; ++t) {
            inputs.forecasts[t][j] = stage.assets[j].forecasts.forecast[t];
            inputs.tables[t][j] = stage.assets[j].tables[t];
        }
    return inputs;
}

}  // namespace regime
