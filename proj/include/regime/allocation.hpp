#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "regime/mvo.hpp"

namespace regime {

enum class StrategyKind { FixMix, MinVar, MinVarRegime, MeanVar, MeanVarRegime, EqualWeight, EqualWeightRegime, ZeroOne };

inline std::string strategy_kind_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::FixMix: return "fix_mix";
        case StrategyKind::MinVar: return "minvar";
        case StrategyKind::MinVarRegime: return "minvar_regime";
        case StrategyKind::MeanVar: return "mv";
        case StrategyKind::MeanVarRegime: return "mv_regime";
        case StrategyKind::EqualWeight: return "ew";
        case StrategyKind::EqualWeightRegime: return "ew_regime";
        case StrategyKind::ZeroOne: return "zero_one";
    }
    return "unknown";
}

inline StrategyKind strategy_kind_from_name(const std::string& name) {
    for (StrategyKind k : {StrategyKind::FixMix, StrategyKind::MinVar, StrategyKind::MinVarRegime,
                           StrategyKind::MeanVar, StrategyKind::MeanVarRegime, StrategyKind::EqualWeight,
                           StrategyKind::EqualWeightRegime, StrategyKind::ZeroOne})
        if (strategy_kind_name(k) == name) return k;
    throw std::invalid_argument("unknown strategy kind: " + name);
}

struct StrategySpec {
    StrategyKind kind = StrategyKind::FixMix;
    std::string name;  // report label; defaults to the kind name
    double gamma_risk = 10.0;
    double gamma_trade = 1.0;
    double cost_a = 0.0005;
    double w_ub = 0.4;
    double leverage_cap = 1.0;
    int min_bullish_count = 4;
    double covariance_halflife = 252.0;
    double bearish_return_cap = -0.0010;
    double bullish_minvar_mu = 0.0010;
    double mv_mu_halflife = 5.0 * 252.0;  // EWMA halflife for the plain-MV return forecast
    std::vector<double> fix_mix_weights;  // optional explicit fix-mix weights

    bool is_regime_variant() const {
        return kind == StrategyKind::MinVarRegime || kind == StrategyKind::MeanVarRegime ||
               kind == StrategyKind::EqualWeightRegime;
    }
    bool uses_optimizer() const {
        return kind == StrategyKind::MinVar || kind == StrategyKind::MinVarRegime ||
               kind == StrategyKind::MeanVar || kind == StrategyKind::MeanVarRegime;
    }
    bool needs_forecasts() const { return is_regime_variant() || kind == StrategyKind::ZeroOne; }
};

// Factory with the per-kind default trading parameters.
inline StrategySpec make_strategy(StrategyKind kind) {
    StrategySpec spec;
    spec.kind = kind;
    spec.name = strategy_kind_name(kind);
    switch (kind) {
        case StrategyKind::MinVar:        spec.gamma_risk = 10.0; spec.gamma_trade = 0.0; break;
        case StrategyKind::MinVarRegime:  spec.gamma_risk = 10.0; spec.gamma_trade = 1.0; break;
        case StrategyKind::MeanVar:       spec.gamma_risk = 5.0;  spec.gamma_trade = 0.0; break;
        case StrategyKind::MeanVarRegime: spec.gamma_risk = 10.0; spec.gamma_trade = 1.0; break;
        default: break;
    }
    return spec;
}

// Regime-conditional mean excess returns from an asset's latest training fit.
struct RegimeReturnTable {
    double bull_mean_excess = 0.0;
    double bear_mean_excess = 0.0;
    bool valid = false;
};

// The benchmark fix-mix weights for the canonical 12-asset universe ordering:
// LargeCap, MidCap, SmallCap, EAFE, EM, REIT, HighYield, Commodity, Gold,
// Treasury, Corporate, AggBond.
inline std::vector<double> fix_mix_default() {
    return {0.10, 0.05, 0.05, 0.05, 0.05, 0.10, 0.10, 0.05, 0.05, 0.10, 0.10, 0.20};
}

// Kind-dependent return forecast vector.
inline std::vector<double> build_mu(const StrategySpec& spec, const std::vector<int>& forecasts,
                                    const std::vector<RegimeReturnTable>& regime_tables,
                                    const std::vector<double>& ewma_mu) {
    const std::size_t n = forecasts.size();
    std::vector<double> mu(n, 0.0);
    switch (spec.kind) {
        case StrategyKind::MinVar:
            for (double& v : mu) v = spec.bullish_minvar_mu;
            break;
        case StrategyKind::MinVarRegime:
            for (std::size_t j = 0; j < n; ++j) mu[j] = forecasts[j] ? spec.bullish_minvar_mu : 0.0;
            break;
        case StrategyKind::MeanVar:
            if (ewma_mu.size() != n) throw std::invalid_argument("build_mu: missing EWMA return forecasts");
            mu = ewma_mu;
            break;
        case StrategyKind::MeanVarRegime:
            if (regime_tables.size() != n) throw std::invalid_argument("build_mu: missing regime tables");
            for (std::size_t j = 0; j < n; ++j) {
                if (!regime_tables[j].valid)
                    throw std::runtime_error("build_mu: no regime table for asset " + std::to_string(j));
                mu[j] = forecasts[j] ? regime_tables[j].bull_mean_excess
                                     : std::min(regime_tables[j].bear_mean_excess, spec.bearish_return_cap);
            }
            break;
        default:
            throw std::invalid_argument("build_mu: strategy does not use return forecasts");
    }
    return mu;
}

// Daily target weights. Regime variants apply the risk-off override: fewer
// bullish assets than min_bullish_count means 100% risk-free.
inline std::vector<double> target_weights(const StrategySpec& spec, const std::vector<double>& mu,
                                          const Matrix& sigma, const std::vector<double>& w_pre,
                                          const std::vector<int>& forecasts) {
    const std::size_t n = w_pre.size();
    std::vector<double> w(n, 0.0);

    if (spec.is_regime_variant()) {
        int bullish = 0;
        for (int f : forecasts) bullish += f;
        if (bullish < spec.min_bullish_count) return w;  // all risk-free
    }

    switch (spec.kind) {
        case StrategyKind::EqualWeight:
            for (double& v : w) v = 1.0 / n;
            break;
        case StrategyKind::EqualWeightRegime: {
            int bullish = 0;
            for (int f : forecasts) bullish += f;
            for (std::size_t j = 0; j < n; ++j) w[j] = forecasts[j] ? 1.0 / bullish : 0.0;
            break;
        }
        case StrategyKind::FixMix:
            if (!spec.fix_mix_weights.empty()) {
                if (spec.fix_mix_weights.size() != n)
                    throw std::invalid_argument("fix_mix: configured weights do not match universe size");
                w = spec.fix_mix_weights;
            } else if (n == 12) {
                w = fix_mix_default();
            } else {
                throw std::invalid_argument("fix_mix: non-12-asset universe requires explicit weights");
            }
            break;
        case StrategyKind::MinVar:
        case StrategyKind::MinVarRegime:
        case StrategyKind::MeanVar:
        case StrategyKind::MeanVarRegime: {
            MvoProblem problem;
            problem.mu = mu;
            problem.sigma = sigma;
            problem.gamma_risk = spec.gamma_risk;
            problem.gamma_trade = spec.gamma_trade;
            problem.cost_a = spec.cost_a;
            problem.w_pre = w_pre;
            problem.w_ub = spec.w_ub;
            problem.leverage_cap = spec.leverage_cap;
            MvoSolution sol = solve_mvo(problem);
            if (!sol.converged)
                throw std::runtime_error("target_weights: optimizer failed to converge (kkt residual " +
                                         std::to_string(sol.kkt_residual) + ")");
            w = std::move(sol.weights);
            break;
        }
        case StrategyKind::ZeroOne:
            throw std::invalid_argument("target_weights: zero_one is a single-asset strategy");
    }

    // EW variants and fix-mix use w_ub = L = 1 implicitly.
    const double ub = spec.uses_optimizer() ? spec.w_ub : 1.0;
    const double cap = spec.uses_optimizer() ? spec.leverage_cap : 1.0 + 1e-12;
    double lev = 0.0;
    for (double v : w) {
        if (v < -1e-8 || v > ub + 1e-8) throw std::logic_error("target_weights: weight bound violated");
        lev += v;
    }
    if (lev > cap + 1e-8) throw std::logic_error("target_weights: leverage cap violated");
    return w;
}

}  // namespace regime
