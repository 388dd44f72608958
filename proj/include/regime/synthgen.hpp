#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "regime/csv.hpp"
#include "regime/market_data.hpp"

namespace regime {

// Parameters of the planted two-state regime process (1 = bull, 0 = bear).
struct RegimeProcessSpec {
    std::size_t n_assets = 4;
    double p_stay_bull = 0.98;
    double p_stay_bear = 0.97;
    double bull_mean = 0.0004;   // daily
    double bull_vol = 0.008;
    double bear_mean = -0.0008;
    double bear_vol = 0.02;
    double correlation = 0.3;    // equicorrelation of shocks across assets
    double risk_free_yield = 2.0;  // percent per annum, constant
    std::size_t t_count = 5040;
    Date start_date = parse_date("2000-01-03");
    std::uint64_t seed = 42;
};

struct SyntheticUniverse {
    ReturnPanel panel;
    std::vector<std::vector<int>> states;  // [N][T], planted truth, 1 = bull
    MacroPanel macro;
};

namespace detail {

inline void validate_process_spec(const RegimeProcessSpec& spec) {
    if (spec.n_assets == 0) throw std::invalid_argument("synthgen: n_assets must be >= 1");
    if (spec.t_count < 2) throw std::invalid_argument("synthgen: t_count must be >= 2");
    if (spec.p_stay_bull <= 0.0 || spec.p_stay_bull > 1.0 || spec.p_stay_bear <= 0.0 ||
        spec.p_stay_bear > 1.0)
        throw std::invalid_argument("synthgen: stay probabilities must be in (0, 1]");
    if (spec.bull_vol <= 0.0 || spec.bear_vol <= 0.0)
        throw std::invalid_argument("synthgen: volatilities must be positive");
    if (spec.correlation < 0.0 || spec.correlation >= 1.0)
        throw std::invalid_argument("synthgen: correlation must be in [0, 1)");
}

inline bool is_weekend(Date d) {
    const int dow = ((d % 7) + 7 + 4) % 7;  // 1970-01-01 was a Thursday; 0 = Sunday
    return dow == 0 || dow == 6;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t h = (seed + 0x9E3779B97F4A7C15ULL) ^ (stream * 0xBF58476D1CE4E5B9ULL);
    h ^= h >> 31;
    h *= 0x94D049BB133111EBULL;
    h ^= h >> 29;
    return h;
}

}  // namespace detail

// Simulate the per-asset Markov chains and state-conditional Gaussian returns
// with an equicorrelated common shock, plus a macro panel whose series are
// smooth functions of the planted states with additive noise. Deterministic
// in the seed.
inline SyntheticUniverse generate(const RegimeProcessSpec& spec) {
    detail::validate_process_spec(spec);
    const std::size_t n = spec.n_assets, t_count = spec.t_count;

    SyntheticUniverse u;
    u.panel.dates.reserve(t_count);
    Date d = spec.start_date;
    while (u.panel.dates.size() < t_count) {
        if (!detail::is_weekend(d)) u.panel.dates.push_back(d);
        ++d;
    }
    for (std::size_t j = 0; j < n; ++j) u.panel.assets.push_back("asset" + std::to_string(j + 1));
    u.panel.returns = Matrix(t_count, n);
    const double rf_daily = annual_yield_to_daily(spec.risk_free_yield);
    u.panel.risk_free.assign(t_count, rf_daily);

    // Stationary start of the two-state chain.
    const double q_bull = 1.0 - spec.p_stay_bull, q_bear = 1.0 - spec.p_stay_bear;
    const double stationary_bull =
        (q_bull + q_bear) > 0.0 ? q_bear / (q_bull + q_bear) : 1.0;

    u.states.assign(n, std::vector<int>(t_count));
    std::vector<std::mt19937_64> rng;
    for (std::size_t j = 0; j < n; ++j) rng.emplace_back(detail::derive_seed(spec.seed, j + 1));
    std::mt19937_64 common_rng(detail::derive_seed(spec.seed, 0));
    std::mt19937_64 macro_rng(detail::derive_seed(spec.seed, n + 1));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const double load = std::sqrt(spec.correlation);
    const double resid = std::sqrt(1.0 - spec.correlation);
    for (std::size_t t = 0; t < t_count; ++t) {
        const double common = gauss(common_rng);
        for (std::size_t j = 0; j < n; ++j) {
            int s;
            if (t == 0) {
                s = unif(rng[j]) < stationary_bull ? 1 : 0;
            } else {
                const int prev = u.states[j][t - 1];
                const double stay = prev ? spec.p_stay_bull : spec.p_stay_bear;
                s = unif(rng[j]) < stay ? prev : 1 - prev;
            }
            u.states[j][t] = s;
            const double z = load * common + resid * gauss(rng[j]);
            const double mean = s ? spec.bull_mean : spec.bear_mean;
            const double vol = s ? spec.bull_vol : spec.bear_vol;
            u.panel.returns(t, j) = mean + vol * z;
        }
    }

    // Macro stub: each series tracks a smoothed bull fraction so the macro
    // features carry genuine regime signal.
    u.macro.dates = u.panel.dates;
    u.macro.yield_2y.resize(t_count);
    u.macro.yield_slope_10y_2y.resize(t_count);
    u.macro.vix_level.resize(t_count);
    u.macro.stock_returns.resize(t_count);
    u.macro.bond_returns.resize(t_count);
    EwmMeanAccumulator bull_sm(3.0);
    for (std::size_t t = 0; t < t_count; ++t) {
        double bull_frac = 0.0, avg_ret = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            bull_frac += u.states[j][t];
            avg_ret += u.panel.returns(t, j);
        }
        bull_frac /= n;
        avg_ret /= n;
        const double b = bull_sm.add(bull_frac);
        u.macro.yield_2y[t] = 1.5 + 2.0 * b + 0.02 * gauss(macro_rng);
        u.macro.yield_slope_10y_2y[t] = 1.6 - 1.2 * b + 0.02 * gauss(macro_rng);
        u.macro.vix_level[t] = std::max(5.0, 12.0 + 20.0 * (1.0 - b) + 0.75 * gauss(macro_rng));
        u.macro.stock_returns[t] = avg_ret + 0.0005 * gauss(macro_rng);
        u.macro.bond_returns[t] = 0.0001 - 0.2 * (1.0 - b) * avg_ret + 0.001 * gauss(macro_rng);
    }
    return u;
}

// Write the universe in the same CSV formats the loaders ingest, plus the
// ground-truth state panel.
inline void write_universe_csv(const SyntheticUniverse& u, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const auto base = std::filesystem::path(dir);

    {
        std::ofstream out(base / "returns.csv");
        out << "date";
        for (const std::string& a : u.panel.assets) out << "," << a;
        out << "\n";
        for (std::size_t t = 0; t < u.panel.size(); ++t) {
            out << format_date(u.panel.dates[t]);
            for (std::size_t j = 0; j < u.panel.n_assets(); ++j)
                out << "," << format_value(u.panel.returns(t, j));
            out << "\n";
        }
    }
    {
        // Annualized percent yields, the form load_return_panel converts.
        std::ofstream out(base / "riskfree.csv");
        out << "date,riskfree\n";
        for (std::size_t t = 0; t < u.panel.size(); ++t) {
            const double annual = 100.0 * (std::pow(1.0 + u.panel.risk_free[t], kTradingDaysPerYear) - 1.0);
            out << format_date(u.panel.dates[t]) << "," << format_value(annual) << "\n";
        }
    }
    {
        std::ofstream out(base / "macro.csv");
        out << "date,yield_2y,yield_slope_10y_2y,vix_level,stock_returns,bond_returns\n";
        for (std::size_t t = 0; t < u.macro.dates.size(); ++t)
            out << format_date(u.macro.dates[t]) << "," << format_value(u.macro.yield_2y[t]) << ","
                << format_value(u.macro.yield_slope_10y_2y[t]) << "," << format_value(u.macro.vix_level[t])
                << "," << format_value(u.macro.stock_returns[t]) << ","
                << format_value(u.macro.bond_returns[t]) << "\n";
    }
    {
        std::ofstream out(base / "truth_states.csv");
        out << "date";
        for (const std::string& a : u.panel.assets) out << "," << a;
        out << "\n";
        for (std::size_t t = 0; t < u.panel.size(); ++t) {
            out << format_date(u.panel.dates[t]);
            for (std::size_t j = 0; j < u.panel.n_assets(); ++j) out << "," << u.states[j][t];
            out << "\n";
        }
    }
}

}  // namespace regime
