#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "regime/matrix.hpp"

namespace regime {

struct RegimeStats {
    bool occupied = false;
    std::size_t count = 0;
    double mean_excess = 0.0;
    double std_excess = 0.0;
    double cum_excess = 0.0;
    double mean_total = 0.0;
};

// Result of fitting the K-state jump model. `states` holds raw cluster
// indices; `labels` maps raw index -> semantic regime (0 = bullish,
// 1 = bearish for K = 2, by cumulative excess return).
struct JumpModelFit {
    Matrix centroids;             // [K x D]
    std::vector<int> states;      // [T], raw cluster indices
    double lambda = 0.0;
    double objective = 0.0;
    std::vector<int> labels;      // raw -> semantic
    Matrix transition;            // [K x K] row-stochastic, raw indices
    std::vector<RegimeStats> stats;  // per raw state

    int semantic_state(std::size_t t) const { return labels[states[t]]; }

    int raw_state_for(int semantic) const {
        for (std::size_t k = 0; k < labels.size(); ++k)
            if (labels[k] == semantic) return static_cast<int>(k);
        return -1;
    }
};

// Globally optimal state sequence for fixed per-step losses L[t][k] via
// dynamic programming; ties in backtracking break to the lowest state index.
inline std::pair<std::vector<int>, double> assign_states_losses(const Matrix& losses, double lambda) {
    const std::size_t t_count = losses.rows, k_count = losses.cols;
    if (t_count == 0 || k_count == 0) throw std::invalid_argument("assign_states: empty input");
    if (lambda < 0.0) throw std::invalid_argument("assign_states: negative lambda");

    std::vector<double> value(losses.row(0), losses.row(0) + k_count);
    Matrix back(t_count, k_count);
    std::vector<double> next(k_count);
    for (std::size_t t = 1; t < t_count; ++t) {
        // min over j of value[j] + lambda*1{j != k}: only the global min and
        // the stay-in-place candidate matter.
        std::size_t best_j = 0;
        for (std::size_t j = 1; j < k_count; ++j)
            if (value[j] < value[best_j]) best_j = j;
        for (std::size_t k = 0; k < k_count; ++k) {
            double stay = value[k];
            double jump = value[best_j] + lambda;
            std::size_t from;
            if (stay <= jump) {
                from = k;
                if (jump <= stay && best_j < k) from = best_j;  // tie -> lowest index
            } else {
                from = best_j;
            }
            next[k] = losses(t, k) + std::min(stay, jump);
            back(t, k) = static_cast<double>(from);
        }
        value = next;
    }

    std::size_t last = 0;
    for (std::size_t k = 1; k < k_count; ++k)
        if (value[k] < value[last]) last = k;
    const double cost = value[last];

    std::vector<int> states(t_count);
    states[t_count - 1] = static_cast<int>(last);
    for (std::size_t t = t_count - 1; t > 0; --t)
        states[t - 1] = static_cast<int>(back(t, states[t]));
    return {std::move(states), cost};
}

inline Matrix pointwise_losses(const Matrix& x, const Matrix& centroids) {
    if (x.cols != centroids.cols) throw std::invalid_argument("assign_states: dimension mismatch");
    Matrix losses(x.rows, centroids.rows);
    for (std::size_t t = 0; t < x.rows; ++t) {
        const double* xt = x.row(t);
        for (std::size_t k = 0; k < centroids.rows; ++k) {
            const double* ck = centroids.row(k);
            double s = 0.0;
            for (std::size_t d = 0; d < x.cols; ++d) {
                const double diff = xt[d] - ck[d];
                s += diff * diff;
            }
            losses(t, k) = 0.5 * s;
        }
    }
    return losses;
}

// S-step of the coordinate descent: optimal states for fixed centroids under
// the scaled squared-distance loss l(x, theta) = 0.5 ||x - theta||^2.
inline std::pair<std::vector<int>, double> assign_states(const Matrix& x, const Matrix& centroids,
                                                         double lambda) {
    for (double v : x.data)
        if (!std::isfinite(v)) throw std::invalid_argument("assign_states: non-finite feature");
    return assign_states_losses(pointwise_losses(x, centroids), lambda);
}

// Row-normalized transition counts; rows of unvisited states are uniform.
inline Matrix transition_matrix(const std::vector<int>& states, std::size_t k_count) {
    Matrix counts(k_count, k_count);
    for (std::size_t t = 1; t < states.size(); ++t) {
        if (states[t - 1] < 0 || states[t] < 0 || states[t - 1] >= static_cast<int>(k_count) ||
            states[t] >= static_cast<int>(k_count))
            throw std::invalid_argument("transition_matrix: state out of range");
        counts(states[t - 1], states[t]) += 1.0;
    }
    for (std::size_t k = 0; k < k_count; ++k) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < k_count; ++j) row_sum += counts(k, j);
        for (std::size_t j = 0; j < k_count; ++j)
            counts(k, j) = row_sum > 0.0 ? counts(k, j) / row_sum : 1.0 / k_count;
    }
    return counts;
}

// Per-regime return statistics; a regime with zero occupancy is flagged, not
// an error.
inline std::vector<RegimeStats> regime_statistics(const std::vector<int>& states,
                                                  const std::vector<double>& excess_returns,
                                                  const std::vector<double>& total_returns,
                                                  std::size_t k_count) {
    if (states.size() != excess_returns.size() ||
        (!total_returns.empty() && total_returns.size() != states.size()))
        throw std::invalid_argument("regime_statistics: length mismatch");
    std::vector<RegimeStats> stats(k_count);
    for (std::size_t t = 0; t < states.size(); ++t) {
        RegimeStats& s = stats[states[t]];
        ++s.count;
        s.mean_excess += excess_returns[t];
        s.cum_excess += excess_returns[t];
        if (!total_returns.empty()) s.mean_total += total_returns[t];
    }
    for (std::size_t k = 0; k < k_count; ++k) {
        RegimeStats& s = stats[k];
        if (s.count == 0) continue;
        s.occupied = true;
        s.mean_excess /= s.count;
        s.mean_total /= s.count;
        double var = 0.0;
        for (std::size_t t = 0; t < states.size(); ++t)
            if (states[t] == static_cast<int>(k)) {
                const double d = excess_returns[t] - s.mean_excess;
                var += d * d;
            }
        s.std_excess = std::sqrt(var / s.count);
    }
    return stats;
}

struct JumpModelOptions {
    std::size_t restarts = 10;
    std::uint64_t seed = 0;
    std::size_t max_iterations = 100;
    // Optional explicit initial centroids, one matrix per restart (overrides
    // the seeded distance-weighted sampling; used by reference-oracle tests).
    std::vector<Matrix> initial_centroids;
    // Optional per-restart objective trace, one entry per S-step.
    std::vector<std::vector<double>>* objective_traces = nullptr;
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// k-means++ style distance-weighted seeding.
inline Matrix seed_centroids(const Matrix& x, std::size_t k_count, std::mt19937_64& rng) {
    const std::size_t t_count = x.rows, d_count = x.cols;
    Matrix centroids(k_count, d_count);
    std::vector<double> min_dist(t_count, 0.0);
    std::size_t first = static_cast<std::size_t>(uniform01(rng) * t_count);
    if (first >= t_count) first = t_count - 1;
    std::copy(x.row(first), x.row(first) + d_count, centroids.row(0));
    for (std::size_t k = 1; k < k_count; ++k) {
        double total = 0.0;
        for (std::size_t t = 0; t < t_count; ++t) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                double s = 0.0;
                for (std::size_t d = 0; d < d_count; ++d) {
                    const double diff = x(t, d) - centroids(c, d);
                    s += diff * diff;
                }
                best = std::min(best, s);
            }
            min_dist[t] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double target = uniform01(rng) * total, acc = 0.0;
            for (std::size_t t = 0; t < t_count; ++t) {
                acc += min_dist[t];
                if (acc >= target) { pick = t; break; }
            }
        } else {
            pick = static_cast<std::size_t>(uniform01(rng) * t_count);
            if (pick >= t_count) pick = t_count - 1;
        }
        std::copy(x.row(pick), x.row(pick) + d_count, centroids.row(k));
    }
    return centroids;
}

}  // namespace detail

// Coordinate descent on the jump-model objective: alternate the centroid step
// (per-state means, empty clusters re-seeded to the worst-fit row) and the DP
// state step until the state sequence is a fixed point.
inline JumpModelFit fit_jump_model(const Matrix& x, std::size_t k_count, double lambda,
                                   const JumpModelOptions& options,
                                   const std::vector<double>& excess_returns = {},
                                   const std::vector<double>& total_returns = {}) {
    const std::size_t t_count = x.rows, d_count = x.cols;
    if (t_count <= k_count) throw std::invalid_argument("fit_jump_model: need T > K");
    for (double v : x.data)
        if (!std::isfinite(v)) throw std::invalid_argument("fit_jump_model: non-finite feature");
    if (!excess_returns.empty() && excess_returns.size() != t_count)
        throw std::invalid_argument("fit_jump_model: return series not aligned to features");
    const std::size_t restarts =
        options.initial_centroids.empty() ? options.restarts : options.initial_centroids.size();
    if (restarts == 0) throw std::invalid_argument("fit_jump_model: restarts must be >= 1");

    Matrix best_centroids;
    std::vector<int> best_states;
    double best_objective = std::numeric_limits<double>::infinity();

    for (std::size_t r = 0; r < restarts; ++r) {
        Matrix centroids;
        if (!options.initial_centroids.empty()) {
            centroids = options.initial_centroids[r];
        } else {
            std::mt19937_64 rng(options.seed * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL * (r + 1));
            centroids = detail::seed_centroids(x, k_count, rng);
        }
        auto [states, objective] = assign_states(x, centroids, lambda);
        std::vector<double> trace = {objective};
        for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
            // Theta-step: per-state means.
            std::vector<std::size_t> counts(k_count, 0);
            Matrix sums(k_count, d_count);
            for (std::size_t t = 0; t < t_count; ++t) {
                ++counts[states[t]];
                const double* xt = x.row(t);
                double* srow = sums.row(states[t]);
                for (std::size_t d = 0; d < d_count; ++d) srow[d] += xt[d];
            }
            for (std::size_t k = 0; k < k_count; ++k)
                if (counts[k] > 0)
                    for (std::size_t d = 0; d < d_count; ++d) centroids(k, d) = sums(k, d) / counts[k];
            // Empty-cluster repair: re-seed to the row with the largest loss.
            for (std::size_t k = 0; k < k_count; ++k) {
                if (counts[k] > 0) continue;
                std::size_t worst = 0;
                double worst_loss = -1.0;
                for (std::size_t t = 0; t < t_count; ++t) {
                    const double* ct = centroids.row(states[t]);
                    const double* xt = x.row(t);
                    double s = 0.0;
                    for (std::size_t d = 0; d < d_count; ++d) {
                        const double diff = xt[d] - ct[d];
                        s += diff * diff;
                    }
                    if (s > worst_loss) { worst_loss = s; worst = t; }
                }
                std::copy(x.row(worst), x.row(worst) + d_count, centroids.row(k));
            }

            auto [new_states, new_objective] = assign_states(x, centroids, lambda);
            objective = new_objective;
            trace.push_back(new_objective);
            if (new_states == states) { states = std::move(new_states); break; }
            states = std::move(new_states);
        }
        if (options.objective_traces) options.objective_traces->push_back(std::move(trace));
        if (objective < best_objective) {
            best_objective = objective;
            best_centroids = std::move(centroids);
            best_states = std::move(states);
        }
    }

    JumpModelFit fit;
    fit.centroids = std::move(best_centroids);
    fit.states = std::move(best_states);
    fit.lambda = lambda;
    fit.objective = best_objective;
    fit.transition = transition_matrix(fit.states, k_count);

    fit.labels.resize(k_count);
    for (std::size_t k = 0; k < k_count; ++k) fit.labels[k] = static_cast<int>(k);
    if (!excess_returns.empty()) {
        fit.stats = regime_statistics(fit.states, excess_returns, total_returns, k_count);
        if (k_count == 2) {
            // Higher cumulative excess return is the bullish regime (0).
            const double cum0 = fit.stats[0].cum_excess, cum1 = fit.stats[1].cum_excess;
            if (cum1 > cum0) fit.labels = {1, 0};
        }
    } else {
        fit.stats.assign(k_count, RegimeStats{});
    }
    return fit;
}

inline nlohmann::json to_json(const JumpModelFit& fit) {
    nlohmann::json j;
    j["k"] = fit.centroids.rows;
    j["d"] = fit.centroids.cols;
    j["centroids"] = fit.centroids.data;
    j["states"] = fit.states;
    j["lambda"] = fit.lambda;
    j["objective"] = fit.objective;
    j["labels"] = fit.labels;
    j["transition"] = fit.transition.data;
    return j;
}

inline JumpModelFit jump_model_fit_from_json(const nlohmann::json& j) {
    JumpModelFit fit;
    const std::size_t k = j.at("k"), d = j.at("d");
    fit.centroids = Matrix(k, d);
    fit.centroids.data = j.at("centroids").get<std::vector<double>>();
    fit.states = j.at("states").get<std::vector<int>>();
    fit.lambda = j.at("lambda");
    fit.objective = j.at("objective");
    fit.labels = j.at("labels").get<std::vector<int>>();
    fit.transition = Matrix(k, k);
    fit.transition.data = j.at("transition").get<std::vector<double>>();
    fit.stats.assign(k, RegimeStats{});
    return fit;
}

}  // namespace regime
