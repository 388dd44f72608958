#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "regime/matrix.hpp"

namespace regime {

// maximize  w' mu - gamma_risk w' Sigma w - gamma_trade * cost_a * ||w - w_pre||_1
// subject to 0 <= w <= w_ub, 1'w <= leverage_cap.
struct MvoProblem {
    std::vector<double> mu;      // expected daily excess returns
    Matrix sigma;                // daily covariance, positive definite
    double gamma_risk = 10.0;
    double gamma_trade = 1.0;
    double cost_a = 0.0005;      // one-way transaction cost, 5 bp
    std::vector<double> w_pre;   // pre-trade weights
    double w_ub = 0.4;
    double leverage_cap = 1.0;
};

struct MvoSolution {
    std::vector<double> weights;
    double objective = 0.0;
    double kkt_residual = 0.0;
    std::size_t iterations = 0;
    bool converged = true;
};

inline double mvo_objective(const MvoProblem& p, const std::vector<double>& w) {
    const std::vector<double> sw = matvec(p.sigma, w);
    double obj = dot(p.mu, w) - p.gamma_risk * dot(w, sw);
    const double c = p.gamma_trade * p.cost_a;
    for (std::size_t j = 0; j < w.size(); ++j) obj -= c * std::abs(w[j] - p.w_pre[j]);
    return obj;
}

namespace detail {

inline void validate_problem(const MvoProblem& p) {
    const std::size_t n = p.mu.size();
    if (p.sigma.rows != n || p.sigma.cols != n || p.w_pre.size() != n)
        throw std::invalid_argument("mvo: dimension mismatch");
    if (p.gamma_risk <= 0.0 || p.gamma_trade < 0.0)
        throw std::invalid_argument("mvo: invalid aversion parameters");
    if (p.w_ub <= 0.0 || p.w_ub > p.leverage_cap)
        throw std::invalid_argument("mvo: invalid weight upper bound");
    double sum_pre = 0.0;
    for (double v : p.w_pre) {
        if (v < -1e-9) throw std::invalid_argument("mvo: infeasible w_pre (negative weight)");
        sum_pre += v;
    }
    if (sum_pre > p.leverage_cap + 1e-9)
        throw std::invalid_argument("mvo: infeasible w_pre (leverage exceeded)");
    cholesky(p.sigma);  // throws on non-PD sigma
}

// Cyclic coordinate maximization of the leverage-relaxed problem at a fixed
// multiplier nu. Each 1-D subproblem is a concave quadratic with an L1 kink
// at w_pre[j]; its maximizer is closed-form, then clamped to the box.
inline std::size_t coordinate_descent(const MvoProblem& p, double nu, std::vector<double>& w,
                                      std::size_t max_sweeps = 20000) {
    const std::size_t n = p.mu.size();
    const double c = p.gamma_trade * p.cost_a;
    std::vector<double> sw = matvec(p.sigma, w);
    std::size_t sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        double max_step = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double a = 2.0 * p.gamma_risk * p.sigma(j, j);
            const double b = p.mu[j] - nu - 2.0 * p.gamma_risk * (sw[j] - p.sigma(j, j) * w[j]);
            const double pre = p.w_pre[j];
            double target;
            if (c == 0.0) {
                target = b / a;
            } else {
                const double up = (b - c) / a;    // branch w > pre
                const double down = (b + c) / a;  // branch w < pre
                if (up > pre) target = up;
                else if (down < pre) target = down;
                else target = pre;
            }
            target = std::clamp(target, 0.0, p.w_ub);
            const double step = target - w[j];
            if (step != 0.0) {
                for (std::size_t i = 0; i < n; ++i) sw[i] += p.sigma(i, j) * step;
                w[j] = target;
                max_step = std::max(max_step, std::abs(step));
            }
        }
        if (max_step < 1e-14) { ++sweep; break; }
    }
    return sweep;
}

inline double nu_upper_bound(const MvoProblem& p) {
    const std::size_t n = p.mu.size();
    double max_mu = 0.0, max_sigma = 0.0;
    for (double v : p.mu) max_mu = std::max(max_mu, std::abs(v));
    for (double v : p.sigma.data) max_sigma = std::max(max_sigma, std::abs(v));
    return max_mu + p.gamma_trade * p.cost_a + 2.0 * p.gamma_risk * max_sigma * n * p.w_ub + 1.0;
}

}  // namespace detail

// Maximum KKT violation at the given (weights, nu) pair: primal feasibility,
// stationarity with the L1 subgradient interval at w = w_pre, bound
// multiplier signs, and leverage complementarity.
inline double kkt_residual_at(const MvoProblem& p, const std::vector<double>& w, double nu) {
    const std::size_t n = p.mu.size();
    const double c = p.gamma_trade * p.cost_a;
    const std::vector<double> sw = matvec(p.sigma, w);
    double res = std::max(0.0, -nu);
    double lev = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        lev += w[j];
        res = std::max(res, -w[j]);
        res = std::max(res, w[j] - p.w_ub);
    }
    res = std::max(res, lev - p.leverage_cap);
    res = std::max(res, std::abs(nu * (p.leverage_cap - lev)));
    const double kink_tol = 1e-9;
    for (std::size_t j = 0; j < n; ++j) {
        const double grad = p.mu[j] - 2.0 * p.gamma_risk * sw[j] - nu;
        double lo, hi;  // attainable range of grad + u over the L1 subgradient set
        if (std::abs(w[j] - p.w_pre[j]) <= kink_tol) {
            lo = grad - c;
            hi = grad + c;
        } else {
            const double u = w[j] > p.w_pre[j] ? -c : c;
            lo = hi = grad + u;
        }
        double viol;
        if (w[j] <= kink_tol) {
            viol = std::max(0.0, lo);  // need some subgradient value <= 0
        } else if (w[j] >= p.w_ub - kink_tol) {
            viol = std::max(0.0, -hi);  // need some subgradient value >= 0
        } else {
            viol = std::max(0.0, std::max(lo, -hi));  // need 0 inside [lo, hi]
        }
        res = std::max(res, viol);
    }
    return res;
}

// Standalone verifier: recovers the leverage multiplier that best explains the
// weights (the residual is convex in nu) and reports the KKT violation.
inline double verify_kkt(const MvoProblem& p, const std::vector<double>& w) {
    double lev = 0.0;
    for (double v : w) lev += v;
    if (lev < p.leverage_cap - 1e-7) return kkt_residual_at(p, w, 0.0);
    double lo = 0.0, hi = detail::nu_upper_bound(p);
    for (int it = 0; it < 200; ++it) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (kkt_residual_at(p, w, m1) <= kkt_residual_at(p, w, m2)) hi = m2;
        else lo = m1;
    }
    return kkt_residual_at(p, w, 0.5 * (lo + hi));
}

inline MvoSolution solve_mvo(const MvoProblem& p) {
    detail::validate_problem(p);
    const std::size_t n = p.mu.size();

    MvoSolution sol;
    sol.weights.assign(n, 0.0);
    // Warm start from the projected pre-trade weights.
    for (std::size_t j = 0; j < n; ++j) sol.weights[j] = std::clamp(p.w_pre[j], 0.0, p.w_ub);

    double nu = 0.0;
    sol.iterations = detail::coordinate_descent(p, 0.0, sol.weights);
    double lev = 0.0;
    for (double v : sol.weights) lev += v;
    if (lev > p.leverage_cap + 1e-12) {
        // 1'w(nu) is non-increasing in nu; bisect to the leverage boundary.
        double lo = 0.0, hi = detail::nu_upper_bound(p);
        std::vector<double> w = sol.weights;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            sol.iterations += detail::coordinate_descent(p, mid, w);
            double s = 0.0;
            for (double v : w) s += v;
            if (s > p.leverage_cap) lo = mid;
            else hi = mid;
        }
        nu = hi;
        sol.iterations += detail::coordinate_descent(p, nu, w);
        sol.weights = std::move(w);
    }

    sol.objective = mvo_objective(p, sol.weights);
    sol.kkt_residual = kkt_residual_at(p, sol.weights, nu);
    sol.converged = sol.kkt_residual <= 1e-6;
    return sol;
}

// Test oracle: the unconstrained minimum-variance direction Sigma^{-1} 1,
// scaled to leverage L.
inline std::vector<double> minvar_closed_form_check(const Matrix& sigma, double leverage) {
    std::vector<double> ones(sigma.rows, 1.0);
    std::vector<double> w = solve_spd(sigma, ones);
    double s = 0.0;
    for (double v : w) s += v;
    for (double& v : w) v *= leverage / s;
    return w;
}

inline nlohmann::json to_json(const MvoProblem& p) {
    return {{"mu", p.mu},          {"sigma", p.sigma.data},   {"n", p.mu.size()},
            {"gamma_risk", p.gamma_risk}, {"gamma_trade", p.gamma_trade}, {"cost_a", p.cost_a},
            {"w_pre", p.w_pre},    {"w_ub", p.w_ub},          {"leverage_cap", p.leverage_cap}};
}

inline MvoProblem mvo_problem_from_json(const nlohmann::json& j) {
    MvoProblem p;
    p.mu = j.at("mu").get<std::vector<double>>();
    const std::size_t n = j.at("n");
    p.sigma = Matrix(n, n);
    p.sigma.data = j.at("sigma").get<std::vector<double>>();
    p.gamma_risk = j.at("gamma_risk");
    p.gamma_trade = j.at("gamma_trade");
    p.cost_a = j.at("cost_a");
    p.w_pre = j.at("w_pre").get<std::vector<double>>();
    p.w_ub = j.at("w_ub");
    p.leverage_cap = j.at("leverage_cap");
    return p;
}

}  // namespace regime
