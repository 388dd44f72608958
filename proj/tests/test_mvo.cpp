#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "regime/mvo.hpp"

using namespace regime;

namespace {

Matrix diag2(double a, double b) {
    Matrix m(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix random_pd(std::size_t n, std::mt19937& rng, double scale = 1.0) {
    std::normal_distribution<double> g;
    Matrix a(n, n);
    for (double& v : a.data) v = g(rng);
    Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) acc += a(i, k) * a(j, k);
            s(i, j) = scale * acc;
        }
    for (std::size_t i = 0; i < n; ++i) s(i, i) += 0.05 * scale;
    return s;
}

// Hierarchical grid search: refine around the incumbent; valid because the
// objective is concave and the feasible set convex.
std::vector<double> grid_search(const MvoProblem& p, double final_step) {
    const std::size_t n = p.mu.size();
    std::vector<double> lo(n, 0.0), hi(n, p.w_ub);
    std::vector<double> best(n, 0.0);
    double step = 0.1;
    while (true) {
        std::vector<std::vector<double>> axis(n);
        for (std::size_t j = 0; j < n; ++j)
            for (double v = lo[j]; v <= hi[j] + 1e-12; v += step) axis[j].push_back(std::min(v, p.w_ub));
        std::vector<std::size_t> idx(n, 0);
        double best_obj = -std::numeric_limits<double>::infinity();
        std::vector<double> w(n);
        while (true) {
            double lev = 0.0;
            for (std::size_t j = 0; j < n; ++j) lev += (w[j] = axis[j][idx[j]]);
            if (lev <= p.leverage_cap + 1e-12) {
                const double obj = mvo_objective(p, w);
                if (obj > best_obj) { best_obj = obj; best = w; }
            }
            std::size_t pos = 0;
            while (pos < n && ++idx[pos] == axis[pos].size()) idx[pos++] = 0;
            if (pos == n) break;
        }
        if (step <= final_step * (1.0 + 1e-12)) break;
        for (std::size_t j = 0; j < n; ++j) {
            lo[j] = std::max(0.0, best[j] - 1.5 * step);
            hi[j] = std::min(p.w_ub, best[j] + 1.5 * step);
        }
        step /= 10.0;
    }
    return best;
}

}  // namespace

TEST_CASE("interior stationary point matches the analytic solution") {
    MvoProblem p;
    p.mu = {0.01, 0.01};
    p.sigma = diag2(0.04, 0.01);
    p.gamma_risk = 10.0;
    p.gamma_trade = 0.0;
    p.w_pre = {0.0, 0.0};
    p.w_ub = 1.0;
    p.leverage_cap = 1.0;
    MvoSolution s = solve_mvo(p);
    REQUIRE(s.converged);
    CHECK(s.weights[0] == Catch::Approx(0.0125).margin(1e-9));
    CHECK(s.weights[1] == Catch::Approx(0.05).margin(1e-9));
    CHECK(verify_kkt(p, s.weights) <= 1e-8);

    // perturbing one weight breaks stationarity
    std::vector<double> w = s.weights;
    w[0] += 1e-3;
    CHECK(verify_kkt(p, w) > 1e-6);
}

TEST_CASE("no-trade limit returns the pre-trade weights") {
    MvoProblem p;
    p.mu = {0.02, -0.01, 0.005};
    p.sigma = identity(3);
    p.gamma_risk = 5.0;
    p.gamma_trade = 1e6;
    p.w_pre = {0.2, 0.1, 0.05};
    p.w_ub = 0.4;
    MvoSolution s = solve_mvo(p);
    for (std::size_t j = 0; j < 3; ++j) CHECK(s.weights[j] == Catch::Approx(p.w_pre[j]).margin(1e-10));
}

TEST_CASE("zero expected return from cash stays at the origin") {
    MvoProblem p;
    p.mu = {0.0, 0.0};
    p.sigma = diag2(0.02, 0.03);
    p.gamma_trade = 0.0;
    p.w_pre = {0.0, 0.0};
    MvoSolution s = solve_mvo(p);
    CHECK(s.weights[0] == 0.0);
    CHECK(s.weights[1] == 0.0);
}

TEST_CASE("solution matches a feasible grid-search oracle on random problems") {
    std::mt19937 rng(71);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int rep = 0; rep < 25; ++rep) {
        const std::size_t n = 1 + rep % 3;
        MvoProblem p;
        p.sigma = random_pd(n, rng, 0.02);
        p.mu.resize(n);
        for (double& v : p.mu) v = 0.02 * g(rng);
        p.gamma_risk = 2.0 + 10.0 * u01(rng);
        p.gamma_trade = u01(rng) < 0.5 ? 0.0 : 1.0;
        p.cost_a = 0.0005;
        p.w_pre.assign(n, 0.0);
        for (double& v : p.w_pre) v = 0.3 * u01(rng);
        p.w_ub = 0.5;
        p.leverage_cap = 1.0;
        MvoSolution s = solve_mvo(p);
        REQUIRE(s.converged);
        CHECK(s.kkt_residual <= 1e-6);
        std::vector<double> oracle = grid_search(p, 1e-3);
        for (std::size_t j = 0; j < n; ++j)
            CHECK(s.weights[j] == Catch::Approx(oracle[j]).margin(1.5e-3));
        CHECK(mvo_objective(p, s.weights) >= mvo_objective(p, oracle) - 1e-8);
    }
}

TEST_CASE("objective dominates the trivial feasible candidates") {
    std::mt19937 rng(73);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 2 + rep % 4;
        MvoProblem p;
        p.sigma = random_pd(n, rng, 0.01);
        p.mu.resize(n);
        for (double& v : p.mu) v = 0.01 * g(rng);
        p.gamma_risk = 1.0 + 20.0 * u01(rng);
        p.w_pre.assign(n, 0.15);
        p.w_ub = 0.4;
        MvoSolution s = solve_mvo(p);
        CHECK(s.objective >= mvo_objective(p, p.w_pre) - 1e-10);
        CHECK(s.objective >= mvo_objective(p, std::vector<double>(n, 0.0)) - 1e-10);
    }
}

TEST_CASE("minimum-variance closed form") {
    SECTION("identity covariance splits evenly") {
        std::vector<double> w = minvar_closed_form_check(identity(4), 1.0);
        for (double v : w) CHECK(v == Catch::Approx(0.25).margin(1e-12));
    }
    SECTION("diagonal example") {
        std::vector<double> w = minvar_closed_form_check(diag2(0.04, 0.01), 1.0);
        CHECK(w[0] == Catch::Approx(0.2).margin(1e-12));
        CHECK(w[1] == Catch::Approx(0.8).margin(1e-12));
    }
}

TEST_CASE("uniform mu below the risk-aversion threshold recovers MinVar") {
    // With mu = 1, no bounds or costs, and gamma = 0.5 * (1' Sigma^{-1} 1)/(2L),
    // the optimizer's solution is the scaled Sigma^{-1} 1 direction. Only
    // matrices with a nonnegative MinVar portfolio satisfy the long-only box.
    std::mt19937 rng(79);
    int done = 0;
    while (done < 20) {
        Matrix sigma = random_pd(3, rng, 0.02);
        std::vector<double> mv = minvar_closed_form_check(sigma, 1.0);
        bool ok = true;
        for (double v : mv) ok = ok && v >= 0.0;
        if (!ok) continue;
        std::vector<double> ones(3, 1.0);
        std::vector<double> si1 = solve_spd(sigma, ones);
        double denom = 0.0;
        for (double v : si1) denom += v;
        const double threshold = denom / 2.0;  // leverage_cap 1
        MvoProblem p;
        p.mu.assign(3, 1.0);
        p.sigma = sigma;
        p.gamma_risk = 0.5 * threshold;
        p.gamma_trade = 0.0;
        p.w_pre.assign(3, 0.0);
        p.w_ub = 1.0;
        p.leverage_cap = 1.0;
        MvoSolution s = solve_mvo(p);
        REQUIRE(s.converged);
        for (std::size_t j = 0; j < 3; ++j) CHECK(s.weights[j] == Catch::Approx(mv[j]).margin(1e-6));
        ++done;
    }
}

TEST_CASE("risk grows weakly smaller as gamma_risk rises") {
    std::mt19937 rng(83);
    std::normal_distribution<double> g;
    for (int rep = 0; rep < 10; ++rep) {
        MvoProblem p;
        p.sigma = random_pd(4, rng, 0.02);
        p.mu.assign(4, 0.0);
        for (double& v : p.mu) v = std::abs(0.02 * g(rng));
        p.gamma_trade = 0.0;
        p.w_pre.assign(4, 0.0);
        p.w_ub = 0.4;
        double prev_risk = std::numeric_limits<double>::infinity();
        for (double gamma : {1.0, 2.0, 5.0, 10.0, 50.0}) {
            p.gamma_risk = gamma;
            MvoSolution s = solve_mvo(p);
            const double risk = dot(s.weights, matvec(p.sigma, s.weights));
            CHECK(risk <= prev_risk + 1e-10);
            prev_risk = risk;
        }
    }
}

TEST_CASE("solution permutes with the assets") {
    std::mt19937 rng(89);
    MvoProblem p;
    p.sigma = random_pd(3, rng, 0.02);
    p.mu = {0.012, -0.004, 0.02};
    p.gamma_risk = 8.0;
    p.w_pre = {0.1, 0.2, 0.0};
    p.w_ub = 0.4;
    MvoSolution s = solve_mvo(p);

    const std::size_t perm[3] = {2, 0, 1};
    MvoProblem q;
    q.sigma = Matrix(3, 3);
    q.mu.resize(3);
    q.w_pre.resize(3);
    q.gamma_risk = p.gamma_risk;
    q.w_ub = p.w_ub;
    for (std::size_t i = 0; i < 3; ++i) {
        q.mu[i] = p.mu[perm[i]];
        q.w_pre[i] = p.w_pre[perm[i]];
        for (std::size_t j = 0; j < 3; ++j) q.sigma(i, j) = p.sigma(perm[i], perm[j]);
    }
    MvoSolution t = solve_mvo(q);
    for (std::size_t i = 0; i < 3; ++i) CHECK(t.weights[i] == Catch::Approx(s.weights[perm[i]]).margin(1e-8));
}

TEST_CASE("leverage cap binds and complementarity holds") {
    MvoProblem p;
    p.mu = {0.05, 0.05, 0.05};
    p.sigma = identity(3);
    for (double& v : p.sigma.data) v *= 1e-4;
    for (std::size_t i = 0; i < 3; ++i) p.sigma(i, i) = 1e-4;
    p.gamma_risk = 1.0;
    p.gamma_trade = 0.0;
    p.w_pre = {0.0, 0.0, 0.0};
    p.w_ub = 0.6;
    p.leverage_cap = 1.0;
    MvoSolution s = solve_mvo(p);
    REQUIRE(s.converged);
    double lev = 0.0;
    for (double v : s.weights) lev += v;
    CHECK(lev == Catch::Approx(1.0).margin(1e-8));
    for (double v : s.weights) CHECK(v == Catch::Approx(1.0 / 3.0).margin(1e-7));
}

TEST_CASE("problem validation") {
    MvoProblem p;
    p.mu = {0.01, 0.01};
    p.sigma = diag2(0.01, 0.01);
    p.w_pre = {0.0};
    CHECK_THROWS_AS(solve_mvo(p), std::invalid_argument);  // dimension mismatch
    p.w_pre = {0.0, 0.0};
    p.gamma_risk = 0.0;
    CHECK_THROWS_AS(solve_mvo(p), std::invalid_argument);
    p.gamma_risk = 10.0;
    p.w_ub = 0.0;
    CHECK_THROWS_AS(solve_mvo(p), std::invalid_argument);
    p.w_ub = 0.4;
    p.w_pre = {-0.1, 0.0};
    CHECK_THROWS_AS(solve_mvo(p), std::invalid_argument);
    p.w_pre = {0.9, 0.9};
    CHECK_THROWS_AS(solve_mvo(p), std::invalid_argument);  // leverage exceeded
    p.w_pre = {0.0, 0.0};
    p.sigma(0, 0) = -1.0;
    CHECK_THROWS_AS(solve_mvo(p), std::runtime_error);  // non-PD
}

TEST_CASE("problem JSON round-trip") {
    MvoProblem p;
    p.mu = {0.01, -0.02};
    p.sigma = diag2(0.04, 0.02);
    p.sigma(0, 1) = p.sigma(1, 0) = 0.005;
    p.gamma_risk = 7.5;
    p.gamma_trade = 2.0;
    p.cost_a = 0.001;
    p.w_pre = {0.1, 0.3};
    p.w_ub = 0.35;
    p.leverage_cap = 0.9;
    MvoProblem q = mvo_problem_from_json(to_json(p));
    CHECK(q.mu == p.mu);
    CHECK(q.sigma.data == p.sigma.data);
    CHECK(q.gamma_risk == p.gamma_risk);
    CHECK(q.gamma_trade == p.gamma_trade);
    CHECK(q.cost_a == p.cost_a);
    CHECK(q.w_pre == p.w_pre);
    CHECK(q.w_ub == p.w_ub);
    CHECK(q.leverage_cap == p.leverage_cap);
    MvoSolution a = solve_mvo(p), b = solve_mvo(q);
    CHECK(a.weights == b.weights);
}
