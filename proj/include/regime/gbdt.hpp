#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "regime/matrix.hpp"

namespace regime {

struct GbdtParams {
    std::size_t rounds = 100;
    std::size_t max_depth = 6;
    double learning_rate = 0.3;
    double min_child_weight = 1.0;
    double l2_leaf_regularization = 1.0;
};

struct TreeNode {
    bool is_leaf = true;
    int feature = -1;
    double threshold = 0.0;  // midpoint of adjacent observed training values
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf weight in log-odds space
};

using Tree = std::vector<TreeNode>;

struct BoostedTreesModel {
    std::vector<Tree> trees;
    double base_score = 0.0;  // prior log-odds
    std::size_t n_features = 0;
    GbdtParams params;
    std::vector<double> train_loss;  // logistic loss after each round

    double margin(const double* x) const {
        double m = base_score;
        for (const Tree& tree : trees) {
            int node = 0;
            while (!tree[node].is_leaf)
                node = x[tree[node].feature] < tree[node].threshold ? tree[node].left : tree[node].right;
            m += params.learning_rate * tree[node].value;
        }
        return m;
    }
};

inline double sigmoid(double z) {
    z = std::clamp(z, -30.0, 30.0);  // keeps probabilities strictly inside (0, 1)
    return 1.0 / (1.0 + std::exp(-z));
}

namespace detail {

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

inline double leaf_objective(double g, double h, double reg) { return g * g / (h + reg); }

}  // namespace detail

// Second-order gradient boosting on logistic loss with exact greedy splits.
inline BoostedTreesModel gbdt_train(const Matrix& x, const std::vector<int>& y, const GbdtParams& params) {
    const std::size_t n = x.rows, d = x.cols;
    if (n == 0) throw std::invalid_argument("gbdt_train: zero rows");
    if (y.size() != n) throw std::invalid_argument("gbdt_train: target length mismatch");
    for (double v : x.data)
        if (!std::isfinite(v)) throw std::invalid_argument("gbdt_train: non-finite feature");
    std::size_t positives = 0;
    for (int v : y) {
        if (v != 0 && v != 1) throw std::invalid_argument("gbdt_train: targets must be 0/1");
        positives += v;
    }
    if (positives == 0 || positives == n)
        throw std::invalid_argument("gbdt_train: both classes must be present");

    BoostedTreesModel model;
    model.params = params;
    model.n_features = d;
    const double base_rate = static_cast<double>(positives) / n;
    model.base_score = std::log(base_rate / (1.0 - base_rate));

    // Global presort of row indices per feature, reused by every tree.
    std::vector<std::vector<std::uint32_t>> sorted(d);
    for (std::size_t f = 0; f < d; ++f) {
        sorted[f].resize(n);
        std::iota(sorted[f].begin(), sorted[f].end(), 0u);
        std::stable_sort(sorted[f].begin(), sorted[f].end(),
                         [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
    }

    std::vector<double> margins(n, model.base_score);
    std::vector<double> grad(n), hess(n);
    const double reg = params.l2_leaf_regularization;

    auto logistic_loss = [&]() {
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(margins[i]);
            loss += y[i] ? -std::log(p) : -std::log(1.0 - p);
        }
        return loss;
    };
    double prev_loss = logistic_loss();

    for (std::size_t round = 0; round < params.rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(margins[i]);
            grad[i] = p - y[i];
            hess[i] = p * (1.0 - p);
        }

        Tree tree(1);
        std::vector<int> leaf_of(n, 0);  // current node id per row; -1 once finalized
        std::vector<int> level_nodes = {0};

        for (std::size_t depth = 0; depth < params.max_depth && !level_nodes.empty(); ++depth) {
            // Node totals for this level.
            std::vector<double> total_g(tree.size(), 0.0), total_h(tree.size(), 0.0);
            for (std::size_t i = 0; i < n; ++i)
                if (leaf_of[i] >= 0) {
                    total_g[leaf_of[i]] += grad[i];
                    total_h[leaf_of[i]] += hess[i];
                }

            std::vector<detail::SplitCandidate> best(tree.size());
            std::vector<double> run_g(tree.size()), run_h(tree.size()), prev_val(tree.size());
            std::vector<char> seen(tree.size());
            for (std::size_t f = 0; f < d; ++f) {
                for (int node : level_nodes) {
                    run_g[node] = run_h[node] = 0.0;
                    seen[node] = 0;
                }
                for (std::uint32_t i : sorted[f]) {
                    const int node = leaf_of[i];
                    if (node < 0) continue;
                    const double v = x(i, f);
                    if (seen[node] && v > prev_val[node]) {
                        const double gl = run_g[node], hl = run_h[node];
                        const double gr = total_g[node] - gl, hr = total_h[node] - hl;
                        if (hl >= params.min_child_weight && hr >= params.min_child_weight) {
                            const double gain = 0.5 * (detail::leaf_objective(gl, hl, reg) +
                                                       detail::leaf_objective(gr, hr, reg) -
                                                       detail::leaf_objective(total_g[node], total_h[node], reg));
                            if (gain > best[node].gain && gain > 1e-12) {
                                best[node].gain = gain;
                                best[node].feature = static_cast<int>(f);
                                best[node].threshold = 0.5 * (prev_val[node] + v);
                            }
                        }
                    }
                    run_g[node] += grad[i];
                    run_h[node] += hess[i];
                    prev_val[node] = v;
                    seen[node] = 1;
                }
            }

            // Materialize the accepted splits and reassign rows.
            std::vector<int> next_level;
            for (int node : level_nodes) {
                if (best[node].feature < 0) {
                    tree[node].is_leaf = true;
                    tree[node].value = -total_g[node] / (total_h[node] + reg);
                    continue;
                }
                tree[node].is_leaf = false;
                tree[node].feature = best[node].feature;
                tree[node].threshold = best[node].threshold;
                tree[node].left = static_cast<int>(tree.size());
                tree[node].right = static_cast<int>(tree.size() + 1);
                tree.emplace_back();
                tree.emplace_back();
                next_level.push_back(tree[node].left);
                next_level.push_back(tree[node].right);
            }
            for (std::size_t i = 0; i < n; ++i) {
                const int node = leaf_of[i];
                if (node < 0) continue;
                if (tree[node].is_leaf) {
                    leaf_of[i] = -1;
                } else {
                    leaf_of[i] = x(i, tree[node].feature) < tree[node].threshold ? tree[node].left
                                                                                 : tree[node].right;
                }
            }
            level_nodes = std::move(next_level);
        }
        // Depth limit reached: remaining nodes become leaves.
        if (!level_nodes.empty()) {
            std::vector<double> total_g(tree.size(), 0.0), total_h(tree.size(), 0.0);
            for (std::size_t i = 0; i < n; ++i)
                if (leaf_of[i] >= 0) {
                    total_g[leaf_of[i]] += grad[i];
                    total_h[leaf_of[i]] += hess[i];
                }
            for (int node : level_nodes) {
                tree[node].is_leaf = true;
                tree[node].value = -total_g[node] / (total_h[node] + reg);
            }
        }

        for (std::size_t i = 0; i < n; ++i) {
            int node = 0;
            while (!tree[node].is_leaf)
                node = x(i, tree[node].feature) < tree[node].threshold ? tree[node].left : tree[node].right;
            margins[i] += params.learning_rate * tree[node].value;
        }
        model.trees.push_back(std::move(tree));

        const double loss = logistic_loss();
        if (loss > prev_loss + 1e-9 * (1.0 + prev_loss))
            throw std::logic_error("gbdt_train: logistic loss increased at round " + std::to_string(round));
        model.train_loss.push_back(loss);
        prev_loss = loss;
    }
    return model;
}

inline std::vector<double> gbdt_predict_proba(const BoostedTreesModel& model, const Matrix& x) {
    if (x.cols != model.n_features) throw std::invalid_argument("gbdt_predict_proba: dimension mismatch");
    std::vector<double> out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) out[i] = sigmoid(model.margin(x.row(i)));
    return out;
}

inline double gbdt_predict_proba_one(const BoostedTreesModel& model, const double* x) {
    return sigmoid(model.margin(x));
}

// 1 (bullish) iff probability >= threshold.
inline std::vector<int> gbdt_classify(const std::vector<double>& probabilities, double threshold) {
    std::vector<int> out(probabilities.size());
    for (std::size_t i = 0; i < probabilities.size(); ++i) out[i] = probabilities[i] >= threshold ? 1 : 0;
    return out;
}

inline nlohmann::json to_json(const BoostedTreesModel& model) {
    nlohmann::json jt = nlohmann::json::array();
    for (const Tree& tree : model.trees) {
        nlohmann::json jn = nlohmann::json::array();
        for (const TreeNode& node : tree)
            jn.push_back({{"leaf", node.is_leaf},
                          {"feature", node.feature},
                          {"threshold", node.threshold},
                          {"left", node.left},
                          {"right", node.right},
                          {"value", node.value}});
        jt.push_back(std::move(jn));
    }
    return {{"base_score", model.base_score},
            {"n_features", model.n_features},
            {"rounds", model.params.rounds},
            {"max_depth", model.params.max_depth},
            {"learning_rate", model.params.learning_rate},
            {"min_child_weight", model.params.min_child_weight},
            {"l2_leaf_regularization", model.params.l2_leaf_regularization},
            {"trees", std::move(jt)}};
}

inline BoostedTreesModel gbdt_from_json(const nlohmann::json& j) {
    BoostedTreesModel model;
    model.base_score = j.at("base_score");
    model.n_features = j.at("n_features");
    model.params.rounds = j.at("rounds");
    model.params.max_depth = j.at("max_depth");
    model.params.learning_rate = j.at("learning_rate");
    model.params.min_child_weight = j.at("min_child_weight");
    model.params.l2_leaf_regularization = j.at("l2_leaf_regularization");
    for (const auto& jn : j.at("trees")) {
        Tree tree;
        for (const auto& n : jn) {
            TreeNode node;
            node.is_leaf = n.at("leaf");
            node.feature = n.at("feature");
            node.threshold = n.at("threshold");
            node.left = n.at("left");
            node.right = n.at("right");
            node.value = n.at("value");
            tree.push_back(node);
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

}  // namespace regime
