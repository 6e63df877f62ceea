#include "fairgrade/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fairgrade {

namespace {

struct ValueTarget {
    double value;
    double target;
};

// Candidate score to maximize. For classification (0/1 targets) this is
// sum over children of (c1^2 + c0^2) / n_child, a monotone transform of
// negative weighted Gini impurity; for regression it is sum(child)^2 /
// n_child, a monotone transform of SSE reduction. Exact for integer counts.
double children_score(double n_left, double s_left, double sq_left, double n_right, double s_right,
                      double sq_right, bool regression) {
    if (regression) {
        return s_left * s_left / n_left + s_right * s_right / n_right;
    }
    const double c1l = s_left, c0l = n_left - s_left;
    const double c1r = s_right, c0r = n_right - s_right;
    (void)sq_left;
    (void)sq_right;
    return (c1l * c1l + c0l * c0l) / n_left + (c1r * c1r + c0r * c0r) / n_right;
}

}  // namespace

SplitCandidate best_split_on_feature(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                     const Eigen::Ref<const Eigen::VectorXd>& target,
                                     const std::vector<int32_t>& rows, int32_t feature,
                                     int min_leaf, bool regression) {
    SplitCandidate best;
    best.feature = feature;
    const size_t n = rows.size();
    if (n < 2 * static_cast<size_t>(min_leaf)) return best;

    std::vector<ValueTarget> items;
    items.reserve(n);
    double total_sum = 0.0;
    for (int32_t r : rows) {
        const double v = x(r, feature);
        const double t = target[r];
        items.push_back({v, t});
        total_sum += t;
    }
    // Sorting on (value, target) makes the scan independent of row order.
    std::sort(items.begin(), items.end(), [](const ValueTarget& a, const ValueTarget& b) {
        if (a.value != b.value) return a.value < b.value;
        return a.target < b.target;
    });

    const double n_total = static_cast<double>(n);
    double left_n = 0.0, left_sum = 0.0;
    for (size_t i = 0; i + 1 < n; ++i) {
        left_n += 1.0;
        left_sum += items[i].target;
        if (items[i].value == items[i + 1].value) continue;  // split only between distinct values
        if (left_n < min_leaf || n_total - left_n < min_leaf) continue;
        const double score = children_score(left_n, left_sum, 0.0, n_total - left_n,
                                            total_sum - left_sum, 0.0, regression);
        // Strict improvement keeps the lowest qualifying threshold on ties.
        if (!best.found || score > best.score) {
            best.found = true;
            best.threshold = items[i].value;
            best.score = score;
        }
    }
    return best;
}

namespace {

struct BuildNode {
    int32_t node_index;
    int depth;
    std::vector<int32_t> rows;
};

}  // namespace

void DecisionTree::fit(const Eigen::Ref<const Eigen::MatrixXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& target, std::vector<int32_t> rows,
                       const TreeParams& params, Rng& rng) {
    nodes_.clear();
    const int32_t n_features = static_cast<int32_t>(x.cols());
    const int per_split =
        params.features_per_split > 0 ? std::min(params.features_per_split, static_cast<int>(n_features))
                                      : static_cast<int>(n_features);

    std::vector<BuildNode> stack;
    nodes_.emplace_back();
    stack.push_back({0, 0, std::move(rows)});

    std::vector<int32_t> feature_pool(static_cast<size_t>(n_features));
    std::iota(feature_pool.begin(), feature_pool.end(), 0);

    while (!stack.empty()) {
        BuildNode work = std::move(stack.back());
        stack.pop_back();
        TreeNode& node = nodes_[static_cast<size_t>(work.node_index)];

        if (work.rows.empty()) continue;
        double sum = 0.0;
        double t_min = target[work.rows.front()];
        double t_max = t_min;
        for (int32_t r : work.rows) {
            const double t = target[r];
            sum += t;
            t_min = std::min(t_min, t);
            t_max = std::max(t_max, t);
        }
        const double n_node = static_cast<double>(work.rows.size());
        node.value = n_node > 0 ? sum / n_node : 0.0;

        const bool depth_ok = params.max_depth < 0 || work.depth < params.max_depth;
        const bool pure = t_min == t_max;
        if (!depth_ok || pure || work.rows.size() < 2 * static_cast<size_t>(params.min_leaf) ||
            work.rows.size() < 2) {
            continue;
        }

        // Candidate features, evaluated in ascending index order so ties
        // resolve to the lowest feature index.
        std::vector<int32_t> candidates;
        if (per_split < n_features) {
            std::iota(feature_pool.begin(), feature_pool.end(), 0);
            for (int i = 0; i < per_split; ++i) {
                const size_t j =
                    static_cast<size_t>(i) +
                    static_cast<size_t>(rng.uniform_index(static_cast<uint64_t>(n_features - i)));
                std::swap(feature_pool[static_cast<size_t>(i)], feature_pool[j]);
            }
            candidates.assign(feature_pool.begin(), feature_pool.begin() + per_split);
            std::sort(candidates.begin(), candidates.end());
        } else {
            candidates = feature_pool;
        }

        SplitCandidate best;
        for (int32_t f : candidates) {
            SplitCandidate cand =
                best_split_on_feature(x, target, work.rows, f, params.min_leaf, params.regression);
            if (cand.found && (!best.found || cand.score > best.score)) best = cand;
        }
        if (!best.found) continue;

        std::vector<int32_t> left_rows, right_rows;
        left_rows.reserve(work.rows.size());
        right_rows.reserve(work.rows.size());
        for (int32_t r : work.rows) {
            (x(r, best.feature) <= best.threshold ? left_rows : right_rows).push_back(r);
        }
        if (left_rows.empty() || right_rows.empty()) continue;  // degenerate, keep as leaf

        const int32_t left_index = static_cast<int32_t>(nodes_.size());
        nodes_.emplace_back();
        const int32_t right_index = static_cast<int32_t>(nodes_.size());
        nodes_.emplace_back();
        TreeNode& parent = nodes_[static_cast<size_t>(work.node_index)];
        parent.feature = best.feature;
        parent.threshold = best.threshold;
        parent.left = left_index;
        parent.right = right_index;

        // Right pushed first so the left branch is processed next; either
        // order works, construction is per-node deterministic.
        stack.push_back({right_index, work.depth + 1, std::move(right_rows)});
        stack.push_back({left_index, work.depth + 1, std::move(left_rows)});
    }
}

double DecisionTree::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    int32_t index = 0;
    while (true) {
        const TreeNode& node = nodes_[static_cast<size_t>(index)];
        if (node.feature < 0) return node.value;
        index = row[node.feature] <= node.threshold ? node.left : node.right;
    }
}

}  // namespace fairgrade
