#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "fairgrade/rng.hpp"

namespace fairgrade {

// CART with exact best-threshold splits over sorted unique feature values.
// Classification fits binary 0/1 targets with Gini impurity; regression fits
// real targets with sum-of-squares reduction. Shared by DT, RF and the
// boosted ensemble.

struct TreeParams {
    int max_depth = -1;       // -1 = unbounded
    int min_leaf = 1;         // minimum samples in each child
    int features_per_split = 0;  // 0 = consider all features
    bool regression = false;
};

struct TreeNode {
    int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // row goes left iff x[feature] <= threshold
    int32_t left = -1;
    int32_t right = -1;
    double value = 0.0;  // leaf: positive-class frequency or mean target
};

class DecisionTree {
  public:
    // `rows` may contain duplicates (bootstrap multiplicity).
    void fit(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& target,
             std::vector<int32_t> rows, const TreeParams& params, Rng& rng);

    double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::vector<TreeNode>& mutable_nodes() { return nodes_; }

  private:
    std::vector<TreeNode> nodes_;
};

// Best split of `rows` on one feature. Used by the tree and exposed for the
// split-oracle tests.
struct SplitCandidate {
    bool found = false;
    int32_t feature = -1;
    double threshold = 0.0;
    double score = 0.0;  // larger is better; comparable within one node only
};

SplitCandidate best_split_on_feature(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                     const Eigen::Ref<const Eigen::VectorXd>& target,
                                     const std::vector<int32_t>& rows, int32_t feature,
                                     int min_leaf, bool regression);

}  // namespace fairgrade
