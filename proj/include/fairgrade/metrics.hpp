#pragma once

#include <Eigen/Core>
#include <stdexcept>

namespace fairgrade {

class UndefinedMetricError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
// correctly, ties counted 1/2. O(n log n) by rank summation. Throws
// UndefinedMetricError unless both classes are present.
double auc_roc(const Eigen::Ref<const Eigen::VectorXd>& scores,
               const Eigen::Ref<const Eigen::VectorXi>& labels);

// Per-class F1 (0 when precision + recall == 0) averaged with weights equal
// to class supports / n.
double weighted_f1(const Eigen::Ref<const Eigen::VectorXi>& predictions,
                   const Eigen::Ref<const Eigen::VectorXi>& labels);

inline bool has_both_classes(const Eigen::Ref<const Eigen::VectorXi>& labels) {
    bool pos = false, neg = false;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        (labels[i] == 1 ? pos : neg) = true;
    }
    return pos && neg;
}

}  // namespace fairgrade
