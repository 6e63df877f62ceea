#include "fairgrade/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace fairgrade {

double auc_roc(const Eigen::Ref<const Eigen::VectorXd>& scores,
               const Eigen::Ref<const Eigen::VectorXi>& labels) {
    const Eigen::Index n = scores.size();
    if (labels.size() != n) throw std::invalid_argument("auc_roc: size mismatch");

    int64_t n_pos = 0;
    for (Eigen::Index i = 0; i < n; ++i) n_pos += labels[i] == 1;
    const int64_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw UndefinedMetricError("auc_roc undefined: only one class present");

    std::vector<Eigen::Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return scores[a] < scores[b]; });

    // Sum of average ranks over positives; ties share the mean rank of
    // their run, which makes tied (pos, neg) pairs count exactly 1/2.
    double rank_sum_pos = 0.0;
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (Eigen::Index t = i; t <= j; ++t) {
            if (labels[order[t]] == 1) rank_sum_pos += avg_rank;
        }
        i = j + 1;
    }

    const double u_statistic =
        rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u_statistic / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double weighted_f1(const Eigen::Ref<const Eigen::VectorXi>& predictions,
                   const Eigen::Ref<const Eigen::VectorXi>& labels) {
    const Eigen::Index n = predictions.size();
    if (labels.size() != n) throw std::invalid_argument("weighted_f1: size mismatch");
    if (n == 0) throw std::invalid_argument("weighted_f1: empty input");

    double total = 0.0;
    for (int cls : {0, 1}) {
        int64_t tp = 0, fp = 0, fn = 0, support = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool pred_c = predictions[i] == cls;
            const bool true_c = labels[i] == cls;
            support += true_c;
            tp += pred_c && true_c;
            fp += pred_c && !true_c;
            fn += !pred_c && true_c;
        }
        const double precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        const double recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        const double f1 =
            (precision + recall) > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        total += f1 * (static_cast<double>(support) / static_cast<double>(n));
    }
    return total;
}

}  // namespace fairgrade
