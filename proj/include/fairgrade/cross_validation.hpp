#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fairgrade/features.hpp"
#include "fairgrade/models.hpp"

namespace fairgrade {

// Student-level partition into k folds.
struct FoldAssignment {
    int k = 0;
    std::map<StudentId, int> fold_of_student;

    int fold_of(StudentId student) const { return fold_of_student.at(student); }
};

// Greedy stratified group split: students are processed in descending sample
// count (ties shuffled by seed) and each goes to the fold that best balances
// per-fold label counts. Deterministic given seed.
FoldAssignment stratified_group_kfold(const Dataset& dataset, int k, uint64_t seed);

struct FoldResult {
    std::optional<double> auc;  // empty when the test fold is single-class
    std::optional<double> weighted_f1;
    Hyperparams chosen_hyperparams;
    Scaler scaler;  // fitted on this fold's training portion
    Eigen::Index test_count = 0;
};

struct CVResult {
    ModelFamily family = ModelFamily::Dummy;
    int k = 0;
    std::vector<int> fold_of_sample;   // n, test-fold index per sample
    Eigen::VectorXd oof_probability;   // n, out-of-fold score per sample
    std::vector<FoldResult> folds;     // k
    double auc_mean = 0.0, auc_std = 0.0;
    double f1_mean = 0.0, f1_std = 0.0;
    std::vector<std::string> warnings;
};

struct CVOptions {
    int k = 10;
    uint64_t seed = 0;
    int workers = 1;
    int inner_folds = 3;  // grid-search split of the training portion
};

// Mean inner-CV AUC per grid point over a student-level split of the
// training rows only; argmax, ties to the earlier grid entry. A singleton
// grid is returned as-is without inner evaluation.
Hyperparams grid_search(ModelFamily family, const std::vector<Hyperparams>& grid,
                        const Dataset& dataset, const std::vector<Eigen::Index>& train_rows,
                        int inner_folds, uint64_t seed);

// Per fold: scaler fit on the training portion, grid search on the training
// portion, train, then score the held-out fold. Aggregates are mean/std
// across folds.
CVResult cross_validate(ModelFamily family, const std::vector<Hyperparams>& grid,
                        const Dataset& dataset, const FoldAssignment& folds,
                        const CVOptions& options);

struct FeatureRemovalEffect {
    std::string feature;
    double auc_without = 0.0;
    double auc_delta = 0.0;  // auc_without - auc_full
};

struct BackwardSelectionReport {
    double auc_full = 0.0;
    std::vector<FeatureRemovalEffect> effects;  // one per feature
};

// Diagnostic only: re-runs cross-validation with each feature removed.
BackwardSelectionReport backward_feature_selection(ModelFamily family,
                                                   const std::vector<Hyperparams>& grid,
                                                   const Dataset& dataset,
                                                   const CVOptions& options);

void write_cv_json(std::ostream& out, const CVResult& result);
void write_predictions_csv_header(std::ostream& out);
void write_predictions_csv(std::ostream& out, const Dataset& dataset, const CVResult& result);

}  // namespace fairgrade
