#include "fairgrade/cross_validation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fairgrade/csv.hpp"
#include "fairgrade/metrics.hpp"
#include "fairgrade/parallel.hpp"
#include "fairgrade/rng.hpp"

namespace fairgrade {

namespace {

struct StudentCounts {
    StudentId student;
    int64_t total = 0;
    int64_t positive = 0;
};

double mean_of(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double stddev_of(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    const double m = mean_of(values);
    double acc = 0.0;
    for (double v : values) acc += (v - m) * (v - m);
    const double var = acc / static_cast<double>(values.size());
    return var > 0.0 ? std::sqrt(var) : 0.0;
}

}  // namespace

FoldAssignment stratified_group_kfold(const Dataset& dataset, int k, uint64_t seed) {
    if (k < 2) throw std::invalid_argument("stratified_group_kfold: k must be >= 2");

    std::map<StudentId, StudentCounts> by_student;
    for (Eigen::Index i = 0; i < dataset.rows(); ++i) {
        StudentCounts& c = by_student[dataset.students[static_cast<size_t>(i)]];
        c.student = dataset.students[static_cast<size_t>(i)];
        ++c.total;
        c.positive += dataset.labels[i] == 1;
    }
    if (static_cast<int>(by_student.size()) < k)
        throw std::invalid_argument("stratified_group_kfold: fewer students than folds");

    std::vector<StudentCounts> students;
    students.reserve(by_student.size());
    for (const auto& [id, counts] : by_student) students.push_back(counts);

    // Shuffle first so that students with equal sample counts land in
    // seed-dependent order, then stable-sort by descending count.
    Rng rng(substream(seed, "stratified-kfold"));
    for (size_t i = students.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.uniform_index(i));
        std::swap(students[i - 1], students[j]);
    }
    std::stable_sort(students.begin(), students.end(),
                     [](const StudentCounts& a, const StudentCounts& b) { return a.total > b.total; });

    std::vector<int64_t> fold_pos(static_cast<size_t>(k), 0);
    std::vector<int64_t> fold_neg(static_cast<size_t>(k), 0);
    std::vector<int64_t> fold_total(static_cast<size_t>(k), 0);
    std::vector<int> fold_students(static_cast<size_t>(k), 0);

    FoldAssignment assignment;
    assignment.k = k;

    for (size_t s = 0; s < students.size(); ++s) {
        const StudentCounts& st = students[s];
        const int64_t neg = st.total - st.positive;

        // With as many unfilled folds as students left, only empty folds are
        // candidates; this keeps every fold non-empty.
        int empty_folds = 0;
        for (int f = 0; f < k; ++f) empty_folds += fold_students[static_cast<size_t>(f)] == 0;
        const bool force_empty =
            empty_folds > 0 && students.size() - s <= static_cast<size_t>(empty_folds);

        int best_fold = -1;
        double best_eval = 0.0;
        int64_t best_total = 0;
        for (int f = 0; f < k; ++f) {
            if (force_empty && fold_students[static_cast<size_t>(f)] != 0) continue;
            // Tentative placement cost: spread of per-fold label counts,
            // averaged over the two labels.
            double eval = 0.0;
            for (int label = 0; label < 2; ++label) {
                double mean = 0.0;
                for (int g = 0; g < k; ++g) {
                    const auto& counts = label == 1 ? fold_pos : fold_neg;
                    double c = static_cast<double>(counts[static_cast<size_t>(g)]);
                    if (g == f) c += static_cast<double>(label == 1 ? st.positive : neg);
                    mean += c;
                }
                mean /= static_cast<double>(k);
                double var = 0.0;
                for (int g = 0; g < k; ++g) {
                    const auto& counts = label == 1 ? fold_pos : fold_neg;
                    double c = static_cast<double>(counts[static_cast<size_t>(g)]);
                    if (g == f) c += static_cast<double>(label == 1 ? st.positive : neg);
                    var += (c - mean) * (c - mean);
                }
                eval += std::sqrt(var / static_cast<double>(k));
            }
            eval *= 0.5;
            const int64_t total = fold_total[static_cast<size_t>(f)];
            if (best_fold < 0 || eval < best_eval ||
                (eval == best_eval && total < best_total)) {
                best_fold = f;
                best_eval = eval;
                best_total = total;
            }
        }

        assignment.fold_of_student[st.student] = best_fold;
        fold_pos[static_cast<size_t>(best_fold)] += st.positive;
        fold_neg[static_cast<size_t>(best_fold)] += neg;
        fold_total[static_cast<size_t>(best_fold)] += st.total;
        ++fold_students[static_cast<size_t>(best_fold)];
    }
    return assignment;
}

namespace {

Dataset subset_dataset(const Dataset& dataset, const std::vector<Eigen::Index>& rows) {
    Dataset out;
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    out.features.resize(n, dataset.cols());
    out.labels.resize(n);
    out.grades.resize(n);
    out.students.reserve(rows.size());
    out.courses.reserve(rows.size());
    out.grade_times.reserve(rows.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index r = rows[static_cast<size_t>(i)];
        out.features.row(i) = dataset.features.row(r);
        out.labels[i] = dataset.labels[r];
        out.grades[i] = dataset.grades[r];
        out.students.push_back(dataset.students[static_cast<size_t>(r)]);
        out.courses.push_back(dataset.courses[static_cast<size_t>(r)]);
        out.grade_times.push_back(dataset.grade_times[static_cast<size_t>(r)]);
    }
    out.names = dataset.names;
    out.average_grade = dataset.average_grade;
    return out;
}

}  // namespace

Hyperparams grid_search(ModelFamily family, const std::vector<Hyperparams>& grid,
                        const Dataset& dataset, const std::vector<Eigen::Index>& train_rows,
                        int inner_folds, uint64_t seed) {
    if (grid.empty()) throw std::invalid_argument("grid_search: empty grid");
    if (grid.size() == 1) return grid.front();

    const Dataset pool = subset_dataset(dataset, train_rows);
    std::set<StudentId> distinct(pool.students.begin(), pool.students.end());
    if (static_cast<int>(distinct.size()) < inner_folds) return grid.front();
    const FoldAssignment inner = stratified_group_kfold(pool, inner_folds, substream(seed, "inner"));

    std::vector<std::vector<Eigen::Index>> inner_train(static_cast<size_t>(inner_folds));
    std::vector<std::vector<Eigen::Index>> inner_test(static_cast<size_t>(inner_folds));
    for (Eigen::Index i = 0; i < pool.rows(); ++i) {
        const int f = inner.fold_of(pool.students[static_cast<size_t>(i)]);
        for (int g = 0; g < inner_folds; ++g) {
            (g == f ? inner_test : inner_train)[static_cast<size_t>(g)].push_back(i);
        }
    }

    double best_auc = 0.0;
    size_t best_index = 0;
    bool any = false;
    for (size_t g = 0; g < grid.size(); ++g) {
        std::vector<double> fold_aucs;
        for (int f = 0; f < inner_folds; ++f) {
            const auto& tr = inner_train[static_cast<size_t>(f)];
            const auto& te = inner_test[static_cast<size_t>(f)];
            if (tr.size() < 2 || te.empty()) continue;

            Eigen::MatrixXd train_x(static_cast<Eigen::Index>(tr.size()), pool.cols());
            Eigen::VectorXi train_y(static_cast<Eigen::Index>(tr.size()));
            for (size_t i = 0; i < tr.size(); ++i) {
                train_x.row(static_cast<Eigen::Index>(i)) = pool.features.row(tr[i]);
                train_y[static_cast<Eigen::Index>(i)] = pool.labels[tr[i]];
            }
            Eigen::MatrixXd test_x(static_cast<Eigen::Index>(te.size()), pool.cols());
            Eigen::VectorXi test_y(static_cast<Eigen::Index>(te.size()));
            for (size_t i = 0; i < te.size(); ++i) {
                test_x.row(static_cast<Eigen::Index>(i)) = pool.features.row(te[i]);
                test_y[static_cast<Eigen::Index>(i)] = pool.labels[te[i]];
            }
            if (!has_both_classes(test_y)) continue;

            const Scaler scaler = fit_scaler(train_x);
            ModelSpec spec{family, grid[g], substream(seed, "grid", g, static_cast<uint64_t>(f))};
            auto model = train(spec, apply_scaler(scaler, train_x), train_y);
            const Eigen::VectorXd proba = model->predict_proba(apply_scaler(scaler, test_x));
            fold_aucs.push_back(auc_roc(proba, test_y));
        }
        if (fold_aucs.empty()) continue;
        const double mean_auc = mean_of(fold_aucs);
        if (!any || mean_auc > best_auc) {
            any = true;
            best_auc = mean_auc;
            best_index = g;
        }
    }
    return grid[best_index];  // grid order breaks ties; index 0 if nothing evaluated
}

CVResult cross_validate(ModelFamily family, const std::vector<Hyperparams>& grid,
                        const Dataset& dataset, const FoldAssignment& folds,
                        const CVOptions& options) {
    const int k = folds.k;
    CVResult result;
    result.family = family;
    result.k = k;
    result.fold_of_sample.resize(static_cast<size_t>(dataset.rows()));
    result.oof_probability = Eigen::VectorXd::Zero(dataset.rows());
    result.folds.resize(static_cast<size_t>(k));

    std::vector<std::vector<Eigen::Index>> test_rows(static_cast<size_t>(k));
    std::vector<std::vector<Eigen::Index>> train_rows(static_cast<size_t>(k));
    for (Eigen::Index i = 0; i < dataset.rows(); ++i) {
        const int f = folds.fold_of(dataset.students[static_cast<size_t>(i)]);
        result.fold_of_sample[static_cast<size_t>(i)] = f;
        for (int g = 0; g < k; ++g)
            (g == f ? test_rows : train_rows)[static_cast<size_t>(g)].push_back(i);
    }

    parallel_for(static_cast<size_t>(k), options.workers, [&](size_t f) {
        FoldResult& fold = result.folds[f];
        const auto& tr = train_rows[f];
        const auto& te = test_rows[f];
        fold.test_count = static_cast<Eigen::Index>(te.size());
        if (tr.size() < 2 || te.empty()) return;

        Eigen::MatrixXd train_x(static_cast<Eigen::Index>(tr.size()), dataset.cols());
        Eigen::VectorXi train_y(static_cast<Eigen::Index>(tr.size()));
        for (size_t i = 0; i < tr.size(); ++i) {
            train_x.row(static_cast<Eigen::Index>(i)) = dataset.features.row(tr[i]);
            train_y[static_cast<Eigen::Index>(i)] = dataset.labels[tr[i]];
        }

        fold.scaler = fit_scaler(train_x);
        fold.chosen_hyperparams =
            grid_search(family, grid, dataset, tr, options.inner_folds,
                        substream(options.seed, "fold-grid", f));

        ModelSpec spec{family, fold.chosen_hyperparams,
                       substream(options.seed, "fold-model", f)};
        auto model = train(spec, apply_scaler(fold.scaler, train_x), train_y);

        Eigen::MatrixXd test_x(static_cast<Eigen::Index>(te.size()), dataset.cols());
        Eigen::VectorXi test_y(static_cast<Eigen::Index>(te.size()));
        for (size_t i = 0; i < te.size(); ++i) {
            test_x.row(static_cast<Eigen::Index>(i)) = dataset.features.row(te[i]);
            test_y[static_cast<Eigen::Index>(i)] = dataset.labels[te[i]];
        }
        const Eigen::VectorXd proba = model->predict_proba(apply_scaler(fold.scaler, test_x));
        for (size_t i = 0; i < te.size(); ++i) result.oof_probability[te[i]] = proba[static_cast<Eigen::Index>(i)];

        if (has_both_classes(test_y)) {
            fold.auc = auc_roc(proba, test_y);
        }
        Eigen::VectorXi pred(proba.size());
        for (Eigen::Index i = 0; i < proba.size(); ++i) pred[i] = proba[i] >= 0.5 ? 1 : 0;
        fold.weighted_f1 = weighted_f1(pred, test_y);
    });

    std::vector<double> aucs, f1s;
    for (int f = 0; f < k; ++f) {
        const FoldResult& fold = result.folds[static_cast<size_t>(f)];
        if (fold.auc)
            aucs.push_back(*fold.auc);
        else
            result.warnings.push_back("fold " + std::to_string(f) +
                                      ": AUC undefined (single-class test fold)");
        if (fold.weighted_f1) f1s.push_back(*fold.weighted_f1);
    }
    result.auc_mean = mean_of(aucs);
    result.auc_std = stddev_of(aucs);
    result.f1_mean = mean_of(f1s);
    result.f1_std = stddev_of(f1s);
    return result;
}

BackwardSelectionReport backward_feature_selection(ModelFamily family,
                                                   const std::vector<Hyperparams>& grid,
                                                   const Dataset& dataset,
                                                   const CVOptions& options) {
    if (dataset.cols() < 2)
        throw std::invalid_argument("backward_feature_selection: need at least 2 features");

    const FoldAssignment folds =
        stratified_group_kfold(dataset, options.k, substream(options.seed, "folds"));

    BackwardSelectionReport report;
    report.auc_full = cross_validate(family, grid, dataset, folds, options).auc_mean;
    for (Eigen::Index c = 0; c < dataset.cols(); ++c) {
        const Dataset reduced = dataset.without_feature(c);
        const double auc = cross_validate(family, grid, reduced, folds, options).auc_mean;
        report.effects.push_back(
            {dataset.names[static_cast<size_t>(c)], auc, auc - report.auc_full});
    }
    return report;
}

void write_cv_json(std::ostream& out, const CVResult& result) {
    out << "{\n  \"family\": \"" << family_name(result.family) << "\",\n  \"k\": " << result.k
        << ",\n  \"auc_mean\": " << format_double(result.auc_mean)
        << ",\n  \"auc_std\": " << format_double(result.auc_std)
        << ",\n  \"f1_mean\": " << format_double(result.f1_mean)
        << ",\n  \"f1_std\": " << format_double(result.f1_std) << ",\n  \"folds\": [\n";
    for (size_t f = 0; f < result.folds.size(); ++f) {
        const FoldResult& fold = result.folds[f];
        out << "    {\"fold\": " << f << ", \"test_count\": " << fold.test_count;
        if (fold.auc) out << ", \"auc\": " << format_double(*fold.auc);
        if (fold.weighted_f1) out << ", \"weighted_f1\": " << format_double(*fold.weighted_f1);
        out << ", \"hyperparams\": {";
        bool first = true;
        for (const auto& [name, value] : fold.chosen_hyperparams) {
            if (!first) out << ", ";
            first = false;
            out << '\"' << name << "\": " << format_double(value);
        }
        out << "}}" << (f + 1 < result.folds.size() ? "," : "") << '\n';
    }
    out << "  ]\n}\n";
}

void write_predictions_csv_header(std::ostream& out) {
    out << "family,sample_id,student_id,label,probability,fold\n";
}

void write_predictions_csv(std::ostream& out, const Dataset& dataset, const CVResult& result) {
    for (Eigen::Index i = 0; i < dataset.rows(); ++i) {
        out << family_name(result.family) << ',' << i << ','
            << dataset.students[static_cast<size_t>(i)].str() << ',' << dataset.labels[i] << ','
            << format_double(result.oof_probability[i]) << ','
            << result.fold_of_sample[static_cast<size_t>(i)] << '\n';
    }
}

}  // namespace fairgrade
