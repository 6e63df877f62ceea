#include "fairgrade/fairness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "fairgrade/csv.hpp"
#include "fairgrade/metrics.hpp"

namespace fairgrade {

namespace {

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

CellAggregate aggregate(std::vector<double> per_fold) {
    CellAggregate cell;
    cell.defined_folds = static_cast<int>(per_fold.size());
    cell.mean = mean_of(per_fold);
    cell.stddev = stddev_of(per_fold);
    cell.per_fold = std::move(per_fold);
    return cell;
}

}  // namespace

std::optional<RegionCode> resolve_majority_region(const std::vector<RegionCode>& observations) {
    if (observations.empty()) return std::nullopt;
    std::array<int64_t, kNumRegionCodes> counts{};
    for (RegionCode code : observations) ++counts[static_cast<size_t>(code)];
    // First-listed code wins ties by scanning in enumeration order.
    size_t best = 0;
    for (size_t i = 1; i < counts.size(); ++i) {
        if (counts[i] > counts[best]) best = i;
    }
    return static_cast<RegionCode>(best);
}

GroupAssignment resolve_groups(const std::vector<LocationRecord>& records) {
    std::map<StudentId, std::vector<RegionCode>> observed;
    for (const LocationRecord& record : records) observed[record.student].push_back(record.region);

    GroupAssignment groups;
    for (const auto& [student, codes] : observed) {
        if (auto region = resolve_majority_region(codes)) {
            groups.cluster_of_student[student] = cluster_region(*region);
        }
    }
    return groups;
}

double madd(const std::vector<double>& group_scores, const std::vector<double>& rest_scores,
            double bin_width) {
    if (group_scores.empty() || rest_scores.empty())
        throw std::invalid_argument("madd: empty score list");
    if (!(bin_width > 0.0 && bin_width <= 1.0))
        throw std::invalid_argument("madd: bin_width must be in (0, 1]");

    const int bins = static_cast<int>(std::ceil(1.0 / bin_width));
    auto bin_of = [&](double p) {
        const int b = static_cast<int>(std::floor(p / bin_width));
        return std::min(std::max(b, 0), bins - 1);
    };

    std::vector<int64_t> group_counts(static_cast<size_t>(bins), 0);
    std::vector<int64_t> rest_counts(static_cast<size_t>(bins), 0);
    for (double p : group_scores) ++group_counts[static_cast<size_t>(bin_of(p))];
    for (double p : rest_scores) ++rest_counts[static_cast<size_t>(bin_of(p))];

    // Cross-multiplied integer counts keep the sum exact: identical
    // histograms give exactly 0 and disjoint supports exactly 2.
    const double n_group = static_cast<double>(group_scores.size());
    const double n_rest = static_cast<double>(rest_scores.size());
    double scaled_distance = 0.0;
    for (int b = 0; b < bins; ++b) {
        scaled_distance += std::abs(static_cast<double>(group_counts[static_cast<size_t>(b)]) * n_rest -
                                    static_cast<double>(rest_counts[static_cast<size_t>(b)]) * n_group);
    }
    return scaled_distance / (n_group * n_rest);
}

namespace {

struct ClusterFoldCells {
    // [cluster][fold] -> row indices of that cluster's samples in the fold.
    std::array<std::vector<std::vector<Eigen::Index>>, kNumClusters> rows;
    std::array<bool, kNumClusters> present{};
};

ClusterFoldCells split_by_cluster(const Dataset& dataset, const CVResult& cv,
                                  const GroupAssignment& groups) {
    ClusterFoldCells cells;
    for (auto& per_cluster : cells.rows)
        per_cluster.assign(static_cast<size_t>(cv.k), std::vector<Eigen::Index>{});
    for (Eigen::Index i = 0; i < dataset.rows(); ++i) {
        const auto cluster = groups.cluster_of(dataset.students[static_cast<size_t>(i)]);
        if (!cluster) continue;  // unknown location: out of the audit
        const size_t c = static_cast<size_t>(*cluster);
        cells.present[c] = true;
        cells.rows[c][static_cast<size_t>(cv.fold_of_sample[static_cast<size_t>(i)])].push_back(i);
    }
    return cells;
}

}  // namespace

PerGroupMetrics per_group_metrics(const Dataset& dataset, const CVResult& cv,
                                  const GroupAssignment& groups) {
    if (static_cast<Eigen::Index>(cv.fold_of_sample.size()) != dataset.rows())
        throw std::invalid_argument("per_group_metrics: cv result does not cover dataset");

    const ClusterFoldCells cells = split_by_cluster(dataset, cv, groups);
    PerGroupMetrics out;
    for (RegionCluster cluster : all_clusters()) {
        const size_t c = static_cast<size_t>(cluster);
        if (!cells.present[c]) continue;  // no students: absent row
        std::vector<double> aucs, f1s;
        for (int f = 0; f < cv.k; ++f) {
            const auto& rows = cells.rows[c][static_cast<size_t>(f)];
            if (rows.empty()) {
                out.warnings.push_back(std::string(cluster_name(cluster)) + ": fold " +
                                       std::to_string(f) + " has no samples");
                continue;
            }
            Eigen::VectorXd scores(static_cast<Eigen::Index>(rows.size()));
            Eigen::VectorXi labels(static_cast<Eigen::Index>(rows.size()));
            for (size_t i = 0; i < rows.size(); ++i) {
                scores[static_cast<Eigen::Index>(i)] = cv.oof_probability[rows[i]];
                labels[static_cast<Eigen::Index>(i)] = dataset.labels[rows[i]];
            }
            if (has_both_classes(labels)) {
                aucs.push_back(auc_roc(scores, labels));
            } else {
                out.warnings.push_back(std::string(cluster_name(cluster)) + ": fold " +
                                       std::to_string(f) +
                                       " AUC undefined (single-class), excluded");
            }
            Eigen::VectorXi pred(scores.size());
            for (Eigen::Index i = 0; i < scores.size(); ++i) pred[i] = scores[i] >= 0.5 ? 1 : 0;
            f1s.push_back(weighted_f1(pred, labels));
        }
        out.auc[cluster] = aggregate(std::move(aucs));
        out.f1[cluster] = aggregate(std::move(f1s));
    }
    return out;
}

FairnessReport fairness_report(const Dataset& dataset, const CVResult& cv,
                               const GroupAssignment& groups, double madd_bin_width) {
    FairnessReport report;
    report.family = cv.family;
    report.overall_auc_mean = cv.auc_mean;
    report.overall_auc_std = cv.auc_std;
    report.overall_f1_mean = cv.f1_mean;
    report.overall_f1_std = cv.f1_std;
    report.madd_bin_width = madd_bin_width;

    PerGroupMetrics per_group = per_group_metrics(dataset, cv, groups);
    report.auc = std::move(per_group.auc);
    report.f1 = std::move(per_group.f1);
    report.warnings = std::move(per_group.warnings);

    // One-vs-rest MADD per fold over that fold's out-of-fold probabilities;
    // the rest side spans the other located clusters.
    const ClusterFoldCells cells = split_by_cluster(dataset, cv, groups);
    for (RegionCluster cluster : all_clusters()) {
        const size_t c = static_cast<size_t>(cluster);
        if (!cells.present[c]) continue;
        std::vector<double> per_fold;
        for (int f = 0; f < cv.k; ++f) {
            std::vector<double> group_scores, rest_scores;
            for (RegionCluster other : all_clusters()) {
                const size_t o = static_cast<size_t>(other);
                if (!cells.present[o]) continue;
                auto& target = o == c ? group_scores : rest_scores;
                for (Eigen::Index row : cells.rows[o][static_cast<size_t>(f)])
                    target.push_back(cv.oof_probability[row]);
            }
            if (group_scores.empty() || rest_scores.empty()) {
                report.warnings.push_back(std::string(cluster_name(cluster)) + ": fold " +
                                          std::to_string(f) +
                                          " MADD undefined (empty side), excluded");
                continue;
            }
            per_fold.push_back(madd(group_scores, rest_scores, madd_bin_width));
        }
        report.madd[cluster] = aggregate(std::move(per_fold));
    }

    std::vector<double> auc_means, f1_means, madd_means;
    for (const auto& [cluster, cell] : report.auc) auc_means.push_back(cell.mean);
    for (const auto& [cluster, cell] : report.f1) f1_means.push_back(cell.mean);
    for (const auto& [cluster, cell] : report.madd) madd_means.push_back(cell.mean);
    report.auc_cluster_mean = mean_of(auc_means);
    report.f1_cluster_mean = mean_of(f1_means);
    report.madd_cluster_mean = mean_of(madd_means);
    report.auc_delta_all = report.auc_cluster_mean - report.overall_auc_mean;
    report.f1_delta_all = report.f1_cluster_mean - report.overall_f1_mean;
    return report;
}

FiveNumberSummary five_number_summary(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("five_number_summary: empty input");
    std::sort(values.begin(), values.end());
    const auto quantile = [&](double p) {
        const double pos = p * static_cast<double>(values.size() - 1);
        const size_t lo = static_cast<size_t>(std::floor(pos));
        const size_t hi = static_cast<size_t>(std::ceil(pos));
        const double frac = pos - static_cast<double>(lo);
        return values[lo] + frac * (values[hi] - values[lo]);
    };
    FiveNumberSummary s;
    s.min = values.front();
    s.q1 = quantile(0.25);
    s.median = quantile(0.5);
    s.q3 = quantile(0.75);
    s.max = values.back();
    return s;
}

GradeDistributionStats grade_distribution_stats(const Dataset& dataset,
                                                const GroupAssignment& groups) {
    std::array<std::vector<double>, kNumClusters> grades_by_cluster;
    for (Eigen::Index i = 0; i < dataset.rows(); ++i) {
        const auto cluster = groups.cluster_of(dataset.students[static_cast<size_t>(i)]);
        if (!cluster) continue;
        grades_by_cluster[static_cast<size_t>(*cluster)].push_back(dataset.grades[i]);
    }

    GradeDistributionStats stats;
    for (RegionCluster cluster : all_clusters()) {
        const auto& grades = grades_by_cluster[static_cast<size_t>(cluster)];
        if (grades.empty()) continue;
        ClusterGradeStats cs;
        cs.cluster = cluster;
        cs.count = static_cast<Eigen::Index>(grades.size());
        cs.summary = five_number_summary(grades);

        // Silverman's rule of thumb; degenerate spreads fall back to a
        // narrow kernel so the density stays finite.
        const double n = static_cast<double>(grades.size());
        double mean = 0.0;
        for (double g : grades) mean += g;
        mean /= n;
        double acc = 0.0;
        for (double g : grades) acc += (g - mean) * (g - mean);
        const double sd = n > 1 ? std::sqrt(acc / (n - 1.0)) : 0.0;
        const double iqr = cs.summary.q3 - cs.summary.q1;
        double spread = std::min(sd, iqr / 1.34);
        if (spread <= 0.0) spread = std::max(sd, iqr / 1.34);
        double bandwidth = 0.9 * spread * std::pow(n, -0.2);
        if (!(bandwidth > 1e-3)) bandwidth = 1e-3;

        cs.kde_x.resize(101);
        cs.kde_density.resize(101);
        const double norm = 1.0 / (n * bandwidth * std::sqrt(2.0 * M_PI));
        for (int i = 0; i <= 100; ++i) {
            const double x = static_cast<double>(i) / 100.0;
            double density = 0.0;
            for (double g : grades) {
                const double z = (x - g) / bandwidth;
                density += std::exp(-0.5 * z * z);
            }
            cs.kde_x[i] = x;
            cs.kde_density[i] = density * norm;
        }
        stats.clusters.push_back(std::move(cs));
    }
    return stats;
}

namespace {

std::string cell_text(const std::map<RegionCluster, CellAggregate>& cells, RegionCluster cluster) {
    auto it = cells.find(cluster);
    if (it == cells.end() || it->second.defined_folds == 0) return "N/A";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f (%.3f)", it->second.mean, it->second.stddev);
    return buf;
}

std::string fixed3(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", value);
    return buf;
}

}  // namespace

void write_fairness_csv(std::ostream& out, const std::vector<FairnessReport>& reports) {
    out << "family,metric,All,NCR,Luzon,Mindanao,Visayas,Abroad,Mean,Delta_All\n";
    for (const FairnessReport& report : reports) {
        const std::string family(family_name(report.family));
        char all_auc[64], all_f1[64];
        std::snprintf(all_auc, sizeof(all_auc), "%.3f (%.3f)", report.overall_auc_mean,
                      report.overall_auc_std);
        std::snprintf(all_f1, sizeof(all_f1), "%.3f (%.3f)", report.overall_f1_mean,
                      report.overall_f1_std);

        out << family << ",AUC," << all_auc;
        for (RegionCluster cluster : all_clusters()) out << ',' << cell_text(report.auc, cluster);
        out << ',' << fixed3(report.auc_cluster_mean) << ',' << fixed3(report.auc_delta_all) << '\n';

        out << family << ",F1," << all_f1;
        for (RegionCluster cluster : all_clusters()) out << ',' << cell_text(report.f1, cluster);
        out << ',' << fixed3(report.f1_cluster_mean) << ',' << fixed3(report.f1_delta_all) << '\n';

        out << family << ",MADD,N/A";
        for (RegionCluster cluster : all_clusters()) out << ',' << cell_text(report.madd, cluster);
        out << ',' << fixed3(report.madd_cluster_mean) << ",N/A\n";
    }
}

namespace {

void write_cells_json(std::ostream& out, const std::map<RegionCluster, CellAggregate>& cells,
                      int indent) {
    const std::string pad(static_cast<size_t>(indent), ' ');
    out << "{\n";
    bool first = true;
    for (const auto& [cluster, cell] : cells) {
        if (!first) out << ",\n";
        first = false;
        out << pad << "  \"" << cluster_name(cluster) << "\": {\"mean\": " << format_double(cell.mean)
            << ", \"std\": " << format_double(cell.stddev)
            << ", \"defined_folds\": " << cell.defined_folds << "}";
    }
    out << '\n' << pad << '}';
}

}  // namespace

void write_fairness_json(std::ostream& out, const std::vector<FairnessReport>& reports) {
    out << "{\n  \"reports\": [\n";
    for (size_t r = 0; r < reports.size(); ++r) {
        const FairnessReport& report = reports[r];
        out << "    {\n      \"family\": \"" << family_name(report.family) << "\",\n"
            << "      \"overall\": {\"auc_mean\": " << format_double(report.overall_auc_mean)
            << ", \"auc_std\": " << format_double(report.overall_auc_std)
            << ", \"f1_mean\": " << format_double(report.overall_f1_mean)
            << ", \"f1_std\": " << format_double(report.overall_f1_std) << "},\n"
            << "      \"madd_bin_width\": " << format_double(report.madd_bin_width) << ",\n";
        out << "      \"auc\": ";
        write_cells_json(out, report.auc, 6);
        out << ",\n      \"f1\": ";
        write_cells_json(out, report.f1, 6);
        out << ",\n      \"madd\": ";
        write_cells_json(out, report.madd, 6);
        out << ",\n      \"cluster_mean\": {\"auc\": " << format_double(report.auc_cluster_mean)
            << ", \"f1\": " << format_double(report.f1_cluster_mean)
            << ", \"madd\": " << format_double(report.madd_cluster_mean) << "},\n"
            << "      \"delta_all\": {\"auc\": " << format_double(report.auc_delta_all)
            << ", \"f1\": " << format_double(report.f1_delta_all) << "},\n"
            << "      \"warnings\": [";
        for (size_t w = 0; w < report.warnings.size(); ++w) {
            if (w) out << ", ";
            out << '\"' << report.warnings[w] << '\"';
        }
        out << "]\n    }" << (r + 1 < reports.size() ? "," : "") << '\n';
    }
    out << "  ]\n}\n";
}

void write_grade_stats_csv(std::ostream& out, const GradeDistributionStats& stats) {
    out << "cluster,record,x,value\n";
    for (const ClusterGradeStats& cs : stats.clusters) {
        const std::string name(cluster_name(cs.cluster));
        out << name << ",count,," << cs.count << '\n';
        out << name << ",five_number,min," << format_double(cs.summary.min) << '\n';
        out << name << ",five_number,q1," << format_double(cs.summary.q1) << '\n';
        out << name << ",five_number,median," << format_double(cs.summary.median) << '\n';
        out << name << ",five_number,q3," << format_double(cs.summary.q3) << '\n';
        out << name << ",five_number,max," << format_double(cs.summary.max) << '\n';
        for (Eigen::Index i = 0; i < cs.kde_x.size(); ++i) {
            out << name << ",kde," << format_double(cs.kde_x[i]) << ','
                << format_double(cs.kde_density[i]) << '\n';
        }
    }
}

}  // namespace fairgrade
