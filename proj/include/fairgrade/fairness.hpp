#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fairgrade/cross_validation.hpp"
#include "fairgrade/events.hpp"
#include "fairgrade/features.hpp"
#include "fairgrade/region.hpp"

namespace fairgrade {

// The region a student connected from most often; ties go to the
// first-listed RegionCode. Empty input yields no assignment.
std::optional<RegionCode> resolve_majority_region(const std::vector<RegionCode>& observations);

// StudentId -> cluster for students with at least one location record.
// Students absent from the map lack location data: they stay in the model
// but are excluded from the fairness audit.
struct GroupAssignment {
    std::map<StudentId, RegionCluster> cluster_of_student;

    std::optional<RegionCluster> cluster_of(StudentId student) const {
        auto it = cluster_of_student.find(student);
        if (it == cluster_of_student.end()) return std::nullopt;
        return it->second;
    }
};

GroupAssignment resolve_groups(const std::vector<LocationRecord>& records);

// L1 distance between the two normalized score histograms over ceil(1/bin_width)
// bins on [0, 1]; range [0, 2], symmetric, 0 iff the histograms are equal.
double madd(const std::vector<double>& group_scores, const std::vector<double>& rest_scores,
            double bin_width = 0.01);

struct CellAggregate {
    double mean = 0.0;
    double stddev = 0.0;       // across defined folds
    int defined_folds = 0;
    std::vector<double> per_fold;  // defined folds only, fold order
};

// Per-cluster, per-fold restriction of the out-of-fold predictions.
struct PerGroupMetrics {
    // cluster -> aggregate; clusters with no located students are absent.
    std::map<RegionCluster, CellAggregate> auc;
    std::map<RegionCluster, CellAggregate> f1;
    std::vector<std::string> warnings;  // undefined fold-cluster cells
};

PerGroupMetrics per_group_metrics(const Dataset& dataset, const CVResult& cv,
                                  const GroupAssignment& groups);

// Table-shaped fairness summary for one model family.
struct FairnessReport {
    ModelFamily family = ModelFamily::Dummy;
    double overall_auc_mean = 0.0, overall_auc_std = 0.0;
    double overall_f1_mean = 0.0, overall_f1_std = 0.0;
    std::map<RegionCluster, CellAggregate> auc;
    std::map<RegionCluster, CellAggregate> f1;
    std::map<RegionCluster, CellAggregate> madd;  // one-vs-rest per fold
    double auc_cluster_mean = 0.0;  // mean over present clusters
    double f1_cluster_mean = 0.0;
    double madd_cluster_mean = 0.0;
    double auc_delta_all = 0.0;  // cluster mean - overall
    double f1_delta_all = 0.0;
    double madd_bin_width = 0.01;
    std::vector<std::string> warnings;
};

FairnessReport fairness_report(const Dataset& dataset, const CVResult& cv,
                               const GroupAssignment& groups, double madd_bin_width = 0.01);

struct FiveNumberSummary {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct ClusterGradeStats {
    RegionCluster cluster = RegionCluster::NCR;
    Eigen::Index count = 0;
    FiveNumberSummary summary;
    Eigen::VectorXd kde_x;        // 101 points on [0, 1]
    Eigen::VectorXd kde_density;  // Gaussian kernel, Silverman bandwidth
};

struct GradeDistributionStats {
    std::vector<ClusterGradeStats> clusters;  // present clusters, enum order
};

GradeDistributionStats grade_distribution_stats(const Dataset& dataset,
                                                const GroupAssignment& groups);

// Table-1-shaped CSV: one row per family x metric, columns
// All, NCR, Luzon, Mindanao, Visayas, Abroad, Mean, Delta_All.
void write_fairness_csv(std::ostream& out, const std::vector<FairnessReport>& reports);
void write_fairness_json(std::ostream& out, const std::vector<FairnessReport>& reports);
void write_grade_stats_csv(std::ostream& out, const GradeDistributionStats& stats);

FiveNumberSummary five_number_summary(std::vector<double> values);

}  // namespace fairgrade
