#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string_view>
#include <vector>

#include "fairgrade/events.hpp"
#include "fairgrade/ids.hpp"

namespace fairgrade {

// The 27 predictors, in the fixed order models are trained on.
// Grouped as: plain counts (10), conditioned counts (9), timing (8).
constexpr int kNumFeatures = 27;

enum Feature : int {
    kNResourceAccess = 0,
    kNFileUpload,
    kNFileEdit,
    kNForumPost,
    kNAssignmentSubmit,
    kNQuizSubmit,
    kNDistinctResources,
    kNActiveDays,
    kNSessions,
    kNPriorGrades,
    kNForumPostMin100,
    kNOnTimeSubmissions,
    kNLateSubmissions,
    kAvgResourcesPerActiveDay,
    kAvgSubmissionsPerActiveDay,
    kRatioOnTime,
    kNResourceAccessLast7d,
    kNSubmissionsLast7d,
    kAvgForumPostLength,
    kMeanGapResourceAccess,
    kStdGapResourceAccess,
    kMeanGapSubmission,
    kStdGapSubmission,
    kTimeFirstEventToGrade,
    kTimeLastEventToGrade,
    kMeanLeadBeforeDeadline,
    kStdLeadBeforeDeadline,
};

const std::array<std::string_view, kNumFeatures>& feature_names();

using FeatureVector = Eigen::Matrix<double, kNumFeatures, 1>;

struct FeatureOptions {
    int64_t session_gap_ms = 30 * 60 * 1000;         // session break above this gap
    int64_t recent_window_ms = 168LL * 3600 * 1000;  // "last 7 days" lookback
};

// One prediction instance: everything known strictly before a grade event.
struct GradeSample {
    StudentId student;
    CourseId course;
    int64_t grade_timestamp_ms = 0;
    FeatureVector features = FeatureVector::Zero();
    double grade = 0.0;  // normalized, in [0, 1]
    int label = -1;      // 1 = worse than dataset average; -1 = unset
};

// points_awarded / points_possible. Preconditions: possible > 0 and
// 0 <= awarded <= possible.
double normalize_grade(double points_awarded, double points_possible);

// One sample per GradeReceived event carrying valid points fields. Every
// feature uses only events of the same course with a strictly earlier
// timestamp. Labels are left unset.
std::vector<GradeSample> extract_samples(const StudentTimeline& timeline,
                                         const FeatureOptions& options = {});

// label = 1 iff grade < dataset_average (strict).
void label_samples(std::vector<GradeSample>& samples, double dataset_average);

double mean_grade(const std::vector<GradeSample>& samples);

// Featurized dataset in matrix form. Rows follow the sample order the
// extractor produced (students ascending, then course, then grade time).
struct Dataset {
    Eigen::MatrixXd features;           // n x d, column-major
    Eigen::VectorXi labels;             // n
    Eigen::VectorXd grades;             // n
    std::vector<StudentId> students;    // n
    std::vector<CourseId> courses;      // n
    std::vector<int64_t> grade_times;   // n
    std::vector<std::string> names;     // d feature names
    double average_grade = 0.0;         // labeling threshold

    Eigen::Index rows() const { return features.rows(); }
    Eigen::Index cols() const { return features.cols(); }

    // Copy with one feature column removed (backward feature selection).
    Dataset without_feature(Eigen::Index column) const;
};

Dataset assemble_dataset(const std::vector<GradeSample>& samples);

// Per-feature z-score parameters fitted on a training set. Zero-variance
// features scale to 0.
struct Scaler {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd stddev;      // population std
    Eigen::RowVectorXd inv_stddev;  // 0 where stddev == 0

    bool operator==(const Scaler& other) const {
        return mean.size() == other.mean.size() && (mean.array() == other.mean.array()).all() &&
               (stddev.array() == other.stddev.array()).all();
    }
};

Scaler fit_scaler(const Eigen::Ref<const Eigen::MatrixXd>& train);
Eigen::MatrixXd apply_scaler(const Scaler& scaler, const Eigen::Ref<const Eigen::MatrixXd>& x);

void write_dataset_csv(std::ostream& out, const Dataset& dataset);
Dataset read_dataset_csv(std::istream& in);

}  // namespace fairgrade
