#include "fairgrade/features.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <unordered_set>

#include "fairgrade/csv.hpp"
#include "fairgrade/event_log.hpp"

namespace fairgrade {

namespace {

constexpr double kMsPerHour = 3600.0 * 1000.0;
constexpr int64_t kMsPerDay = 86400LL * 1000;

// Running mean/std over a stream of values. Population standard deviation;
// fewer than one value yields 0 for both.
struct RunningStats {
    int64_t count = 0;
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double v) {
        ++count;
        sum += v;
        sum_sq += v * v;
    }

    double mean() const { return count > 0 ? sum / static_cast<double>(count) : 0.0; }

    double stddev() const {
        if (count == 0) return 0.0;
        const double m = mean();
        const double var = sum_sq / static_cast<double>(count) - m * m;
        return var > 0.0 ? std::sqrt(var) : 0.0;
    }
};

// All aggregates over the events seen so far in one course, folded in
// timestamp-group order so every value reflects strictly earlier events.
struct CourseAccumulator {
    int64_t counts[kNumEventKinds] = {};
    std::unordered_set<std::string> distinct_resources;
    std::unordered_set<int64_t> active_days;
    int64_t sessions = 0;
    int64_t last_event_ts = 0;
    int64_t first_event_ts = 0;
    bool any_event = false;
    int64_t forum_min100 = 0;
    int64_t on_time = 0;
    int64_t late = 0;
    double forum_length_sum = 0.0;
    RunningStats resource_gaps_h;
    RunningStats submission_gaps_h;
    RunningStats lead_h;
    int64_t last_resource_ts = 0;
    bool any_resource = false;
    int64_t last_submission_ts = 0;
    bool any_submission = false;
    std::deque<int64_t> recent_resource_ts;
    std::deque<int64_t> recent_submission_ts;
    int64_t session_gap_ms;

    explicit CourseAccumulator(int64_t gap_ms) : session_gap_ms(gap_ms) {}

    void fold(const Event& e) {
        ++counts[static_cast<size_t>(e.kind)];
        active_days.insert(e.timestamp_ms / kMsPerDay);
        if (!any_event) {
            any_event = true;
            first_event_ts = e.timestamp_ms;
            sessions = 1;
        } else if (e.timestamp_ms - last_event_ts > session_gap_ms) {
            ++sessions;
        }
        last_event_ts = e.timestamp_ms;

        switch (e.kind) {
            case EventKind::ResourceAccess:
                distinct_resources.insert(e.object_id);
                if (any_resource)
                    resource_gaps_h.add(static_cast<double>(e.timestamp_ms - last_resource_ts) / kMsPerHour);
                any_resource = true;
                last_resource_ts = e.timestamp_ms;
                recent_resource_ts.push_back(e.timestamp_ms);
                break;
            case EventKind::ForumPost:
                if (e.text_length) {
                    if (*e.text_length >= 100) ++forum_min100;
                    forum_length_sum += static_cast<double>(*e.text_length);
                }
                break;
            case EventKind::AssignmentSubmit:
            case EventKind::QuizSubmit: {
                if (any_submission)
                    submission_gaps_h.add(static_cast<double>(e.timestamp_ms - last_submission_ts) / kMsPerHour);
                any_submission = true;
                last_submission_ts = e.timestamp_ms;
                recent_submission_ts.push_back(e.timestamp_ms);
                const bool late_sub = e.due_timestamp_ms && e.timestamp_ms > *e.due_timestamp_ms;
                if (late_sub)
                    ++late;
                else
                    ++on_time;
                if (e.due_timestamp_ms)
                    lead_h.add(static_cast<double>(*e.due_timestamp_ms - e.timestamp_ms) / kMsPerHour);
                break;
            }
            default:
                break;
        }
    }

    FeatureVector snapshot(int64_t grade_ts, int64_t window_ms) {
        // Windows are half-open: [grade_ts - window, grade_ts).
        const int64_t cutoff = grade_ts - window_ms;
        while (!recent_resource_ts.empty() && recent_resource_ts.front() < cutoff)
            recent_resource_ts.pop_front();
        while (!recent_submission_ts.empty() && recent_submission_ts.front() < cutoff)
            recent_submission_ts.pop_front();

        FeatureVector f = FeatureVector::Zero();
        const auto count_of = [&](EventKind k) {
            return static_cast<double>(counts[static_cast<size_t>(k)]);
        };
        f[kNResourceAccess] = count_of(EventKind::ResourceAccess);
        f[kNFileUpload] = count_of(EventKind::FileUpload);
        f[kNFileEdit] = count_of(EventKind::FileEdit);
        f[kNForumPost] = count_of(EventKind::ForumPost);
        f[kNAssignmentSubmit] = count_of(EventKind::AssignmentSubmit);
        f[kNQuizSubmit] = count_of(EventKind::QuizSubmit);
        f[kNDistinctResources] = static_cast<double>(distinct_resources.size());
        f[kNActiveDays] = static_cast<double>(active_days.size());
        f[kNSessions] = static_cast<double>(sessions);
        f[kNPriorGrades] = count_of(EventKind::GradeReceived);

        f[kNForumPostMin100] = static_cast<double>(forum_min100);
        f[kNOnTimeSubmissions] = static_cast<double>(on_time);
        f[kNLateSubmissions] = static_cast<double>(late);
        const double n_days = f[kNActiveDays];
        const double n_submissions = f[kNAssignmentSubmit] + f[kNQuizSubmit];
        f[kAvgResourcesPerActiveDay] = n_days > 0 ? f[kNResourceAccess] / n_days : 0.0;
        f[kAvgSubmissionsPerActiveDay] = n_days > 0 ? n_submissions / n_days : 0.0;
        const double judged = static_cast<double>(on_time + late);
        f[kRatioOnTime] = judged > 0 ? static_cast<double>(on_time) / judged : 0.0;
        f[kNResourceAccessLast7d] = static_cast<double>(recent_resource_ts.size());
        f[kNSubmissionsLast7d] = static_cast<double>(recent_submission_ts.size());
        f[kAvgForumPostLength] =
            f[kNForumPost] > 0 ? forum_length_sum / f[kNForumPost] : 0.0;

        f[kMeanGapResourceAccess] = resource_gaps_h.mean();
        f[kStdGapResourceAccess] = resource_gaps_h.stddev();
        f[kMeanGapSubmission] = submission_gaps_h.mean();
        f[kStdGapSubmission] = submission_gaps_h.stddev();
        f[kTimeFirstEventToGrade] =
            any_event ? static_cast<double>(grade_ts - first_event_ts) / kMsPerHour : 0.0;
        f[kTimeLastEventToGrade] =
            any_event ? static_cast<double>(grade_ts - last_event_ts) / kMsPerHour : 0.0;
        f[kMeanLeadBeforeDeadline] = lead_h.mean();
        f[kStdLeadBeforeDeadline] = lead_h.stddev();
        return f;
    }
};

}  // namespace

const std::array<std::string_view, kNumFeatures>& feature_names() {
    static const std::array<std::string_view, kNumFeatures> names = {
        "n_resource_access",
        "n_file_upload",
        "n_file_edit",
        "n_forum_post",
        "n_assignment_submit",
        "n_quiz_submit",
        "n_distinct_resources",
        "n_active_days",
        "n_sessions",
        "n_prior_grades",
        "n_forum_post_min100",
        "n_on_time_submissions",
        "n_late_submissions",
        "avg_resources_per_active_day",
        "avg_submissions_per_active_day",
        "ratio_on_time",
        "n_resource_access_last7d",
        "n_submissions_last7d",
        "avg_forum_post_length",
        "mean_gap_resource_access",
        "std_gap_resource_access",
        "mean_gap_submission",
        "std_gap_submission",
        "time_first_event_to_grade",
        "time_last_event_to_grade",
        "mean_lead_before_deadline",
        "std_lead_before_deadline",
    };
    return names;
}

double normalize_grade(double points_awarded, double points_possible) {
    if (points_possible <= 0.0)
        throw std::invalid_argument("normalize_grade: points_possible must be > 0");
    if (points_awarded < 0.0 || points_awarded > points_possible)
        throw std::invalid_argument("normalize_grade: awarded outside [0, possible]");
    return points_awarded / points_possible;
}

std::vector<GradeSample> extract_samples(const StudentTimeline& timeline,
                                         const FeatureOptions& options) {
    std::vector<GradeSample> samples;
    for (const CourseEvents& course : timeline.courses) {
        CourseAccumulator acc(options.session_gap_ms);
        const std::vector<Event>& events = course.events;
        size_t i = 0;
        // Events sharing a timestamp fold in together after any grades at
        // that timestamp are emitted, so features cover strictly earlier
        // events only.
        while (i < events.size()) {
            size_t j = i;
            while (j < events.size() && events[j].timestamp_ms == events[i].timestamp_ms) ++j;
            for (size_t t = i; t < j; ++t) {
                const Event& e = events[t];
                if (e.kind != EventKind::GradeReceived) continue;
                if (!e.points_awarded || !e.points_possible || *e.points_possible <= 0.0 ||
                    *e.points_awarded < 0.0 || *e.points_awarded > *e.points_possible)
                    continue;
                GradeSample sample;
                sample.student = timeline.student;
                sample.course = course.course;
                sample.grade_timestamp_ms = e.timestamp_ms;
                sample.features = acc.snapshot(e.timestamp_ms, options.recent_window_ms);
                sample.grade = normalize_grade(*e.points_awarded, *e.points_possible);
                samples.push_back(std::move(sample));
            }
            for (size_t t = i; t < j; ++t) acc.fold(events[t]);
            i = j;
        }
    }
    return samples;
}

void label_samples(std::vector<GradeSample>& samples, double dataset_average) {
    for (GradeSample& s : samples) s.label = s.grade < dataset_average ? 1 : 0;
}

double mean_grade(const std::vector<GradeSample>& samples) {
    if (samples.empty()) return 0.0;
    double sum = 0.0;
    for (const GradeSample& s : samples) sum += s.grade;
    return sum / static_cast<double>(samples.size());
}

Dataset assemble_dataset(const std::vector<GradeSample>& samples) {
    Dataset ds;
    const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
    ds.features.resize(n, kNumFeatures);
    ds.labels.resize(n);
    ds.grades.resize(n);
    ds.students.reserve(samples.size());
    ds.courses.reserve(samples.size());
    ds.grade_times.reserve(samples.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const GradeSample& s = samples[static_cast<size_t>(i)];
        ds.features.row(i) = s.features.transpose();
        ds.labels[i] = s.label;
        ds.grades[i] = s.grade;
        ds.students.push_back(s.student);
        ds.courses.push_back(s.course);
        ds.grade_times.push_back(s.grade_timestamp_ms);
    }
    ds.names.assign(feature_names().begin(), feature_names().end());
    ds.average_grade = mean_grade(samples);
    return ds;
}

Dataset Dataset::without_feature(Eigen::Index column) const {
    if (column < 0 || column >= cols())
        throw std::out_of_range("without_feature: column out of range");
    Dataset out = *this;
    out.features.resize(rows(), cols() - 1);
    Eigen::Index dst = 0;
    for (Eigen::Index c = 0; c < cols(); ++c) {
        if (c == column) continue;
        out.features.col(dst++) = features.col(c);
    }
    out.names.erase(out.names.begin() + static_cast<ptrdiff_t>(column));
    return out;
}

Scaler fit_scaler(const Eigen::Ref<const Eigen::MatrixXd>& train) {
    if (train.rows() == 0) throw std::invalid_argument("fit_scaler: empty training set");
    Scaler scaler;
    const double n = static_cast<double>(train.rows());
    scaler.mean = train.colwise().sum() / n;
    Eigen::RowVectorXd var =
        (train.rowwise() - scaler.mean).array().square().colwise().sum() / n;
    scaler.stddev = var.array().max(0.0).sqrt();
    scaler.inv_stddev = scaler.stddev;
    for (Eigen::Index c = 0; c < scaler.stddev.size(); ++c) {
        scaler.inv_stddev[c] = scaler.stddev[c] > 0.0 ? 1.0 / scaler.stddev[c] : 0.0;
    }
    return scaler;
}

Eigen::MatrixXd apply_scaler(const Scaler& scaler, const Eigen::Ref<const Eigen::MatrixXd>& x) {
    if (x.cols() != scaler.mean.cols())
        throw std::invalid_argument("apply_scaler: feature count mismatch");
    return (x.rowwise() - scaler.mean).array().rowwise() * scaler.inv_stddev.array();
}

void write_dataset_csv(std::ostream& out, const Dataset& dataset) {
    out << "sample_id,student_id,course_id,grade_timestamp_ms";
    for (const auto& name : dataset.names) out << ',' << name;
    out << ",grade,label\n";
    for (Eigen::Index i = 0; i < dataset.rows(); ++i) {
        out << i << ',' << dataset.students[static_cast<size_t>(i)].str() << ','
            << dataset.courses[static_cast<size_t>(i)].str() << ','
            << dataset.grade_times[static_cast<size_t>(i)];
        for (Eigen::Index c = 0; c < dataset.cols(); ++c)
            out << ',' << format_double(dataset.features(i, c));
        out << ',' << format_double(dataset.grades[i]) << ',' << dataset.labels[i] << '\n';
    }
}

Dataset read_dataset_csv(std::istream& in) {
    CsvReader reader(in);
    std::vector<std::string> fields;
    if (!reader.next(fields)) throw DataError("dataset csv: missing header");
    if (fields.size() < 7) throw DataError("dataset csv: too few columns");
    const size_t d = fields.size() - 6;
    std::vector<std::string> names(fields.begin() + 4, fields.end() - 2);

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::vector<double> grades;
    std::vector<StudentId> students;
    std::vector<CourseId> courses;
    std::vector<int64_t> times;

    while (reader.next(fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != d + 6) throw DataError("dataset csv: bad field count");
        students.push_back(StudentId(static_cast<uint32_t>(std::stoul(fields[1]))));
        courses.push_back(CourseId(static_cast<uint32_t>(std::stoul(fields[2]))));
        times.push_back(std::stoll(fields[3]));
        std::vector<double> row(d);
        for (size_t c = 0; c < d; ++c) row[c] = std::strtod(fields[4 + c].c_str(), nullptr);
        rows.push_back(std::move(row));
        grades.push_back(std::strtod(fields[4 + d].c_str(), nullptr));
        labels.push_back(std::stoi(fields[5 + d]));
    }

    Dataset ds;
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    ds.features.resize(n, static_cast<Eigen::Index>(d));
    ds.labels.resize(n);
    ds.grades.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (size_t c = 0; c < d; ++c) ds.features(i, static_cast<Eigen::Index>(c)) = rows[static_cast<size_t>(i)][c];
        ds.labels[i] = labels[static_cast<size_t>(i)];
        ds.grades[i] = grades[static_cast<size_t>(i)];
    }
    ds.students = std::move(students);
    ds.courses = std::move(courses);
    ds.grade_times = std::move(times);
    ds.names = std::move(names);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) sum += ds.grades[i];
    ds.average_grade = n > 0 ? sum / static_cast<double>(n) : 0.0;
    return ds;
}

}  // namespace fairgrade
