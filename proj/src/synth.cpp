#include "fairgrade/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fairgrade/event_log.hpp"
#include "fairgrade/parallel.hpp"
#include "fairgrade/rng.hpp"

namespace fairgrade {

namespace {

// 2021-08-26T00:00:00Z, the first day of a semester-length window.
constexpr int64_t kSemesterStartMs = 1629936000000LL;
constexpr int64_t kMsPerHour = 3600LL * 1000;
constexpr int64_t kMsPerDay = 24 * kMsPerHour;

constexpr uint32_t kFirstStudentId = 10000;
constexpr uint32_t kFirstCourseId = 50000;

// Generative constants. Skill enters event intensity through an exponential
// link and grades through a logistic link; both are strictly increasing.
// A per-(student, course) engagement factor modulates both the course's
// activity volume and its grades, so behaviour observed in the log carries
// grade signal beyond the student's overall skill.
constexpr double kIntensityBeta = 0.8;
constexpr double kGradeBase = 1.15;
constexpr double kGradeSkillSlope = 0.3;
constexpr double kEngagementSd = 0.7;
// Grades respond to the student's observable activity level in the course
// (the skill-times-engagement composite that the log actually shows), in
// regimes rather than linearly: clearly active courses are graded a band
// better, neglected ones a band worse. Late submissions take a flat
// penalty. Cramming (activity packed into the week before deadlines) only
// hurts when course activity is low, and an organized submission style
// only pays off in courses the student is active in.
constexpr double kActivityBand = 0.5;
constexpr double kActivityHighCut = 0.35;
constexpr double kActivityLowCut = -0.35;
constexpr double kLatePenalty = 1.0;
constexpr double kCramRate = 0.4;
constexpr double kCramPenalty = 2.0;
// Submission timing style: how far before deadlines a student works.
// Panic submissions (late) and fire-and-forget ones (very early) both
// hurt; being organized pays off most in courses the student actually
// engages with.
constexpr double kLeadBaseHours = 28.0;
constexpr double kLeadStyleScale = 0.8;
constexpr double kLeadShiftHours = -12.0;
constexpr double kLeadSdHours = 16.0;
constexpr double kFarEarlyCutHours = 60.0;
constexpr double kFarEarlyPenalty = 1.0;
constexpr double kOrganizedEngagedBonus = 2.0;
constexpr double kOrganizedStyleCut = 0.2;
constexpr double kEngagedCut = 0.2;
constexpr double kGradeNoiseScale = 0.75;
constexpr double kSubmitBase = 1.4;
constexpr double kSubmitSkillSlope = 0.7;
constexpr double kAssignmentDifficultySd = 0.3;

// Nominal per-student graded-event expectation used to translate
// events_per_student_mean into an activity budget.
constexpr double kExpectedCoursesPerStudent = 5.0;
constexpr double kExpectedAssignmentsPerCourse = 12.0;
constexpr double kNominalSubmitRate = 0.80;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct AssignmentPlan {
    int64_t due_ms = 0;
    EventKind kind = EventKind::AssignmentSubmit;
    double points_possible = 10.0;
    double difficulty = 0.0;
    std::string object_id;
};

struct CoursePlan {
    CourseId course;
    std::vector<AssignmentPlan> assignments;
};

// Course properties are shared by every enrolled student, so they derive
// from the course index alone.
CoursePlan make_course_plan(uint64_t seed, uint32_t course_index, int semester_days) {
    Rng rng(substream(seed, "course", course_index));
    CoursePlan plan;
    plan.course = CourseId(kFirstCourseId + course_index);
    const int n_assignments = static_cast<int>(10 + rng.uniform_index(5));  // 10..14
    const double span_ms = static_cast<double>(semester_days) * static_cast<double>(kMsPerDay);
    for (int a = 0; a < n_assignments; ++a) {
        AssignmentPlan assignment;
        const double center = (static_cast<double>(a) + 0.5 + rng.uniform(-0.25, 0.25)) /
                              static_cast<double>(n_assignments);
        assignment.due_ms =
            kSemesterStartMs + static_cast<int64_t>(std::max(0.02, std::min(0.995, center)) * span_ms);
        assignment.kind =
            rng.uniform() < 0.6 ? EventKind::AssignmentSubmit : EventKind::QuizSubmit;
        const std::array<double, 5> scales = {10.0, 20.0, 25.0, 50.0, 100.0};
        assignment.points_possible = scales[rng.uniform_index(scales.size())];
        assignment.difficulty = rng.normal(0.0, kAssignmentDifficultySd);
        assignment.object_id =
            "asn_" + plan.course.str() + "_" + std::to_string(a);
        plan.assignments.push_back(std::move(assignment));
    }
    return plan;
}

struct StudentGen {
    StudentTruth truth;
    std::vector<Event> events;       // generation order
    std::vector<LocationRecord> locations;
};

std::vector<RegionCode> cluster_codes(RegionCluster cluster) {
    std::vector<RegionCode> codes;
    for (RegionCode code : all_region_codes()) {
        if (cluster_region(code) == cluster) codes.push_back(code);
    }
    return codes;
}

// Largest-remainder allocation of students to clusters, deterministic in
// enum order.
std::vector<RegionCluster> allocate_clusters(const CohortConfig& config) {
    double total_weight = 0.0;
    for (const auto& [cluster, weight] : config.region_weights) total_weight += weight;

    const int n = config.n_students;
    std::array<double, kNumClusters> weight{};
    for (const auto& [cluster, w] : config.region_weights)
        weight[static_cast<size_t>(cluster)] = w;

    std::array<int, kNumClusters> quota{};
    std::array<double, kNumClusters> remainder{};
    int assigned = 0;
    for (size_t c = 0; c < kNumClusters; ++c) {
        const double exact = static_cast<double>(n) * weight[c] / total_weight;
        quota[c] = static_cast<int>(std::floor(exact));
        remainder[c] = exact - std::floor(exact);
        assigned += quota[c];
    }
    while (assigned < n) {
        size_t best = 0;
        for (size_t c = 1; c < kNumClusters; ++c) {
            if (remainder[c] > remainder[best]) best = c;
        }
        ++quota[best];
        remainder[best] = -1.0;
        ++assigned;
    }

    std::vector<RegionCluster> clusters;
    clusters.reserve(static_cast<size_t>(n));
    for (size_t c = 0; c < kNumClusters; ++c) {
        clusters.insert(clusters.end(), static_cast<size_t>(quota[c]), static_cast<RegionCluster>(c));
    }
    Rng rng(substream(config.seed, "clusters"));
    for (size_t i = clusters.size(); i > 1; --i) {
        std::swap(clusters[i - 1], clusters[rng.uniform_index(i)]);
    }
    return clusters;
}

std::vector<bool> allocate_missing_location(const CohortConfig& config) {
    const int n = config.n_students;
    const int missing = static_cast<int>(std::lround(config.missing_location_rate * n));
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    Rng rng(substream(config.seed, "nolocation"));
    for (size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.uniform_index(i)]);
    }
    std::vector<bool> is_missing(static_cast<size_t>(n), false);
    for (int i = 0; i < missing; ++i) is_missing[static_cast<size_t>(order[static_cast<size_t>(i)])] = true;
    return is_missing;
}

StudentGen generate_student(const CohortConfig& config, int index, RegionCluster cluster,
                            bool missing_location, uint32_t course_pool,
                            const std::vector<CoursePlan>& plans) {
    Rng rng(substream(config.seed, "student", static_cast<uint64_t>(index)));
    StudentGen gen;
    gen.truth.student = StudentId(kFirstStudentId + static_cast<uint32_t>(index));
    gen.truth.cluster = cluster;
    gen.truth.has_location = !missing_location;
    gen.truth.skill = rng.normal();
    const double skill = gen.truth.skill;

    // Enrollment: 4..6 distinct courses, capped by the pool.
    const int n_courses =
        std::min(static_cast<int>(4 + rng.uniform_index(3)), static_cast<int>(course_pool));
    std::vector<uint32_t> courses;
    while (static_cast<int>(courses.size()) < n_courses) {
        const uint32_t c = static_cast<uint32_t>(rng.uniform_index(course_pool));
        if (std::find(courses.begin(), courses.end(), c) == courses.end()) courses.push_back(c);
    }

    const bool crammer = rng.bernoulli(kCramRate);
    const double lead_style = rng.normal();
    const bool organized = lead_style > kOrganizedStyleCut;

    // Per-course engagement: log-normal, mean-one after correction.
    std::vector<double> engagement_log(courses.size());
    std::vector<double> course_weight(courses.size());
    double weight_sum = 0.0;
    for (size_t c = 0; c < courses.size(); ++c) {
        engagement_log[c] = rng.normal(0.0, kEngagementSd);
        course_weight[c] = std::exp(engagement_log[c] - kEngagementSd * kEngagementSd / 2.0);
        weight_sum += course_weight[c];
    }

    // Behavioural mix: how the student's activity splits across resource
    // access, uploads, edits and forum posts varies per course.
    std::vector<std::array<double, 4>> kind_cumulative(courses.size());
    {
        const std::array<double, 4> base_share = {0.74, 0.08, 0.05, 0.13};
        for (size_t c = 0; c < courses.size(); ++c) {
            std::array<double, 4> share{};
            double total = 0.0;
            for (size_t k = 0; k < 4; ++k) {
                share[k] = base_share[k] * std::exp(rng.normal(0.0, 0.55));
                total += share[k];
            }
            double acc = 0.0;
            for (size_t k = 0; k < 4; ++k) {
                acc += share[k] / total;
                kind_cumulative[c][k] = acc;
            }
        }
    }

    const int64_t span_ms = static_cast<int64_t>(config.semester_days) * kMsPerDay;
    auto uniform_ts = [&]() {
        return kSemesterStartMs + static_cast<int64_t>(rng.uniform() * static_cast<double>(span_ms));
    };

    // Submissions and grades per planned assignment.
    for (size_t course_slot = 0; course_slot < courses.size(); ++course_slot) {
        const CoursePlan& plan = plans[courses[course_slot]];
        const double eng_log = engagement_log[course_slot];
        for (const AssignmentPlan& assignment : plan.assignments) {
            const double p_submit = sigmoid(kSubmitBase + kSubmitSkillSlope * skill);
            if (!rng.bernoulli(p_submit)) {
                rng.normal();  // keep the draw count fixed across outcomes
                rng.normal();
                rng.uniform();
                continue;
            }
            const double lead_hours =
                rng.normal(kLeadBaseHours * std::exp(kLeadStyleScale * lead_style) + kLeadShiftHours,
                           kLeadSdHours);
            int64_t submit_ts =
                assignment.due_ms - static_cast<int64_t>(lead_hours * static_cast<double>(kMsPerHour));
            submit_ts = std::max(submit_ts, kSemesterStartMs);
            submit_ts = std::min(submit_ts, assignment.due_ms + 72 * kMsPerHour);

            Event submit;
            submit.student = gen.truth.student;
            submit.course = plan.course;
            submit.timestamp_ms = submit_ts;
            submit.kind = assignment.kind;
            submit.object_id = assignment.object_id;
            submit.due_timestamp_ms = assignment.due_ms;
            gen.events.push_back(std::move(submit));

            const double noise = rng.normal(0.0, kGradeNoiseScale * config.skill_noise);
            const bool late = submit_ts > assignment.due_ms;
            const double activity = kIntensityBeta * skill + eng_log;
            double base_logit =
                kGradeBase + kGradeSkillSlope * skill - assignment.difficulty;
            if (activity > kActivityHighCut) base_logit += kActivityBand;
            if (activity < kActivityLowCut) base_logit -= kActivityBand;
            if (late) base_logit -= kLatePenalty;
            if (lead_hours > kFarEarlyCutHours) base_logit -= kFarEarlyPenalty;
            if (organized && activity > kEngagedCut) base_logit += kOrganizedEngagedBonus;
            if (crammer && activity <= 0.0) base_logit -= kCramPenalty;
            const double true_p = sigmoid(base_logit);
            const double noisy_grade = sigmoid(base_logit + noise);
            const double awarded =
                std::round(noisy_grade * assignment.points_possible);

            Event grade;
            grade.student = gen.truth.student;
            grade.course = plan.course;
            grade.timestamp_ms = std::max(assignment.due_ms, submit_ts) +
                                 static_cast<int64_t>(rng.uniform(6.0, 72.0) * static_cast<double>(kMsPerHour));
            grade.kind = EventKind::GradeReceived;
            grade.object_id = assignment.object_id;
            grade.points_awarded = awarded;
            grade.points_possible = assignment.points_possible;
            gen.events.push_back(std::move(grade));

            gen.truth.grades.push_back(GradeTruth{plan.course, grade.timestamp_ms, true_p});
        }
    }

    // Activity events: Poisson with a log-rate affine in skill, normalized so
    // the population mean stays at the configured budget.
    const double graded_budget = kExpectedCoursesPerStudent * kExpectedAssignmentsPerCourse *
                                 kNominalSubmitRate * 2.0;  // submit + grade
    const double activity_mean = std::max(config.events_per_student_mean - graded_budget, 4.0);
    const double intensity =
        std::exp(kIntensityBeta * skill - kIntensityBeta * kIntensityBeta / 2.0);
    const uint64_t n_activity = rng.poisson(activity_mean * intensity);

    for (uint64_t e = 0; e < n_activity; ++e) {
        // Course picked proportionally to its engagement weight.
        double pick = rng.uniform() * weight_sum;
        size_t slot = 0;
        while (slot + 1 < courses.size() && pick >= course_weight[slot]) {
            pick -= course_weight[slot];
            ++slot;
        }
        const CoursePlan& plan = plans[courses[slot]];
        const std::array<double, 4>& mix = kind_cumulative[slot];
        Event event;
        event.student = gen.truth.student;
        event.course = plan.course;
        if (crammer) {
            const AssignmentPlan& around =
                plan.assignments[rng.uniform_index(plan.assignments.size())];
            const int64_t offset =
                static_cast<int64_t>(rng.uniform() * 7.0 * static_cast<double>(kMsPerDay));
            event.timestamp_ms = std::max(kSemesterStartMs + 1, around.due_ms - offset);
        } else {
            event.timestamp_ms = uniform_ts();
        }
        const double kind_draw = rng.uniform();
        if (kind_draw < mix[0]) {
            event.kind = EventKind::ResourceAccess;
            event.object_id = "res_" + plan.course.str() + "_" +
                              std::to_string(rng.uniform_index(30));
        } else if (kind_draw < mix[1]) {
            event.kind = EventKind::FileUpload;
            event.object_id = "file_" + std::to_string(rng.uniform_index(1000));
        } else if (kind_draw < mix[2]) {
            event.kind = EventKind::FileEdit;
            event.object_id = "file_" + std::to_string(rng.uniform_index(1000));
        } else {
            event.kind = EventKind::ForumPost;
            event.object_id = "thread_" + std::to_string(rng.uniform_index(50));
            const double log_len = 3.4 + 0.9 * rng.normal() + 0.15 * skill;
            const double len = std::round(std::exp(std::min(log_len, 9.9)));
            event.text_length = static_cast<uint32_t>(std::max(1.0, len));
        }
        gen.events.push_back(std::move(event));
    }

    // Every student sees every kind at least once.
    std::array<bool, kNumEventKinds> seen{};
    for (const Event& event : gen.events) seen[static_cast<size_t>(event.kind)] = true;
    for (int kind_index = 0; kind_index < kNumEventKinds; ++kind_index) {
        if (seen[static_cast<size_t>(kind_index)]) continue;
        const EventKind kind = static_cast<EventKind>(kind_index);
        const CoursePlan& plan = plans[courses.front()];
        Event event;
        event.student = gen.truth.student;
        event.course = plan.course;
        event.timestamp_ms = uniform_ts();
        event.kind = kind;
        event.object_id = "forced_" + std::to_string(kind_index);
        if (kind == EventKind::ForumPost) event.text_length = 40;
        if (kind == EventKind::GradeReceived) {
            const double noise = rng.normal(0.0, kGradeNoiseScale * config.skill_noise);
            const double activity = kIntensityBeta * skill + engagement_log[0];
            double base_logit = kGradeBase + kGradeSkillSlope * skill;
            if (activity > kActivityHighCut) base_logit += kActivityBand;
            if (activity < kActivityLowCut) base_logit -= kActivityBand;
            event.points_possible = 10.0;
            event.points_awarded = std::round(sigmoid(base_logit + noise) * 10.0);
            gen.truth.grades.push_back(
                GradeTruth{plan.course, event.timestamp_ms, sigmoid(base_logit)});
        }
        gen.events.push_back(std::move(event));
    }

    // Connection observations. The second region follows the same cluster
    // weights, and its rows are capped to a strict minority so the majority
    // rule always recovers the home region.
    if (!missing_location) {
        const std::vector<RegionCode> home_codes = cluster_codes(cluster);
        const RegionCode home = home_codes[rng.uniform_index(home_codes.size())];

        double total_weight = 0.0;
        for (const auto& [cl, w] : config.region_weights) total_weight += w;
        double pick = rng.uniform() * total_weight;
        RegionCluster second_cluster = cluster;
        for (const auto& [cl, w] : config.region_weights) {
            if (pick < w) {
                second_cluster = cl;
                break;
            }
            pick -= w;
        }
        const std::vector<RegionCode> second_codes = cluster_codes(second_cluster);
        const RegionCode second = second_codes[rng.uniform_index(second_codes.size())];

        const int n_connections = static_cast<int>(6 + rng.uniform_index(10));
        int second_rows = 0;
        for (int i = 0; i < n_connections; ++i) {
            if (rng.bernoulli(config.second_region_rate)) ++second_rows;
        }
        second_rows = std::min(second_rows, (n_connections - 1) / 2);
        if (second == home) second_rows = 0;
        for (int i = 0; i < n_connections - second_rows; ++i)
            gen.locations.push_back(LocationRecord{gen.truth.student, home});
        for (int i = 0; i < second_rows; ++i)
            gen.locations.push_back(LocationRecord{gen.truth.student, second});
    }

    return gen;
}

// Mean normalized grade over every grade event in the cohort.
double dataset_average_grade(const std::vector<StudentGen>& students) {
    double sum = 0.0;
    int64_t count = 0;
    for (const StudentGen& gen : students) {
        for (const Event& event : gen.events) {
            if (event.kind != EventKind::GradeReceived) continue;
            sum += *event.points_awarded / *event.points_possible;
            ++count;
        }
    }
    return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

// Replaces a grade with a uniformly drawn score from the other side of the
// dataset-average threshold. Returns false when no awardable point value
// lies on that side.
bool flip_grade(Event& event, double average, Rng& rng) {
    const double possible = *event.points_possible;
    const double grade = *event.points_awarded / possible;
    const double cut = average * possible;
    if (grade < average) {
        const int64_t lo = static_cast<int64_t>(std::floor(cut)) + 1;
        const int64_t hi = static_cast<int64_t>(possible);
        if (lo > hi) return false;
        event.points_awarded = static_cast<double>(rng.uniform_int(lo, hi));
    } else {
        int64_t hi = static_cast<int64_t>(std::ceil(cut)) - 1;
        if (std::ceil(cut) == cut) hi = static_cast<int64_t>(cut) - 1;
        if (hi < 0) return false;
        event.points_awarded = static_cast<double>(rng.uniform_int(0, hi));
    }
    return true;
}

void apply_label_noise(const CohortConfig& config, std::vector<StudentGen>& students) {
    const BiasSpec& bias = *config.bias;
    const double average = dataset_average_grade(students);
    for (size_t i = 0; i < students.size(); ++i) {
        StudentGen& gen = students[i];
        if (gen.truth.cluster != bias.target_cluster) continue;
        uint64_t grade_seq = 0;
        for (Event& event : gen.events) {
            if (event.kind != EventKind::GradeReceived) continue;
            const uint64_t seq = grade_seq++;
            // One flip coin per grade, independent of strength, so flip sets
            // nest as strength grows.
            Rng coin(substream(config.seed, "flip-coin", i, seq));
            if (coin.uniform() >= bias.strength) continue;
            Rng value(substream(config.seed, "flip-value", i, seq));
            flip_grade(event, average, value);
        }
    }
}

void apply_feature_attenuation(const CohortConfig& config, std::vector<StudentGen>& students) {
    const BiasSpec& bias = *config.bias;
    for (size_t i = 0; i < students.size(); ++i) {
        StudentGen& gen = students[i];
        if (gen.truth.cluster != bias.target_cluster) continue;
        std::vector<Event> kept;
        kept.reserve(gen.events.size());
        uint64_t event_seq = 0;
        for (Event& event : gen.events) {
            if (event.kind == EventKind::GradeReceived) {
                kept.push_back(std::move(event));
                continue;
            }
            const uint64_t seq = event_seq++;
            Rng coin(substream(config.seed, "atten-coin", i, seq));
            if (coin.uniform() < bias.strength) continue;  // thinned out
            kept.push_back(std::move(event));
        }
        gen.events = std::move(kept);
    }
}

bool event_less(const Event& a, const Event& b) {
    auto key = [](const Event& e) {
        return std::make_tuple(e.timestamp_ms, e.student.value, e.course.value,
                               static_cast<int>(e.kind), e.object_id,
                               e.text_length ? static_cast<int64_t>(*e.text_length) : -1,
                               e.due_timestamp_ms.value_or(-1),
                               e.points_awarded.value_or(-1.0), e.points_possible.value_or(-1.0));
    };
    return key(a) < key(b);
}

}  // namespace

std::string_view bias_mode_name(BiasMode mode) {
    return mode == BiasMode::LabelNoise ? "label_noise" : "feature_attenuation";
}

std::optional<BiasMode> parse_bias_mode(std::string_view text) {
    if (text == "label_noise") return BiasMode::LabelNoise;
    if (text == "feature_attenuation") return BiasMode::FeatureAttenuation;
    return std::nullopt;
}

void CohortConfig::validate() const {
    if (n_students < 1) throw ConfigError("synth: n_students must be positive");
    if (n_students > 89999) throw ConfigError("synth: n_students exceeds the 5-digit id space");
    if (region_weights.empty()) throw ConfigError("synth: region_weights must not be empty");
    double total = 0.0;
    for (const auto& [cluster, weight] : region_weights) {
        if (weight < 0.0) throw ConfigError("synth: region weight must be non-negative");
        total += weight;
    }
    if (!(total > 0.0)) throw ConfigError("synth: region weights must sum to > 0");
    if (semester_days < 1) throw ConfigError("synth: semester_days must be positive");
    if (!(events_per_student_mean > 0.0))
        throw ConfigError("synth: events_per_student_mean must be positive");
    if (skill_noise < 0.0) throw ConfigError("synth: skill_noise must be non-negative");
    if (bias && !(bias->strength >= 0.0 && bias->strength <= 1.0))
        throw ConfigError("synth: bias strength must be in [0, 1]");
    if (missing_location_rate < 0.0 || missing_location_rate > 1.0)
        throw ConfigError("synth: missing_location_rate must be in [0, 1]");
    if (second_region_rate < 0.0 || second_region_rate > 1.0)
        throw ConfigError("synth: second_region_rate must be in [0, 1]");
}

Cohort generate_cohort(const CohortConfig& config, int workers) {
    config.validate();

    const std::vector<RegionCluster> clusters = allocate_clusters(config);
    const std::vector<bool> missing = allocate_missing_location(config);

    const uint32_t course_pool =
        static_cast<uint32_t>(std::max(4, config.n_students / 25));
    std::vector<CoursePlan> plans;
    plans.reserve(course_pool);
    for (uint32_t c = 0; c < course_pool; ++c)
        plans.push_back(make_course_plan(config.seed, c, config.semester_days));

    std::vector<StudentGen> students(static_cast<size_t>(config.n_students));
    parallel_for(students.size(), workers, [&](size_t i) {
        students[i] = generate_student(config, static_cast<int>(i), clusters[i], missing[i],
                                       course_pool, plans);
    });

    if (config.bias) {
        if (config.bias->mode == BiasMode::LabelNoise)
            apply_label_noise(config, students);
        else
            apply_feature_attenuation(config, students);
    }

    Cohort cohort;
    size_t total_events = 0;
    for (const StudentGen& gen : students) total_events += gen.events.size();
    cohort.events.reserve(total_events);
    for (StudentGen& gen : students) {
        for (Event& event : gen.events) cohort.events.push_back(std::move(event));
        for (const LocationRecord& record : gen.locations) cohort.locations.push_back(record);
        cohort.truth.students.push_back(std::move(gen.truth));
    }
    std::sort(cohort.events.begin(), cohort.events.end(), event_less);
    return cohort;
}

CohortFiles emit_cohort(const Cohort& cohort, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    CohortFiles files;
    files.events_csv = (fs::path(out_dir) / "events.csv").string();
    files.locations_csv = (fs::path(out_dir) / "locations.csv").string();
    files.truth_json = (fs::path(out_dir) / "truth.json").string();

    {
        std::ofstream out(files.events_csv, std::ios::binary);
        if (!out) throw std::runtime_error("emit_cohort: cannot write " + files.events_csv);
        write_events_csv(out, cohort.events);
    }
    {
        std::ofstream out(files.locations_csv, std::ios::binary);
        if (!out) throw std::runtime_error("emit_cohort: cannot write " + files.locations_csv);
        write_locations_csv(out, cohort.locations);
    }
    {
        nlohmann::json root;
        root["students"] = nlohmann::json::array();
        for (const StudentTruth& truth : cohort.truth.students) {
            nlohmann::json student;
            student["student_id"] = truth.student.str();
            student["skill"] = truth.skill;
            student["cluster"] = std::string(cluster_name(truth.cluster));
            student["has_location"] = truth.has_location;
            student["grades"] = nlohmann::json::array();
            for (const GradeTruth& grade : truth.grades) {
                student["grades"].push_back({{"course_id", grade.course.str()},
                                             {"grade_timestamp_ms", grade.grade_timestamp_ms},
                                             {"true_success_probability",
                                              grade.true_success_probability}});
            }
            root["students"].push_back(std::move(student));
        }
        std::ofstream out(files.truth_json, std::ios::binary);
        if (!out) throw std::runtime_error("emit_cohort: cannot write " + files.truth_json);
        out << root.dump(2) << '\n';
    }
    return files;
}

}  // namespace fairgrade
