#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fairgrade/event_log.hpp"
#include "fairgrade/features.hpp"
#include "fairgrade/synth.hpp"

using namespace fairgrade;

namespace {

CohortConfig small_config(uint64_t seed = 7) {
    CohortConfig config;
    config.n_students = 40;
    config.events_per_student_mean = 120;
    config.seed = seed;
    return config;
}

std::string events_csv_text(const Cohort& cohort) {
    std::ostringstream out;
    write_events_csv(out, cohort.events);
    return out.str();
}

std::map<StudentId, double> mean_grade_by_student(const Cohort& cohort) {
    std::map<StudentId, std::pair<double, int>> acc;
    for (const Event& e : cohort.events) {
        if (e.kind != EventKind::GradeReceived) continue;
        auto& entry = acc[e.student];
        entry.first += *e.points_awarded / *e.points_possible;
        entry.second += 1;
    }
    std::map<StudentId, double> out;
    for (const auto& [student, entry] : acc) out[student] = entry.first / entry.second;
    return out;
}

}  // namespace

TEST_CASE("generate_cohort: identical config twice gives byte-identical CSVs") {
    const CohortConfig config = small_config(7);
    const Cohort a = generate_cohort(config, 1);
    const Cohort b = generate_cohort(config, 1);
    CHECK(events_csv_text(a) == events_csv_text(b));
    CHECK(a.locations == b.locations);
}

TEST_CASE("generate_cohort: worker count does not change the output") {
    const CohortConfig config = small_config(11);
    const Cohort a = generate_cohort(config, 1);
    const Cohort b = generate_cohort(config, 4);
    CHECK(events_csv_text(a) == events_csv_text(b));
    CHECK(a.locations == b.locations);
}

TEST_CASE("generate_cohort: different seeds differ") {
    const Cohort a = generate_cohort(small_config(1), 1);
    const Cohort b = generate_cohort(small_config(2), 1);
    CHECK(events_csv_text(a) != events_csv_text(b));
}

TEST_CASE("generate_cohort: all weight on NCR means every location row is NCR") {
    CohortConfig config = small_config(3);
    config.region_weights = {{RegionCluster::NCR, 1.0}};
    config.missing_location_rate = 0.0;
    const Cohort cohort = generate_cohort(config, 1);
    CHECK(!cohort.locations.empty());
    for (const LocationRecord& record : cohort.locations) CHECK(record.region == RegionCode::NCR);
}

TEST_CASE("generate_cohort: every located student has rows, majority matches truth") {
    CohortConfig config = small_config(5);
    config.n_students = 1000;
    config.events_per_student_mean = 30;
    config.missing_location_rate = 0.0;
    const Cohort cohort = generate_cohort(config, 2);

    std::map<StudentId, std::vector<RegionCode>> rows;
    for (const LocationRecord& record : cohort.locations) rows[record.student].push_back(record.region);
    CHECK(rows.size() == 1000);

    for (const StudentTruth& truth : cohort.truth.students) {
        REQUIRE(rows.count(truth.student) == 1);
        // Majority region must land in the ground-truth cluster.
        std::map<RegionCode, int> counts;
        for (RegionCode code : rows[truth.student]) ++counts[code];
        RegionCode best = rows[truth.student][0];
        int best_count = 0;
        for (RegionCode code : all_region_codes()) {
            auto it = counts.find(code);
            if (it != counts.end() && it->second > best_count) {
                best = code;
                best_count = it->second;
            }
        }
        CHECK(cluster_region(best) == truth.cluster);
    }
}

TEST_CASE("generate_cohort: missing-location fraction is honored") {
    CohortConfig config = small_config(13);
    config.n_students = 400;
    config.missing_location_rate = 272.0 / 5986.0;
    const Cohort cohort = generate_cohort(config, 2);
    std::set<uint32_t> with_rows;
    for (const LocationRecord& record : cohort.locations) with_rows.insert(record.student.value);
    const int missing = 400 - static_cast<int>(with_rows.size());
    CHECK(missing == static_cast<int>(std::lround(272.0 / 5986.0 * 400)));
    int truth_missing = 0;
    for (const StudentTruth& truth : cohort.truth.students) truth_missing += !truth.has_location;
    CHECK(truth_missing == missing);
}

TEST_CASE("generate_cohort: every student sees every event kind") {
    const Cohort cohort = generate_cohort(small_config(17), 1);
    std::map<uint32_t, std::set<EventKind>> kinds;
    for (const Event& e : cohort.events) kinds[e.student.value].insert(e.kind);
    CHECK(kinds.size() == 40);
    for (const auto& [student, seen] : kinds) CHECK(seen.size() == kNumEventKinds);
}

TEST_CASE("generate_cohort: event intensity is monotone in skill (rank check)") {
    CohortConfig config = small_config(23);
    config.n_students = 300;
    const Cohort cohort = generate_cohort(config, 2);
    std::map<uint32_t, int64_t> counts;
    for (const Event& e : cohort.events) ++counts[e.student.value];

    // Correlation between skill and event count must be clearly positive.
    double mean_skill = 0, mean_count = 0;
    for (const StudentTruth& t : cohort.truth.students) {
        mean_skill += t.skill;
        mean_count += static_cast<double>(counts[t.student.value]);
    }
    mean_skill /= 300.0;
    mean_count /= 300.0;
    double cov = 0, var_s = 0, var_c = 0;
    for (const StudentTruth& t : cohort.truth.students) {
        const double ds = t.skill - mean_skill;
        const double dc = static_cast<double>(counts[t.student.value]) - mean_count;
        cov += ds * dc;
        var_s += ds * ds;
        var_c += dc * dc;
    }
    CHECK(cov / std::sqrt(var_s * var_c) > 0.5);
}

TEST_CASE("generate_cohort: skill correlates with mean normalized grade (calibration)") {
    CohortConfig config;
    config.n_students = 2000;
    config.events_per_student_mean = 80;
    config.seed = 20240601;
    const Cohort cohort = generate_cohort(config, 2);
    const auto grade_means = mean_grade_by_student(cohort);

    double mean_skill = 0, mean_grade = 0;
    int n = 0;
    for (const StudentTruth& t : cohort.truth.students) {
        auto it = grade_means.find(t.student);
        if (it == grade_means.end()) continue;
        mean_skill += t.skill;
        mean_grade += it->second;
        ++n;
    }
    mean_skill /= n;
    mean_grade /= n;
    double cov = 0, var_s = 0, var_g = 0;
    for (const StudentTruth& t : cohort.truth.students) {
        auto it = grade_means.find(t.student);
        if (it == grade_means.end()) continue;
        const double ds = t.skill - mean_skill;
        const double dg = it->second - mean_grade;
        cov += ds * dg;
        var_s += ds * ds;
        var_g += dg * dg;
    }
    const double corr = cov / std::sqrt(var_s * var_g);
    CHECK(corr > 0.5);
}

TEST_CASE("generate_cohort: no-bias symmetry across equally weighted clusters") {
    CohortConfig config;
    config.n_students = 2500;
    config.events_per_student_mean = 60;
    config.seed = 31;
    config.region_weights = {{RegionCluster::NCR, 1.0},
                             {RegionCluster::Luzon, 1.0},
                             {RegionCluster::Mindanao, 1.0},
                             {RegionCluster::Visayas, 1.0},
                             {RegionCluster::Abroad, 1.0}};
    const Cohort cohort = generate_cohort(config, 2);
    const auto grade_means = mean_grade_by_student(cohort);

    std::map<RegionCluster, std::vector<double>> by_cluster;
    for (const StudentTruth& t : cohort.truth.students) {
        auto it = grade_means.find(t.student);
        if (it != grade_means.end()) by_cluster[t.cluster].push_back(it->second);
    }
    REQUIRE(by_cluster.size() == kNumClusters);

    std::map<RegionCluster, double> mean;
    std::map<RegionCluster, double> sem;
    for (const auto& [cluster, grades] : by_cluster) {
        double m = 0;
        for (double g : grades) m += g;
        m /= static_cast<double>(grades.size());
        double var = 0;
        for (double g : grades) var += (g - m) * (g - m);
        var /= static_cast<double>(grades.size() - 1);
        mean[cluster] = m;
        sem[cluster] = std::sqrt(var / static_cast<double>(grades.size()));
    }
    for (const auto& [a, ma] : mean) {
        for (const auto& [b, mb] : mean) {
            const double gap = std::abs(ma - mb);
            const double scale = std::sqrt(sem.at(a) * sem.at(a) + sem.at(b) * sem.at(b));
            CHECK(gap < 3.0 * scale);
        }
    }
}

TEST_CASE("label noise: agreement with the no-noise counterfactual decreases in strength") {
    auto labels_under = [](const Cohort& cohort, double threshold) {
        // (student, course, ts) -> label, restricted to Visayas students.
        std::set<uint32_t> visayas;
        for (const StudentTruth& t : cohort.truth.students)
            if (t.cluster == RegionCluster::Visayas) visayas.insert(t.student.value);
        std::map<std::tuple<uint32_t, uint32_t, int64_t>, int> out;
        for (const Event& e : cohort.events) {
            if (e.kind != EventKind::GradeReceived) continue;
            if (!visayas.count(e.student.value)) continue;
            const double grade = *e.points_awarded / *e.points_possible;
            out[{e.student.value, e.course.value, e.timestamp_ms}] = grade < threshold ? 1 : 0;
        }
        return out;
    };

    CohortConfig base;
    base.n_students = 600;
    base.events_per_student_mean = 60;
    base.seed = 99;
    base.region_weights = {{RegionCluster::NCR, 2.0}, {RegionCluster::Visayas, 1.0}};

    const Cohort clean = generate_cohort(base, 2);
    double threshold = 0.0;
    {
        double sum = 0;
        int64_t n = 0;
        for (const Event& e : clean.events) {
            if (e.kind != EventKind::GradeReceived) continue;
            sum += *e.points_awarded / *e.points_possible;
            ++n;
        }
        threshold = sum / static_cast<double>(n);
    }
    const auto reference = labels_under(clean, threshold);

    double previous_agreement = 1.1;
    for (double strength : {0.0, 0.15, 0.3}) {
        CohortConfig config = base;
        if (strength > 0)
            config.bias = BiasSpec{RegionCluster::Visayas, BiasMode::LabelNoise, strength};
        const Cohort biased = generate_cohort(config, 2);
        const auto labels = labels_under(biased, threshold);
        REQUIRE(labels.size() == reference.size());
        int64_t agree = 0;
        for (const auto& [key, label] : labels) agree += label == reference.at(key);
        const double agreement = static_cast<double>(agree) / static_cast<double>(labels.size());
        CHECK(agreement < previous_agreement);
        previous_agreement = agreement;
    }
}

TEST_CASE("label noise leaves non-grade events untouched") {
    CohortConfig base = small_config(41);
    base.region_weights = {{RegionCluster::Visayas, 1.0}};
    CohortConfig noisy = base;
    noisy.bias = BiasSpec{RegionCluster::Visayas, BiasMode::LabelNoise, 0.5};
    const Cohort a = generate_cohort(base, 1);
    const Cohort b = generate_cohort(noisy, 1);
    REQUIRE(a.events.size() == b.events.size());
    for (size_t i = 0; i < a.events.size(); ++i) {
        if (a.events[i].kind == EventKind::GradeReceived) continue;
        CHECK(a.events[i] == b.events[i]);
    }
}

TEST_CASE("feature attenuation thins activity but keeps grades") {
    CohortConfig base = small_config(43);
    base.n_students = 150;
    base.region_weights = {{RegionCluster::Visayas, 1.0}};
    base.missing_location_rate = 0.0;
    CohortConfig thinned = base;
    thinned.bias = BiasSpec{RegionCluster::Visayas, BiasMode::FeatureAttenuation, 0.4};

    const Cohort a = generate_cohort(base, 1);
    const Cohort b = generate_cohort(thinned, 1);

    auto count_kinds = [](const Cohort& cohort) {
        int64_t grades = 0, other = 0;
        for (const Event& e : cohort.events)
            (e.kind == EventKind::GradeReceived ? grades : other) += 1;
        return std::pair<int64_t, int64_t>(grades, other);
    };
    const auto [grades_a, other_a] = count_kinds(a);
    const auto [grades_b, other_b] = count_kinds(b);
    CHECK(grades_a == grades_b);
    const double keep_ratio = static_cast<double>(other_b) / static_cast<double>(other_a);
    CHECK(keep_ratio == doctest::Approx(0.6).epsilon(0.05));
}

TEST_CASE("emit_cohort: files parse back with zero error rows") {
    namespace fs = std::filesystem;
    const std::string dir = (fs::temp_directory_path() / "fairgrade_synth_test").string();
    fs::remove_all(dir);
    const Cohort cohort = generate_cohort(small_config(47), 1);
    const CohortFiles files = emit_cohort(cohort, dir);

    std::ifstream events_in(files.events_csv, std::ios::binary);
    REQUIRE(events_in.good());
    std::vector<Event> parsed;
    ErrorCollector errors;
    const ParseStats stats = parse_event_log(
        events_in, EventLogSchema{}, [&](Event&& e) { parsed.push_back(std::move(e)); },
        std::ref(errors));
    CHECK(errors.empty());
    CHECK(stats.events == cohort.events.size());
    CHECK(parsed == cohort.events);

    std::ifstream locations_in(files.locations_csv, std::ios::binary);
    REQUIRE(locations_in.good());
    std::vector<LocationRecord> locations;
    parse_location_log(
        locations_in, [&](LocationRecord&& r) { locations.push_back(r); }, std::ref(errors));
    CHECK(errors.empty());
    CHECK(locations == cohort.locations);

    CHECK(fs::exists(files.truth_json));
    fs::remove_all(dir);
}

TEST_CASE("cohort config validation") {
    CohortConfig config = small_config();
    config.n_students = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = small_config();
    config.region_weights = {{RegionCluster::NCR, 0.0}};
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = small_config();
    config.region_weights[RegionCluster::Luzon] = -1.0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = small_config();
    config.bias = BiasSpec{RegionCluster::NCR, BiasMode::LabelNoise, 1.5};
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = small_config();
    config.events_per_student_mean = 0.0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
}
