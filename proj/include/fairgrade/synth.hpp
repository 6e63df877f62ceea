#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairgrade/events.hpp"
#include "fairgrade/region.hpp"

namespace fairgrade {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class BiasMode : uint8_t { LabelNoise, FeatureAttenuation };

std::string_view bias_mode_name(BiasMode mode);
std::optional<BiasMode> parse_bias_mode(std::string_view text);

// Controlled unfairness injected into one cluster, for audit testing.
struct BiasSpec {
    RegionCluster target_cluster = RegionCluster::Visayas;
    BiasMode mode = BiasMode::LabelNoise;
    double strength = 0.0;  // in [0, 1]
};

struct CohortConfig {
    int n_students = 100;
    // Default weights follow the study population's cluster sizes.
    std::map<RegionCluster, double> region_weights = {
        {RegionCluster::NCR, 4816},     {RegionCluster::Luzon, 580},
        {RegionCluster::Mindanao, 138}, {RegionCluster::Visayas, 131},
        {RegionCluster::Abroad, 49},
    };
    int semester_days = 112;
    double events_per_student_mean = 8142.0;
    double skill_noise = 1.0;  // scales grade noise relative to skill signal
    std::optional<BiasSpec> bias;
    uint64_t seed = 0;

    // Fractions with study-population defaults; both exercised downstream.
    double missing_location_rate = 272.0 / 5986.0;
    double second_region_rate = 0.05;

    void validate() const;  // throws ConfigError
};

struct GradeTruth {
    CourseId course;
    int64_t grade_timestamp_ms = 0;
    double true_success_probability = 0.0;  // pre-noise expected grade
};

struct StudentTruth {
    StudentId student;
    double skill = 0.0;  // latent engagement, ~N(0,1)
    RegionCluster cluster = RegionCluster::NCR;
    bool has_location = true;
    std::vector<GradeTruth> grades;
};

struct GroundTruth {
    std::vector<StudentTruth> students;  // ascending by student id
};

struct Cohort {
    std::vector<Event> events;  // canonical order: (timestamp, student, course, ...)
    std::vector<LocationRecord> locations;
    GroundTruth truth;
};

// Deterministic given config.seed at any worker count. Per-student event
// intensity is monotone in latent skill; grades increase with skill plus
// noise; without a BiasSpec the grade process is identical across clusters.
Cohort generate_cohort(const CohortConfig& config, int workers = 1);

struct CohortFiles {
    std::string events_csv;
    std::string locations_csv;
    std::string truth_json;
};

// Writes events.csv / locations.csv in the canonical log formats plus a
// truth.json sidecar into `out_dir`.
CohortFiles emit_cohort(const Cohort& cohort, const std::string& out_dir);

}  // namespace fairgrade
