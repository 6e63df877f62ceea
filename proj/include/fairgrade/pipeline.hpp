#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairgrade/cross_validation.hpp"
#include "fairgrade/fairness.hpp"
#include "fairgrade/features.hpp"
#include "fairgrade/models.hpp"
#include "fairgrade/synth.hpp"

namespace fairgrade {

inline constexpr std::string_view kToolVersion = "1.0.0";

// Exit codes surfaced by the CLI.
enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitConfig = 2,
    kExitData = 3,
    kExitMetricUndefined = 4,
};

struct InputPaths {
    std::string events_csv;
    std::string locations_csv;
};

struct PipelineConfig {
    // Exactly one of `inputs` / `synth` must be set.
    std::optional<InputPaths> inputs;
    std::optional<CohortConfig> synth;

    FeatureOptions feature_options;
    std::vector<ModelFamily> families = {ModelFamily::Dummy, ModelFamily::LR, ModelFamily::DT,
                                         ModelFamily::RF,    ModelFamily::GBT, ModelFamily::KNN};
    std::map<ModelFamily, std::vector<Hyperparams>> grids;  // missing family -> default grid
    int k = 10;
    uint64_t seed = 0;
    double madd_bin_width = 0.01;
    std::string out_dir = "out";
    int workers = 1;

    void validate() const;  // throws ConfigError
};

PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig parse_pipeline_config_json(const std::string& json_text);

// FNV-1a over the canonicalized config serialization.
uint64_t config_hash(const PipelineConfig& config);
std::string config_hash_hex(const PipelineConfig& config);

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct RunManifest {
    std::string tool_version{kToolVersion};
    std::string config_hash_hex;
    std::string started_at_utc;
    std::string finished_at_utc;
    std::string status = "ok";  // or "error"
    std::string error;
    std::vector<StageTiming> timings;
    std::map<std::string, double> counts;
    std::vector<std::string> warnings;
};

void write_manifest(const std::string& path, const RunManifest& manifest);

struct GenerateOutputs {
    CohortFiles files;
    uint64_t event_count = 0;
    uint64_t location_rows = 0;
};

struct FeaturizeOutputs {
    std::string features_csv;
    uint64_t sample_count = 0;
    double average_grade = 0.0;
    double positive_rate = 0.0;
    uint64_t parse_errors = 0;
};

struct AuditOutputs {
    std::string report_csv;
    std::string report_json;
    std::string predictions_csv;
    std::string grade_stats_csv;
    std::vector<FairnessReport> reports;  // family order as written
};

GenerateOutputs run_generate(const PipelineConfig& config, RunManifest& manifest);
FeaturizeOutputs run_featurize(const PipelineConfig& config, RunManifest& manifest);
AuditOutputs run_audit(const PipelineConfig& config, RunManifest& manifest);
// Rebuilds the report bundle from an existing predictions.csv + features.csv.
AuditOutputs run_report(const PipelineConfig& config, RunManifest& manifest);

// Shared loading helpers (featurize/audit stages and tests).
Dataset load_dataset_stage(const PipelineConfig& config, RunManifest& manifest);
GroupAssignment load_groups(const std::string& locations_csv_path);

std::string iso8601_utc_now();

}  // namespace fairgrade
