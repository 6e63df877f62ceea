#include "fairgrade/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fairgrade/csv.hpp"
#include "fairgrade/event_log.hpp"
#include "fairgrade/metrics.hpp"
#include "fairgrade/parallel.hpp"
#include "fairgrade/rng.hpp"

namespace fairgrade {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class StageTimer {
  public:
    StageTimer(RunManifest& manifest, std::string stage)
        : manifest_(manifest), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}

    ~StageTimer() {
        const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_);
        manifest_.timings.push_back({stage_, elapsed.count()});
    }

  private:
    RunManifest& manifest_;
    std::string stage_;
    std::chrono::steady_clock::time_point start_;
};

CohortConfig parse_cohort_config(const json& node) {
    CohortConfig config;
    if (node.contains("n_students")) config.n_students = node.at("n_students").get<int>();
    if (node.contains("region_weights")) {
        config.region_weights.clear();
        for (const auto& [name, weight] : node.at("region_weights").items()) {
            auto cluster = parse_cluster(name);
            if (!cluster) throw ConfigError("config: unknown cluster in region_weights: " + name);
            config.region_weights[*cluster] = weight.get<double>();
        }
    }
    if (node.contains("semester_days")) config.semester_days = node.at("semester_days").get<int>();
    if (node.contains("events_per_student_mean"))
        config.events_per_student_mean = node.at("events_per_student_mean").get<double>();
    if (node.contains("skill_noise")) config.skill_noise = node.at("skill_noise").get<double>();
    if (node.contains("missing_location_rate"))
        config.missing_location_rate = node.at("missing_location_rate").get<double>();
    if (node.contains("second_region_rate"))
        config.second_region_rate = node.at("second_region_rate").get<double>();
    if (node.contains("seed")) config.seed = node.at("seed").get<uint64_t>();
    if (node.contains("bias") && !node.at("bias").is_null()) {
        const json& bias_node = node.at("bias");
        BiasSpec bias;
        auto cluster = parse_cluster(bias_node.at("cluster").get<std::string>());
        if (!cluster) throw ConfigError("config: unknown bias target cluster");
        bias.target_cluster = *cluster;
        auto mode = parse_bias_mode(bias_node.at("mode").get<std::string>());
        if (!mode) throw ConfigError("config: unknown bias mode");
        bias.mode = *mode;
        bias.strength = bias_node.at("strength").get<double>();
        config.bias = bias;
    }
    return config;
}

json cohort_config_json(const CohortConfig& config) {
    json node;
    node["n_students"] = config.n_students;
    json weights;
    for (const auto& [cluster, weight] : config.region_weights)
        weights[std::string(cluster_name(cluster))] = weight;
    node["region_weights"] = weights;
    node["semester_days"] = config.semester_days;
    node["events_per_student_mean"] = config.events_per_student_mean;
    node["skill_noise"] = config.skill_noise;
    node["missing_location_rate"] = config.missing_location_rate;
    node["second_region_rate"] = config.second_region_rate;
    node["seed"] = config.seed;
    if (config.bias) {
        node["bias"] = {{"cluster", std::string(cluster_name(config.bias->target_cluster))},
                        {"mode", std::string(bias_mode_name(config.bias->mode))},
                        {"strength", config.bias->strength}};
    } else {
        node["bias"] = nullptr;
    }
    return node;
}

Hyperparams parse_hyperparams(const json& node) {
    Hyperparams hp;
    for (const auto& [name, value] : node.items()) hp[name] = value.get<double>();
    return hp;
}

}  // namespace

void PipelineConfig::validate() const {
    if (inputs.has_value() == synth.has_value())
        throw ConfigError("config: exactly one of inputs/synth must be set");
    if (k < 2) throw ConfigError("config: k must be >= 2");
    if (workers < 1) throw ConfigError("config: workers must be >= 1");
    if (!(madd_bin_width > 0.0 && madd_bin_width <= 1.0))
        throw ConfigError("config: madd_bin_width must be in (0, 1]");
    if (families.empty()) throw ConfigError("config: at least one model family required");
    if (out_dir.empty()) throw ConfigError("config: out_dir must be set");
    if (feature_options.session_gap_ms <= 0)
        throw ConfigError("config: session gap must be positive");
    if (feature_options.recent_window_ms <= 0)
        throw ConfigError("config: recent window must be positive");
    if (synth) synth->validate();
    for (const auto& [family, grid] : grids) {
        if (grid.empty()) throw ConfigError("config: empty grid for family");
        for (const Hyperparams& hp : grid) validate_hyperparams(family, hp);
    }
}

PipelineConfig parse_pipeline_config_json(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }

    PipelineConfig config;
    try {
        if (root.contains("inputs") && !root.at("inputs").is_null()) {
            InputPaths paths;
            paths.events_csv = root.at("inputs").at("events_csv").get<std::string>();
            paths.locations_csv = root.at("inputs").at("locations_csv").get<std::string>();
            config.inputs = paths;
        }
        if (root.contains("synth") && !root.at("synth").is_null())
            config.synth = parse_cohort_config(root.at("synth"));

        if (root.contains("features")) {
            const json& f = root.at("features");
            if (f.contains("session_gap_minutes"))
                config.feature_options.session_gap_ms =
                    static_cast<int64_t>(f.at("session_gap_minutes").get<double>() * 60.0 * 1000.0);
            if (f.contains("recent_window_hours"))
                config.feature_options.recent_window_ms =
                    static_cast<int64_t>(f.at("recent_window_hours").get<double>() * 3600.0 * 1000.0);
        }
        if (root.contains("families")) {
            config.families.clear();
            for (const json& name : root.at("families")) {
                auto family = parse_family(name.get<std::string>());
                if (!family)
                    throw ConfigError("config: unknown model family: " + name.get<std::string>());
                config.families.push_back(*family);
            }
        }
        if (root.contains("grids")) {
            for (const auto& [name, grid_node] : root.at("grids").items()) {
                auto family = parse_family(name);
                if (!family) throw ConfigError("config: unknown family in grids: " + name);
                std::vector<Hyperparams> grid;
                for (const json& point : grid_node) grid.push_back(parse_hyperparams(point));
                config.grids[*family] = std::move(grid);
            }
        }
        if (root.contains("k")) config.k = root.at("k").get<int>();
        if (root.contains("seed")) config.seed = root.at("seed").get<uint64_t>();
        if (root.contains("madd_bin_width"))
            config.madd_bin_width = root.at("madd_bin_width").get<double>();
        if (root.contains("out_dir")) config.out_dir = root.at("out_dir").get<std::string>();
        if (root.contains("workers")) config.workers = root.at("workers").get<int>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    // The cohort seed defaults to a named sub-stream of the pipeline seed.
    if (config.synth && (!root.contains("synth") || !root.at("synth").contains("seed")))
        config.synth->seed = substream(config.seed, "synth");

    config.validate();
    return config;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot read " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_pipeline_config_json(buffer.str());
}

uint64_t config_hash(const PipelineConfig& config) {
    json root;
    root["tool_version"] = std::string(kToolVersion);
    if (config.inputs) {
        root["inputs"] = {{"events_csv", config.inputs->events_csv},
                          {"locations_csv", config.inputs->locations_csv}};
    }
    if (config.synth) root["synth"] = cohort_config_json(*config.synth);
    root["session_gap_ms"] = config.feature_options.session_gap_ms;
    root["recent_window_ms"] = config.feature_options.recent_window_ms;
    json families = json::array();
    for (ModelFamily family : config.families) families.push_back(std::string(family_name(family)));
    root["families"] = families;
    json grids;
    for (const auto& [family, grid] : config.grids) {
        json grid_node = json::array();
        for (const Hyperparams& hp : grid) {
            json point;
            for (const auto& [name, value] : hp) point[name] = value;
            grid_node.push_back(point);
        }
        grids[std::string(family_name(family))] = grid_node;
    }
    root["grids"] = grids;
    root["k"] = config.k;
    root["seed"] = config.seed;
    root["madd_bin_width"] = config.madd_bin_width;
    return fnv1a64(root.dump());
}

std::string config_hash_hex(const PipelineConfig& config) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(config_hash(config)));
    return buf;
}

std::string iso8601_utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
    json root;
    root["tool_version"] = manifest.tool_version;
    root["config_hash"] = manifest.config_hash_hex;
    root["started_at"] = manifest.started_at_utc;
    root["finished_at"] = manifest.finished_at_utc;
    root["status"] = manifest.status;
    if (!manifest.error.empty()) root["error"] = manifest.error;
    json timings = json::array();
    for (const StageTiming& timing : manifest.timings)
        timings.push_back({{"stage", timing.stage}, {"seconds", timing.seconds}});
    root["timings"] = timings;
    json counts;
    for (const auto& [name, value] : manifest.counts) counts[name] = value;
    root["counts"] = counts;
    root["warnings"] = manifest.warnings;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << root.dump(2) << '\n';
}

namespace {

InputPaths effective_inputs(const PipelineConfig& config) {
    if (config.inputs) return *config.inputs;
    return InputPaths{(fs::path(config.out_dir) / "events.csv").string(),
                      (fs::path(config.out_dir) / "locations.csv").string()};
}

}  // namespace

GenerateOutputs run_generate(const PipelineConfig& config, RunManifest& manifest) {
    if (!config.synth) throw ConfigError("generate: config has no synth section");
    StageTimer timer(manifest, "generate");
    const Cohort cohort = generate_cohort(*config.synth, config.workers);
    const CohortFiles files = emit_cohort(cohort, config.out_dir);
    GenerateOutputs outputs;
    outputs.files = files;
    outputs.event_count = cohort.events.size();
    outputs.location_rows = cohort.locations.size();
    manifest.counts["events_generated"] = static_cast<double>(cohort.events.size());
    manifest.counts["location_rows"] = static_cast<double>(cohort.locations.size());
    manifest.counts["students"] = static_cast<double>(cohort.truth.students.size());
    return outputs;
}

FeaturizeOutputs run_featurize(const PipelineConfig& config, RunManifest& manifest) {
    const InputPaths inputs = effective_inputs(config);
    if (config.synth && !fs::exists(inputs.events_csv)) run_generate(config, manifest);

    StageTimer timer(manifest, "featurize");
    std::ifstream in(inputs.events_csv, std::ios::binary);
    if (!in) throw DataError("featurize: cannot read " + inputs.events_csv);

    TimelineBuilder builder;
    ErrorCollector errors;
    const ParseStats stats = parse_event_log(
        in, EventLogSchema{}, [&](Event&& event) { builder.add(std::move(event)); },
        std::ref(errors));

    if (!errors.empty()) {
        const std::string error_path = (fs::path(config.out_dir) / "parse_errors.csv").string();
        fs::create_directories(config.out_dir);
        std::ofstream error_out(error_path, std::ios::binary);
        errors.write_csv(error_out);
        manifest.warnings.push_back(std::to_string(errors.size()) + " malformed event rows in " +
                                    error_path);
    }

    const std::vector<StudentTimeline> timelines = builder.finalize();

    std::vector<std::vector<GradeSample>> per_student(timelines.size());
    parallel_for(timelines.size(), config.workers, [&](size_t i) {
        per_student[i] = extract_samples(timelines[i], config.feature_options);
    });
    std::vector<GradeSample> samples;
    for (auto& chunk : per_student) {
        samples.insert(samples.end(), std::make_move_iterator(chunk.begin()),
                       std::make_move_iterator(chunk.end()));
    }

    const double average = mean_grade(samples);
    label_samples(samples, average);
    const Dataset dataset = assemble_dataset(samples);

    fs::create_directories(config.out_dir);
    const std::string features_path = (fs::path(config.out_dir) / "features.csv").string();
    {
        std::ofstream out(features_path, std::ios::binary);
        if (!out) throw std::runtime_error("featurize: cannot write " + features_path);
        write_dataset_csv(out, dataset);
    }

    FeaturizeOutputs outputs;
    outputs.features_csv = features_path;
    outputs.sample_count = static_cast<uint64_t>(dataset.rows());
    outputs.average_grade = dataset.average_grade;
    outputs.parse_errors = stats.errors;
    double positives = 0;
    for (Eigen::Index i = 0; i < dataset.rows(); ++i) positives += dataset.labels[i] == 1;
    outputs.positive_rate =
        dataset.rows() > 0 ? positives / static_cast<double>(dataset.rows()) : 0.0;

    if (dataset.rows() == 0) manifest.warnings.push_back("featurize: no grade events, empty dataset");

    manifest.counts["event_rows"] = static_cast<double>(stats.rows);
    manifest.counts["events_parsed"] = static_cast<double>(stats.events);
    manifest.counts["parse_errors"] = static_cast<double>(stats.errors);
    manifest.counts["samples"] = static_cast<double>(outputs.sample_count);
    manifest.counts["average_grade"] = outputs.average_grade;
    manifest.counts["positive_rate"] = outputs.positive_rate;
    return outputs;
}

GroupAssignment load_groups(const std::string& locations_csv_path) {
    std::ifstream in(locations_csv_path, std::ios::binary);
    if (!in) throw DataError("cannot read " + locations_csv_path);
    std::vector<LocationRecord> records;
    parse_location_log(
        in, [&](LocationRecord&& record) { records.push_back(record); },
        [](uint64_t, std::string_view) {});
    return resolve_groups(records);
}

Dataset load_dataset_stage(const PipelineConfig& config, RunManifest& manifest) {
    const std::string features_path = (fs::path(config.out_dir) / "features.csv").string();
    if (!fs::exists(features_path)) run_featurize(config, manifest);
    std::ifstream in(features_path, std::ios::binary);
    if (!in) throw DataError("cannot read " + features_path);
    return read_dataset_csv(in);
}

namespace {

struct FamilyRun {
    ModelFamily family;
    CVResult cv;
    FairnessReport report;
};

}  // namespace

AuditOutputs run_audit(const PipelineConfig& config, RunManifest& manifest) {
    const Dataset dataset = load_dataset_stage(config, manifest);
    if (dataset.rows() == 0) throw DataError("audit: dataset is empty");
    const GroupAssignment groups = load_groups(effective_inputs(config).locations_csv);

    StageTimer timer(manifest, "audit");
    const FoldAssignment folds =
        stratified_group_kfold(dataset, config.k, substream(config.seed, "folds"));

    std::vector<FamilyRun> runs;
    for (ModelFamily family : config.families) {
        CVOptions options;
        options.k = config.k;
        options.seed = substream(config.seed, family_name(family));
        options.workers = config.workers;

        auto grid_it = config.grids.find(family);
        const std::vector<Hyperparams> grid =
            grid_it != config.grids.end() ? grid_it->second : default_grid(family);

        FamilyRun run;
        run.family = family;
        run.cv = cross_validate(family, grid, dataset, folds, options);

        bool any_auc = false;
        for (const FoldResult& fold : run.cv.folds) any_auc = any_auc || fold.auc.has_value();
        if (!any_auc)
            throw UndefinedMetricError("audit: AUC undefined in every fold for family " +
                                       std::string(family_name(family)));

        run.report = fairness_report(dataset, run.cv, groups, config.madd_bin_width);
        for (const std::string& warning : run.report.warnings)
            manifest.warnings.push_back(std::string(family_name(family)) + ": " + warning);
        runs.push_back(std::move(run));
    }

    // Report rows are sorted descending by overall AUC, family order on ties.
    std::stable_sort(runs.begin(), runs.end(), [](const FamilyRun& a, const FamilyRun& b) {
        return a.report.overall_auc_mean > b.report.overall_auc_mean;
    });

    fs::create_directories(config.out_dir);
    AuditOutputs outputs;
    outputs.report_csv = (fs::path(config.out_dir) / "report.csv").string();
    outputs.report_json = (fs::path(config.out_dir) / "report.json").string();
    outputs.predictions_csv = (fs::path(config.out_dir) / "predictions.csv").string();
    outputs.grade_stats_csv = (fs::path(config.out_dir) / "grade_stats.csv").string();

    std::vector<FairnessReport> reports;
    for (const FamilyRun& run : runs) reports.push_back(run.report);
    outputs.reports = reports;

    {
        std::ofstream out(outputs.report_csv, std::ios::binary);
        write_fairness_csv(out, reports);
    }
    {
        std::ofstream out(outputs.report_json, std::ios::binary);
        write_fairness_json(out, reports);
    }
    {
        std::ofstream out(outputs.predictions_csv, std::ios::binary);
        write_predictions_csv_header(out);
        for (const FamilyRun& run : runs) write_predictions_csv(out, dataset, run.cv);
    }
    for (const FamilyRun& run : runs) {
        const std::string path =
            (fs::path(config.out_dir) / ("cv_" + std::string(family_name(run.family)) + ".json"))
                .string();
        std::ofstream out(path, std::ios::binary);
        write_cv_json(out, run.cv);
    }
    {
        const GradeDistributionStats stats = grade_distribution_stats(dataset, groups);
        std::ofstream out(outputs.grade_stats_csv, std::ios::binary);
        write_grade_stats_csv(out, stats);
    }

    manifest.counts["families_audited"] = static_cast<double>(runs.size());
    manifest.counts["k"] = static_cast<double>(config.k);
    manifest.counts["audited_samples"] = static_cast<double>(dataset.rows());
    return outputs;
}

AuditOutputs run_report(const PipelineConfig& config, RunManifest& manifest) {
    StageTimer timer(manifest, "report");
    const std::string features_path = (fs::path(config.out_dir) / "features.csv").string();
    const std::string predictions_path = (fs::path(config.out_dir) / "predictions.csv").string();

    std::ifstream features_in(features_path, std::ios::binary);
    if (!features_in) throw DataError("report: cannot read " + features_path);
    const Dataset dataset = read_dataset_csv(features_in);

    std::ifstream predictions_in(predictions_path, std::ios::binary);
    if (!predictions_in) throw DataError("report: cannot read " + predictions_path);

    // family -> (fold_of_sample, probability)
    std::map<ModelFamily, CVResult> by_family;
    CsvReader reader(predictions_in);
    std::vector<std::string> fields;
    if (!reader.next(fields)) throw DataError("report: predictions.csv missing header");
    while (reader.next(fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != 6) throw DataError("report: predictions.csv bad field count");
        auto family = parse_family(fields[0]);
        if (!family) throw DataError("report: unknown family in predictions.csv");
        CVResult& cv = by_family[*family];
        if (cv.fold_of_sample.empty()) {
            cv.family = *family;
            cv.fold_of_sample.assign(static_cast<size_t>(dataset.rows()), 0);
            cv.oof_probability = Eigen::VectorXd::Zero(dataset.rows());
        }
        const long sample = std::stol(fields[1]);
        if (sample < 0 || sample >= dataset.rows())
            throw DataError("report: sample_id out of range");
        cv.oof_probability[sample] = std::strtod(fields[4].c_str(), nullptr);
        cv.fold_of_sample[static_cast<size_t>(sample)] = std::stoi(fields[5]);
    }

    std::vector<FairnessReport> reports;
    const GroupAssignment groups = load_groups(effective_inputs(config).locations_csv);
    for (auto& [family, cv] : by_family) {
        cv.k = 1 + *std::max_element(cv.fold_of_sample.begin(), cv.fold_of_sample.end());
        cv.folds.resize(static_cast<size_t>(cv.k));
        // Recompute per-fold metrics from the stored predictions.
        for (int f = 0; f < cv.k; ++f) {
            std::vector<Eigen::Index> rows;
            for (Eigen::Index i = 0; i < dataset.rows(); ++i)
                if (cv.fold_of_sample[static_cast<size_t>(i)] == f) rows.push_back(i);
            FoldResult& fold = cv.folds[static_cast<size_t>(f)];
            fold.test_count = static_cast<Eigen::Index>(rows.size());
            if (rows.empty()) continue;
            Eigen::VectorXd proba(static_cast<Eigen::Index>(rows.size()));
            Eigen::VectorXi labels(static_cast<Eigen::Index>(rows.size()));
            for (size_t i = 0; i < rows.size(); ++i) {
                proba[static_cast<Eigen::Index>(i)] = cv.oof_probability[rows[i]];
                labels[static_cast<Eigen::Index>(i)] = dataset.labels[rows[i]];
            }
            if (has_both_classes(labels)) fold.auc = auc_roc(proba, labels);
            Eigen::VectorXi pred(proba.size());
            for (Eigen::Index i = 0; i < proba.size(); ++i) pred[i] = proba[i] >= 0.5 ? 1 : 0;
            fold.weighted_f1 = weighted_f1(pred, labels);
        }
        std::vector<double> aucs, f1s;
        for (const FoldResult& fold : cv.folds) {
            if (fold.auc) aucs.push_back(*fold.auc);
            if (fold.weighted_f1) f1s.push_back(*fold.weighted_f1);
        }
        auto mean_of = [](const std::vector<double>& v) {
            double s = 0.0;
            for (double x : v) s += x;
            return v.empty() ? 0.0 : s / static_cast<double>(v.size());
        };
        auto std_of = [&](const std::vector<double>& v) {
            if (v.empty()) return 0.0;
            const double m = mean_of(v);
            double acc = 0.0;
            for (double x : v) acc += (x - m) * (x - m);
            const double var = acc / static_cast<double>(v.size());
            return var > 0.0 ? std::sqrt(var) : 0.0;
        };
        cv.auc_mean = mean_of(aucs);
        cv.auc_std = std_of(aucs);
        cv.f1_mean = mean_of(f1s);
        cv.f1_std = std_of(f1s);
        reports.push_back(fairness_report(dataset, cv, groups, config.madd_bin_width));
    }

    std::stable_sort(reports.begin(), reports.end(), [](const FairnessReport& a, const FairnessReport& b) {
        return a.overall_auc_mean > b.overall_auc_mean;
    });

    AuditOutputs outputs;
    outputs.report_csv = (fs::path(config.out_dir) / "report.csv").string();
    outputs.report_json = (fs::path(config.out_dir) / "report.json").string();
    outputs.predictions_csv = predictions_path;
    outputs.grade_stats_csv = (fs::path(config.out_dir) / "grade_stats.csv").string();
    outputs.reports = reports;
    {
        std::ofstream out(outputs.report_csv, std::ios::binary);
        write_fairness_csv(out, reports);
    }
    {
        std::ofstream out(outputs.report_json, std::ios::binary);
        write_fairness_json(out, reports);
    }
    {
        const GradeDistributionStats stats = grade_distribution_stats(dataset, groups);
        std::ofstream out(outputs.grade_stats_csv, std::ios::binary);
        write_grade_stats_csv(out, stats);
    }
    manifest.counts["families_reported"] = static_cast<double>(reports.size());
    return outputs;
}

}  // namespace fairgrade
