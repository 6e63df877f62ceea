#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fairgrade/event_log.hpp"
#include "fairgrade/metrics.hpp"
#include "fairgrade/pipeline.hpp"

namespace {

using namespace fairgrade;

struct CommonArgs {
    std::string config_path;
    int workers = 0;           // 0 = keep config value
    std::string out_dir;       // empty = keep config value
    uint64_t seed = 0;
    bool seed_set = false;
    std::string families;      // comma-separated override
    double madd_bin_width = 0; // 0 = keep config value
};

void add_common_options(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "pipeline config JSON")->required();
    cmd->add_option("--workers", args.workers, "worker threads (overrides config)");
    cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", args.seed, "seed override")->each([&](const std::string&) {
        args.seed_set = true;
    });
    cmd->add_option("--families", args.families, "comma-separated families (overrides config)");
    cmd->add_option("--madd-bin-width", args.madd_bin_width, "MADD bin width (overrides config)");
}

PipelineConfig load_config(const CommonArgs& args) {
    PipelineConfig config = load_pipeline_config(args.config_path);
    if (args.workers > 0) config.workers = args.workers;
    if (!args.out_dir.empty()) config.out_dir = args.out_dir;
    if (args.seed_set) {
        config.seed = args.seed;
        if (config.synth) config.synth->seed = substream(config.seed, "synth");
    }
    if (args.madd_bin_width > 0) config.madd_bin_width = args.madd_bin_width;
    if (!args.families.empty()) {
        config.families.clear();
        std::string token;
        for (char c : args.families + ",") {
            if (c == ',') {
                if (!token.empty()) {
                    auto family = parse_family(token);
                    if (!family) throw ConfigError("unknown family: " + token);
                    config.families.push_back(*family);
                    token.clear();
                }
            } else {
                token.push_back(c);
            }
        }
        config.validate();
    }
    return config;
}

int run_command(const CommonArgs& args, const std::string& command) {
    PipelineConfig config;
    try {
        config = load_config(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    RunManifest manifest;
    manifest.config_hash_hex = config_hash_hex(config);
    manifest.started_at_utc = iso8601_utc_now();
    const std::string manifest_path =
        (std::filesystem::path(config.out_dir) / "manifest.json").string();

    auto finish = [&](int code) {
        manifest.finished_at_utc = iso8601_utc_now();
        try {
            std::filesystem::create_directories(config.out_dir);
            write_manifest(manifest_path, manifest);
        } catch (const std::exception& e) {
            std::cerr << "warning: failed to write manifest: " << e.what() << '\n';
        }
        return code;
    };

    try {
        if (command == "generate") {
            const GenerateOutputs outputs = run_generate(config, manifest);
            std::cout << "events:    " << outputs.files.events_csv << "  (" << outputs.event_count
                      << " events)\n"
                      << "locations: " << outputs.files.locations_csv << "  ("
                      << outputs.location_rows << " rows)\n"
                      << "truth:     " << outputs.files.truth_json << '\n';
        } else if (command == "featurize") {
            const FeaturizeOutputs outputs = run_featurize(config, manifest);
            std::printf("samples:        %llu\n", static_cast<unsigned long long>(outputs.sample_count));
            std::printf("average grade:  %.4f\n", outputs.average_grade);
            std::printf("positive rate:  %.4f\n", outputs.positive_rate);
            std::printf("features csv:   %s\n", outputs.features_csv.c_str());
            if (outputs.parse_errors > 0)
                std::printf("parse errors:   %llu (see parse_errors.csv)\n",
                            static_cast<unsigned long long>(outputs.parse_errors));
        } else if (command == "audit") {
            const AuditOutputs outputs = run_audit(config, manifest);
            std::cout << "report:      " << outputs.report_csv << '\n'
                      << "json:        " << outputs.report_json << '\n'
                      << "predictions: " << outputs.predictions_csv << '\n'
                      << "grade stats: " << outputs.grade_stats_csv << '\n';
        } else if (command == "report") {
            const AuditOutputs outputs = run_report(config, manifest);
            std::cout << "report:      " << outputs.report_csv << '\n'
                      << "json:        " << outputs.report_json << '\n'
                      << "grade stats: " << outputs.grade_stats_csv << '\n';
        }
        return finish(kExitOk);
    } catch (const ConfigError& e) {
        manifest.status = "error";
        manifest.error = e.what();
        std::cerr << "config error: " << e.what() << '\n';
        return finish(kExitConfig);
    } catch (const DataError& e) {
        manifest.status = "error";
        manifest.error = e.what();
        std::cerr << "data error: " << e.what() << '\n';
        return finish(kExitData);
    } catch (const UndefinedMetricError& e) {
        manifest.status = "error";
        manifest.error = e.what();
        std::cerr << "metric error: " << e.what() << '\n';
        return finish(kExitMetricUndefined);
    } catch (const std::exception& e) {
        manifest.status = "error";
        manifest.error = e.what();
        std::cerr << "error: " << e.what() << '\n';
        return finish(kExitInternal);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fairness audit pipeline for LMS grade prediction"};
    app.require_subcommand(1);

    CommonArgs generate_args, featurize_args, audit_args, report_args;
    CLI::App* generate = app.add_subcommand("generate", "write a synthetic cohort");
    add_common_options(generate, generate_args);
    CLI::App* featurize = app.add_subcommand("featurize", "extract grade samples from event logs");
    add_common_options(featurize, featurize_args);
    CLI::App* audit = app.add_subcommand("audit", "cross-validate models and audit fairness");
    add_common_options(audit, audit_args);
    CLI::App* report = app.add_subcommand("report", "rebuild reports from saved predictions");
    add_common_options(report, report_args);

    CLI11_PARSE(app, argc, argv);

    if (generate->parsed()) return run_command(generate_args, "generate");
    if (featurize->parsed()) return run_command(featurize_args, "featurize");
    if (audit->parsed()) return run_command(audit_args, "audit");
    if (report->parsed()) return run_command(report_args, "report");
    return kExitConfig;
}
