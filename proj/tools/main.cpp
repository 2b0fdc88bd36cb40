#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "queryback/commands.hpp"
#include "queryback/config.hpp"
#include "queryback/error.hpp"

namespace {

struct GlobalFlags {
    std::string config_path;
    std::string cache_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    size_t parallelism = 0;
    size_t k = 0;
    double tau = -2.0;
    std::string aggregation;
};

// Flags override the config file; the config file overrides built-in defaults.
queryback::RunConfig load_config(const GlobalFlags& flags) {
    queryback::RunConfig config;
    if (!flags.config_path.empty()) {
        config = queryback::load_run_config(flags.config_path);
    }
    if (!flags.cache_dir.empty()) config.cache_dir = flags.cache_dir;
    if (flags.seed_set) config.base_seed = flags.seed;
    if (flags.parallelism > 0) config.parallelism = flags.parallelism;
    if (flags.k > 0) config.detector.k = flags.k;
    if (flags.tau >= -1.0) config.detector.tau = flags.tau;
    if (!flags.aggregation.empty()) {
        config.detector.aggregation = queryback::aggregation_from_string(flags.aggregation);
    }
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "queryback: hallucination detection by backward query reconstruction.\n"
        "Exit codes for detect: 0 = consistent, 1 = hallucination, 2 = error."};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand name

    GlobalFlags flags;
    app.add_option("--config", flags.config_path, "run configuration file (JSON)");
    app.add_option("--cache-dir", flags.cache_dir, "response cache directory");
    auto* seed_opt = app.add_option("--seed", flags.seed, "base seed for all derived randomness");
    app.add_option("--parallelism", flags.parallelism, "worker pool size");
    app.add_option("--k", flags.k, "backward passes per backward model");
    app.add_option("--tau", flags.tau, "similarity threshold");
    app.add_option("--aggregation", flags.aggregation, "average | maximum");

    auto* detect = app.add_subcommand("detect", "interrogate one query (and optional answer)");
    queryback::DetectArgs detect_args;
    detect->add_option("--query", detect_args.query, "the original query")->required();
    detect->add_option("--answer", detect_args.answer,
                       "pre-generated answer; omitted = run the forward pass");
    detect->add_option("--task", detect_args.task, "task entry providing the prompt spec");
    detect->add_flag("--json", detect_args.json_output, "print the outcome record as JSON");

    auto* evaluate = app.add_subcommand("evaluate", "run the benchmark protocol");
    queryback::EvaluateArgs evaluate_args;
    evaluate->add_option("--methods", evaluate_args.methods,
                         "subset of {interrogate, embed-cosine, selfcheck}")
        ->delimiter(',');
    evaluate->add_option("--tasks", evaluate_args.tasks, "task-kind filter")->delimiter(',');
    evaluate->add_option("--limit", evaluate_args.limit,
                         "stop after N records; partial runs resume via the cache");

    auto* calibrate = app.add_subcommand("calibrate", "sweep a similarity threshold from pairs");
    queryback::CalibrateArgs calibrate_args;
    calibrate->add_option("--pairs", calibrate_args.pairs_path, "JSONL pair file")->required();

    auto* report = app.add_subcommand("report", "re-render metrics from a records file");
    queryback::ReportArgs report_args;
    report->add_option("--records", report_args.records_path, "records.jsonl path")->required();
    report->add_option("--output-dir", report_args.output_dir, "where the k-series CSV lands");

    CLI11_PARSE(app, argc, argv);
    flags.seed_set = seed_opt->count() > 0;

    try {
        if (report->parsed()) {
            return queryback::cmd_report(report_args);
        }
        queryback::RunConfig config = load_config(flags);
        queryback::BackendRegistry registry = queryback::build_registry(config);
        if (detect->parsed()) {
            return queryback::cmd_detect(detect_args, config, registry);
        }
        if (evaluate->parsed()) {
            return queryback::cmd_evaluate(evaluate_args, config, registry);
        }
        if (calibrate->parsed()) {
            return queryback::cmd_calibrate(calibrate_args, config, registry);
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    }
    return 2;
}
