#include "queryback/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "queryback/error.hpp"
#include "queryback/parallel.hpp"
#include "queryback/text.hpp"

namespace queryback {

using nlohmann::json;

namespace {

// Reference points from published large-scale runs of this method family
// (GPT-3 / Llama-2 backends). Context only; nothing asserts against them.
struct ReferencePoint {
    const char* setting;
    const char* metric;
    double value;
};

constexpr ReferencePoint kReferencePoints[] = {
    {"movies, gpt-3 forward", "hallucination_rate", 0.37},
    {"movies, llama-2-7b forward", "hallucination_rate", 0.87},
    {"movies, llama-2-13b forward", "hallucination_rate", 0.72},
    {"books, gpt-3 forward", "hallucination_rate", 0.38},
    {"books, llama-2-7b forward", "hallucination_rate", 0.66},
    {"books, llama-2-13b forward", "hallucination_rate", 0.58},
    {"gci, gpt-3 forward", "hallucination_rate", 0.00},
    {"gci, llama-2-7b forward", "hallucination_rate", 0.25},
    {"gci, llama-2-13b forward", "hallucination_rate", 0.60},
    {"movies, llama-2-7b forward, ensemble backward", "auc", 0.874},
    {"movies, llama-2-7b forward, ensemble backward", "b_acc", 0.813},
};

std::string iso_utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

DetectorConfig detector_config_for_run(const RunConfig& config) {
    DetectorConfig detector = config.detector;
    detector.base_seed = config.base_seed;
    detector.parallelism = config.parallelism;
    return detector;
}

Detector build_detector(const DetectorConfig& detector_config, BackendRegistry& registry) {
    std::vector<std::shared_ptr<GenerationBackend>> backwards;
    backwards.reserve(detector_config.backward_backends.size());
    for (const auto& backend_id : detector_config.backward_backends) {
        backwards.push_back(registry.generator(backend_id));
    }
    return Detector(detector_config, std::move(backwards),
                    registry.embedder(detector_config.embedding_backend));
}

std::string format_double(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", value);
    return buf;
}

struct GroupKey {
    std::string task;
    std::string forward_backend;
    std::string method;

    bool operator<(const GroupKey& other) const {
        return std::tie(task, forward_backend, method) <
               std::tie(other.task, other.forward_backend, other.method);
    }
};

std::map<GroupKey, MetricsReport> fold_groups(const std::vector<EvalRecord>& records) {
    std::map<GroupKey, std::vector<EvalRecord>> groups;
    for (const auto& record : records) {
        for (const auto& [method, result] : record.methods) {
            groups[{to_string(record.record.task), record.forward_backend, method}]
                .push_back(record);
        }
    }
    std::map<GroupKey, MetricsReport> reports;
    for (const auto& [key, group_records] : groups) {
        reports[key] = fold_metrics(group_records, key.method);
    }
    return reports;
}

}  // namespace

int cmd_detect(const DetectArgs& args, const RunConfig& config, BackendRegistry& registry) {
    try {
        if (text::trim(args.query).empty()) {
            throw ContractViolation("detect: --query is required");
        }
        if (config.tasks.empty()) {
            throw ConfigError("detect: the config defines no tasks to take a prompt spec from");
        }
        const TaskEntry* entry = &config.tasks.front();
        if (!args.task.empty()) {
            entry = nullptr;
            for (const auto& task : config.tasks) {
                if (to_string(task.task) == args.task ||
                    (!task.world.empty() && task.world == args.task)) {
                    entry = &task;
                    break;
                }
            }
            if (entry == nullptr) {
                throw ConfigError("detect: no task named " + args.task);
            }
        }
        const ResolvedTask task = resolve_task(*entry, registry);

        Detector detector = build_detector(detector_config_for_run(config), registry);
        DetectionOutcome outcome;
        if (!args.answer.empty()) {
            outcome = detector.detect_given_answer(args.query, args.answer, task.prompt_spec);
        } else {
            if (config.evaluation.forward_backend.empty()) {
                throw ConfigError("detect: no forward backend configured and no --answer given");
            }
            outcome = detector.detect(args.query, task.prompt_spec,
                                      *registry.generator(config.evaluation.forward_backend));
        }

        if (args.json_output) {
            std::cout << outcome.to_jsonl() << "\n";
        } else {
            std::cout << "query:   " << outcome.query << "\n"
                      << "answer:  " << outcome.answer << "\n"
                      << "score:   " << outcome.score << " (tau " << outcome.config.tau << ", "
                      << to_string(outcome.config.aggregation) << " over "
                      << outcome.reconstructions.size() << " reconstructions)\n"
                      << "verdict: " << (outcome.verdict ? "hallucination" : "consistent")
                      << "\n";
        }
        return outcome.verdict ? 1 : 0;
    } catch (const std::exception& ex) {
        std::cerr << "detect: " << ex.what() << "\n";
        return 2;
    }
}

std::vector<EvalRecord> run_evaluation(const EvaluateArgs& args, const RunConfig& config,
                                       BackendRegistry& registry) {
    std::vector<std::string> methods =
        args.methods.empty() ? config.evaluation.methods : args.methods;
    for (const auto& method : methods) {
        if (method != kMethodInterrogate && method != kMethodEmbedCosine &&
            method != kMethodSelfCheck) {
            throw ConfigError("unknown method: " + method);
        }
    }
    const bool want_interrogate =
        std::find(methods.begin(), methods.end(), kMethodInterrogate) != methods.end();
    const bool want_embed_cosine =
        std::find(methods.begin(), methods.end(), kMethodEmbedCosine) != methods.end();
    const bool want_selfcheck =
        std::find(methods.begin(), methods.end(), kMethodSelfCheck) != methods.end();

    if (config.evaluation.forward_backend.empty()) {
        throw ConfigError("evaluate: evaluation.forward_backend is required");
    }
    auto forward = registry.generator(config.evaluation.forward_backend);
    auto embedder = registry.embedder(config.detector.embedding_backend);

    const DetectorConfig base_detector_config = detector_config_for_run(config);
    // Detector passes stay serial; parallelism is spent at record level.
    DetectorConfig record_config = base_detector_config;
    record_config.parallelism = 1;

    std::vector<std::unique_ptr<Detector>> sweep_detectors;
    if (config.evaluation.k_sweep && want_interrogate) {
        for (size_t k = 1; k <= 5; ++k) {
            DetectorConfig sweep_config = record_config;
            sweep_config.k = k;
            sweep_detectors.push_back(
                std::make_unique<Detector>(build_detector(sweep_config, registry)));
        }
    }
    Detector detector = build_detector(record_config, registry);

    std::shared_ptr<GenerationBackend> judge;
    if (want_selfcheck) {
        const std::string judge_id = config.evaluation.selfcheck.judge_backend.empty()
                                         ? config.evaluation.forward_backend
                                         : config.evaluation.selfcheck.judge_backend;
        judge = registry.generator(judge_id);
    }

    std::vector<EvalRecord> all_records;
    for (const auto& entry : config.tasks) {
        if (!args.tasks.empty()) {
            const std::string name = to_string(entry.task);
            const bool wanted =
                std::find(args.tasks.begin(), args.tasks.end(), name) != args.tasks.end() ||
                (!entry.world.empty() &&
                 std::find(args.tasks.begin(), args.tasks.end(), entry.world) != args.tasks.end());
            if (!wanted) continue;
        }
        const ResolvedTask task = resolve_task(entry, registry);

        size_t count = task.records.size();
        if (args.limit > 0) {
            const size_t remaining =
                args.limit > all_records.size() ? args.limit - all_records.size() : 0;
            count = std::min(count, remaining);
        }
        if (count == 0) continue;

        std::vector<EvalRecord> task_results(count);
        parallel_for(count, config.parallelism, [&](size_t idx) {
            const DatasetRecord& record = task.records[idx];
            EvalRecord result;
            result.record = record;
            result.forward_backend = forward->id();
            result.query = render_query(task.query_template, record.query_fields);

            GenerationRequest request;
            request.prompt = render_forward(task.prompt_spec, result.query);
            request.temperature = forward->default_temperature();
            request.max_tokens = record_config.max_tokens_forward;
            request.seed = forward_seed(config.base_seed, forward->id());
            result.generated_answer =
                truncate_completion(forward->generate(request), task.prompt_spec);
            if (result.generated_answer.empty()) {
                throw EmptyGeneration("record " + record.id + ": empty forward answer");
            }

            result.label = verify_record(record, result.generated_answer);

            if (want_interrogate) {
                const DetectionOutcome outcome = detector.detect_given_answer(
                    result.query, result.generated_answer, task.prompt_spec);
                result.methods[kMethodInterrogate] = {outcome.score, outcome.verdict, false};
                for (size_t k = 0; k < sweep_detectors.size(); ++k) {
                    const DetectionOutcome sweep = sweep_detectors[k]->detect_given_answer(
                        result.query, result.generated_answer, task.prompt_spec);
                    result.methods["interrogate@k=" + std::to_string(k + 1)] = {
                        sweep.score, sweep.verdict, false};
                }
            }
            if (want_embed_cosine) {
                const BaselineResult baseline =
                    baseline_embed_cosine(result.query, result.generated_answer, *embedder,
                                          config.evaluation.embed_cosine_threshold);
                result.methods[kMethodEmbedCosine] = {baseline.score, baseline.verdict, false};
            }
            if (want_selfcheck) {
                SelfCheckOptions options;
                options.n_samples = config.evaluation.selfcheck.n_samples;
                options.sample_temperature = config.evaluation.selfcheck.sample_temperature;
                options.threshold = config.evaluation.selfcheck.threshold;
                options.max_tokens = record_config.max_tokens_forward;
                options.base_seed = config.base_seed;
                const BaselineResult baseline =
                    baseline_selfcheck(result.query, result.generated_answer, task.prompt_spec,
                                       *forward, *judge, options);
                result.methods[kMethodSelfCheck] = {baseline.score, baseline.verdict, true};
            }
            task_results[idx] = std::move(result);
        });
        for (auto& result : task_results) {
            all_records.push_back(std::move(result));
        }
        if (args.limit > 0 && all_records.size() >= args.limit) break;
    }
    return all_records;
}

void write_records(const std::string& path, const std::vector<EvalRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write records to " + path);
    }
    for (const auto& record : records) {
        out << record.to_json().dump() << "\n";
    }
}

std::vector<EvalRecord> read_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open records: " + path);
    }
    std::vector<EvalRecord> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (obj.is_discarded()) {
            throw Error(path + ":" + std::to_string(line_no) + ": malformed record");
        }
        records.push_back(EvalRecord::from_json(obj));
    }
    return records;
}

std::string format_report(const std::vector<EvalRecord>& records) {
    std::ostringstream out;
    out << "evaluation report\n";
    out << "AUC is computed on hallucination scores (1 - similarity for similarity-style "
           "methods, raw inconsistency for selfcheck): higher = more hallucinated.\n\n";
    out << "task        forward       method              n     rate    AUC     B-ACC   "
           "TP    TN    FP    FN\n";

    for (const auto& [key, report] : fold_groups(records)) {
        char line[256];
        std::snprintf(line, sizeof(line),
                      "%-11s %-13s %-19s %-5zu %-7s %-7s %-7s %-5zu %-5zu %-5zu %-5zu\n",
                      key.task.c_str(), key.forward_backend.c_str(), key.method.c_str(),
                      report.n_items, format_double(report.hallucination_rate).c_str(),
                      report.auc ? format_double(*report.auc).c_str() : "-",
                      (format_double(report.balanced_accuracy) +
                       (report.balanced ? "" : "*"))
                          .c_str(),
                      report.counts.tp, report.counts.tn, report.counts.fp, report.counts.fn);
        out << line;
    }
    out << "\n(*) plain accuracy: labels were single-class, AUC omitted.\n";
    out << "\nreference points from published large-scale runs (context only, never asserted):\n";
    for (const auto& point : kReferencePoints) {
        out << "  " << point.setting << ": " << point.metric << " = "
            << format_double(point.value) << "\n";
    }
    return out.str();
}

json report_json(const std::vector<EvalRecord>& records) {
    json groups = json::array();
    for (const auto& [key, report] : fold_groups(records)) {
        json group{
            {"task", key.task},
            {"forward_backend", key.forward_backend},
            {"method", key.method},
            {"n_items", report.n_items},
            {"hallucination_rate", report.hallucination_rate},
            {"balanced_accuracy", report.balanced_accuracy},
            {"balanced", report.balanced},
            {"counts",
             {{"tp", report.counts.tp},
              {"tn", report.counts.tn},
              {"fp", report.counts.fp},
              {"fn", report.counts.fn}}},
        };
        group["auc"] = report.auc ? json(*report.auc) : json(nullptr);
        groups.push_back(std::move(group));
    }
    json footer = json::array();
    for (const auto& point : kReferencePoints) {
        footer.push_back({{"setting", point.setting},
                          {"metric", point.metric},
                          {"value", point.value}});
    }
    return json{
        {"schema_version", 1},
        {"score_orientation",
         "AUC on hallucination scores; higher = more hallucinated"},
        {"groups", groups},
        {"reference_footer", footer},
    };
}

std::string k_series_csv(const std::vector<EvalRecord>& records) {
    // Collect interrogate@k=N methods.
    std::set<size_t> ks;
    for (const auto& name : method_names(records)) {
        if (text::starts_with(name, "interrogate@k=")) {
            ks.insert(static_cast<size_t>(std::stoul(name.substr(14))));
        }
    }
    if (ks.empty()) return {};

    std::ostringstream out;
    out << "task,forward_backend,k,auc,b_acc\n";
    const auto groups = fold_groups(records);
    for (const auto& [key, report] : groups) {
        if (!text::starts_with(key.method, "interrogate@k=")) continue;
        const size_t k = std::stoul(key.method.substr(14));
        out << key.task << "," << key.forward_backend << "," << k << ","
            << (report.auc ? std::to_string(*report.auc) : std::string{}) << ","
            << std::to_string(report.balanced_accuracy) << "\n";
    }
    return out.str();
}

int cmd_evaluate(const EvaluateArgs& args, const RunConfig& config, BackendRegistry& registry) {
    try {
        const std::vector<EvalRecord> records = run_evaluation(args, config, registry);
        if (records.empty()) {
            throw Error("evaluation produced no records (check tasks and --limit)");
        }

        std::filesystem::create_directories(config.output_dir);
        const std::filesystem::path out_dir(config.output_dir);
        write_records((out_dir / "records.jsonl").string(), records);
        {
            std::ofstream report_file(out_dir / "report.json", std::ios::trunc);
            report_file << report_json(records).dump(2) << "\n";
        }
        const std::string csv = k_series_csv(records);
        if (!csv.empty()) {
            std::ofstream csv_file(out_dir / "k_series.csv", std::ios::trunc);
            csv_file << csv;
        }
        {
            // Timestamps live here, not in the primary outputs, so reruns
            // with the same seed and cache stay byte-identical.
            json meta{
                {"created_at", iso_utc_now()},
                {"base_seed", config.base_seed},
                {"k", config.detector.k},
                {"tau", config.detector.tau},
                {"records", records.size()},
            };
            std::ofstream meta_file(out_dir / "run_meta.json", std::ios::trunc);
            meta_file << meta.dump(2) << "\n";
        }
        std::cout << format_report(records);
        std::cout << "\nwrote " << (out_dir / "records.jsonl").string() << " ("
                  << records.size() << " records)\n";
        return 0;
    } catch (const std::exception& ex) {
        std::cerr << "evaluate: " << ex.what() << "\n";
        return 2;
    }
}

int cmd_calibrate(const CalibrateArgs& args, const RunConfig& config, BackendRegistry& registry) {
    try {
        std::ifstream in(args.pairs_path);
        if (!in) {
            throw ConfigError("cannot open pairs file: " + args.pairs_path);
        }
        std::vector<std::pair<std::string, std::string>> similar;
        std::vector<std::pair<std::string, std::string>> dissimilar;
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (text::trim(line).empty()) continue;
            const std::string where = args.pairs_path + ":" + std::to_string(line_no);
            json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
            if (obj.is_discarded() || !obj.contains("text_a") || !obj.contains("text_b") ||
                !obj.contains("label")) {
                throw ConfigError(where + ": expected {text_a, text_b, label}");
            }
            const std::string label = obj["label"].get<std::string>();
            auto pair = std::make_pair(obj["text_a"].get<std::string>(),
                                       obj["text_b"].get<std::string>());
            if (label == "similar") {
                similar.push_back(std::move(pair));
            } else if (label == "dissimilar") {
                dissimilar.push_back(std::move(pair));
            } else {
                throw ConfigError(where + ": label must be similar or dissimilar");
            }
        }
        auto embedder = registry.embedder(config.detector.embedding_backend);
        const double threshold = calibrate_threshold(similar, dissimilar, *embedder);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", threshold);
        std::cout << buf << "\n";
        return 0;
    } catch (const std::exception& ex) {
        std::cerr << "calibrate: " << ex.what() << "\n";
        return 2;
    }
}

int cmd_report(const ReportArgs& args) {
    try {
        const std::vector<EvalRecord> records = read_records(args.records_path);
        if (records.empty()) {
            throw Error("records file is empty: " + args.records_path);
        }
        std::cout << format_report(records);
        const std::string csv = k_series_csv(records);
        if (!csv.empty()) {
            const std::filesystem::path dir =
                args.output_dir.empty()
                    ? std::filesystem::path(args.records_path).parent_path()
                    : std::filesystem::path(args.output_dir);
            std::filesystem::create_directories(
                dir.empty() ? std::filesystem::path(".") : dir);
            const std::filesystem::path csv_path =
                (dir.empty() ? std::filesystem::path(".") : dir) / "k_series.csv";
            std::ofstream csv_file(csv_path, std::ios::trunc);
            csv_file << csv;
            std::cout << "\nwrote " << csv_path.string() << "\n";
        } else {
            std::cout << "\n(no interrogate@k=N sweep methods in the records; "
                         "no k-series emitted)\n";
        }
        return 0;
    } catch (const std::exception& ex) {
        std::cerr << "report: " << ex.what() << "\n";
        return 2;
    }
}

}  // namespace queryback
