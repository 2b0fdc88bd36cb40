#pragma once

#include <string>
#include <vector>

#include "queryback/config.hpp"
#include "queryback/detector.hpp"
#include "queryback/evaluation.hpp"

namespace queryback {

/// --- detect ----------------------------------------------------------------

struct DetectArgs {
    std::string query;
    std::string answer;  // empty: run the forward pass too
    std::string task;    // task entry to take the prompt spec from; empty = first
    bool json_output = false;
};

/// Exit code 0 = not hallucination, 1 = hallucination, 2 = infeasible/error.
int cmd_detect(const DetectArgs& args, const RunConfig& config, BackendRegistry& registry);

/// --- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
    std::vector<std::string> methods;  // empty = config's method list
    std::vector<std::string> tasks;    // task-kind filter; empty = all tasks
    size_t limit = 0;                  // stop after N records (0 = all); partial
                                       // runs resume through the cache
};

/// Runs the full evaluation in-process and returns the per-item records in
/// dataset order. Throws on configuration or backend errors.
std::vector<EvalRecord> run_evaluation(const EvaluateArgs& args, const RunConfig& config,
                                       BackendRegistry& registry);

/// run_evaluation + records/report/meta files under config.output_dir.
/// Exit code 0 = success, 2 = error.
int cmd_evaluate(const EvaluateArgs& args, const RunConfig& config, BackendRegistry& registry);

/// --- calibrate ---------------------------------------------------------------

struct CalibrateArgs {
    std::string pairs_path;  // JSONL: {"text_a":..., "text_b":..., "label":"similar"|"dissimilar"}
};

int cmd_calibrate(const CalibrateArgs& args, const RunConfig& config, BackendRegistry& registry);

/// --- report ------------------------------------------------------------------

struct ReportArgs {
    std::string records_path;
    std::string output_dir;  // where the CSV series lands; empty = records' directory
};

int cmd_report(const ReportArgs& args);

/// --- shared helpers ----------------------------------------------------------

void write_records(const std::string& path, const std::vector<EvalRecord>& records);
std::vector<EvalRecord> read_records(const std::string& path);

/// Human-readable metrics table grouped per task, forward backend and method.
std::string format_report(const std::vector<EvalRecord>& records);

/// Machine-readable version of the same fold.
nlohmann::json report_json(const std::vector<EvalRecord>& records);

/// Plot-ready AUC/B-ACC series against k, from "interrogate@k=N" method
/// entries. Columns: task,forward_backend,k,auc,b_acc. Empty when the records
/// carry no sweep methods.
std::string k_series_csv(const std::vector<EvalRecord>& records);

/// Method ids accepted by --methods.
inline constexpr const char* kMethodInterrogate = "interrogate";
inline constexpr const char* kMethodEmbedCosine = "embed-cosine";
inline constexpr const char* kMethodSelfCheck = "selfcheck";

}  // namespace queryback
