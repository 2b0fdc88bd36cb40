#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "queryback/backends.hpp"
#include "queryback/prompting.hpp"

namespace queryback {

/// One benchmark item: the fields that build the query and the ground truth
/// the task verifier checks against.
struct DatasetRecord {
    TaskKind task = TaskKind::Movies;
    std::string id;
    std::map<std::string, std::string> query_fields;
    nlohmann::json truth_fields;  // per-task schema, validated on load
};

/// Loads line-delimited records (one JSON object per line) and validates the
/// per-task truth schema. Errors carry the file name and line number.
std::vector<DatasetRecord> load_dataset(const std::string& path);

/// --- task verifiers -------------------------------------------------------

struct MovieVerification {
    bool label = false;  // true = hallucination
    double iou = 0.0;
};

/// Extracts person names from the answer (boilerplate prefixes removed, split
/// on commas/"and"/newlines, full names normalized), computes intersection
/// over union against the truth cast, and flags IOU strictly below 0.8.
MovieVerification verify_movies(const std::string& answer,
                                const std::vector<std::string>& truth_cast);

/// Names extracted by the movies verifier; exposed for tests.
std::vector<std::string> extract_names(const std::string& answer);

/// Not a hallucination only when the normalized author name appears in the
/// answer AND the exact year string appears.
bool verify_books(const std::string& answer, const std::string& truth_author, int truth_year);

/// Not a hallucination only when the normalized capital name appears.
bool verify_gci(const std::string& answer, const std::string& truth_capital);

/// Dispatches on record.task; returns true for hallucination.
bool verify_record(const DatasetRecord& record, const std::string& answer);

/// --- baselines ------------------------------------------------------------

struct BaselineResult {
    double score = 0.0;
    bool verdict = false;
};

/// Query-vs-answer embedding cosine; hallucination when below the threshold.
BaselineResult baseline_embed_cosine(const std::string& query, const std::string& answer,
                                     EmbeddingBackend& embedder, double threshold);

struct SelfCheckOptions {
    size_t n_samples = 4;
    double sample_temperature = 1.0;
    double threshold = 0.5;
    int max_tokens = 256;
    std::uint64_t base_seed = 0;
};

/// Consistency-sampling baseline: draws stochastic answers to the same
/// forward prompt, asks the judge backend whether each sentence of the answer
/// is supported by each sample, and averages the unsupported fractions.
/// Higher score = more inconsistent; verdict = score > threshold.
/// Unparseable judge output counts as unsupported.
BaselineResult baseline_selfcheck(const std::string& query, const std::string& answer,
                                  const PromptSpec& spec, GenerationBackend& forward_backend,
                                  GenerationBackend& judge_backend,
                                  const SelfCheckOptions& options);

/// Sentence split used by the self-check baseline; exposed for tests.
std::vector<std::string> split_sentences(const std::string& answer);

/// --- metrics ---------------------------------------------------------------

/// AUC as the pairwise ranking probability with ties at one half, oriented so
/// that hallucinations ("positives") are expected to carry LOWER scores
/// (similarity-like inputs): P(score_pos < score_neg) + 0.5 P(equal).
/// Throws UndefinedMetric when labels are single-class.
double roc_auc(std::span<const double> scores, const std::vector<bool>& labels);

struct ConfusionCounts {
    size_t tp = 0;
    size_t tn = 0;
    size_t fp = 0;
    size_t fn = 0;
};

ConfusionCounts confusion(const std::vector<bool>& verdicts, const std::vector<bool>& labels);

struct BalancedAccuracy {
    double value = 0.0;
    bool balanced = true;  // false: single-class labels, value is plain accuracy
    ConfusionCounts counts;
};

BalancedAccuracy balanced_accuracy(const std::vector<bool>& verdicts,
                                   const std::vector<bool>& labels);

/// Fraction of true labels.
double hallucination_rate(const std::vector<bool>& labels);

/// Sweeps every achievable cut over the pair similarities and returns the
/// threshold maximizing the separator's balanced accuracy (classified
/// "similar" when cosine >= threshold). Ties resolve to the midpoint of the
/// widest optimal interval (lowest interval when widths tie as well).
double calibrate_threshold(const std::vector<std::pair<std::string, std::string>>& similar_pairs,
                           const std::vector<std::pair<std::string, std::string>>& dissimilar_pairs,
                           EmbeddingBackend& embedder);

/// --- aggregate report ------------------------------------------------------

struct MethodResult {
    double score = 0.0;
    bool verdict = false;
    // Score orientation, recorded per method so the metrics fold can line all
    // methods up. The report normalizes everything to hallucination scores
    // (1 - similarity for similarity methods, raw inconsistency otherwise).
    bool higher_is_hallucination = false;
};

struct EvalRecord {
    DatasetRecord record;
    std::string query;
    std::string generated_answer;
    std::string forward_backend;
    bool label = false;  // true = hallucination per the task verifier
    std::map<std::string, MethodResult> methods;

    nlohmann::json to_json() const;
    static EvalRecord from_json(const nlohmann::json& j);
};

struct MetricsReport {
    size_t n_items = 0;
    double hallucination_rate = 0.0;
    std::optional<double> auc;  // absent when labels are single-class
    double balanced_accuracy = 0.0;
    bool balanced = true;
    ConfusionCounts counts;
};

/// Folds one method's scores and verdicts over a stably ordered record list.
MetricsReport fold_metrics(const std::vector<EvalRecord>& records, const std::string& method);

/// Methods present across the records, sorted.
std::vector<std::string> method_names(const std::vector<EvalRecord>& records);

}  // namespace queryback
