#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "queryback/backends.hpp"
#include "queryback/core.hpp"
#include "queryback/prompting.hpp"

namespace queryback {

/// Knobs of the detection algorithm. Defaults follow the reference setup:
/// five backward passes per model, threshold 0.91, averaged scores, variable
/// temperature ramp on.
struct DetectorConfig {
    size_t k = 5;
    double tau = 0.91;
    AggregationMode aggregation = AggregationMode::Average;
    bool variable_temperature = true;
    std::vector<std::string> backward_backends;
    std::string embedding_backend;
    std::uint64_t base_seed = 0;
    int max_tokens_forward = 256;
    int max_tokens_backward = 64;
    size_t parallelism = 1;
};

void validate(const DetectorConfig& config);

/// One backward pass: which backend ran it, at which pass index and
/// temperature, with which derived seed, and what it produced. `text` stays
/// empty when the pass failed; `error` says why.
struct ReconstructionRecord {
    std::string backend_id;
    size_t pass_index = 0;
    double temperature = 0.0;
    std::uint64_t seed = 0;
    std::string text;
    std::string error;
};

/// The full result of interrogating one (query, answer) pair. Immutable once
/// produced; safe to share across threads.
struct DetectionOutcome {
    std::string query;
    std::string answer;
    std::uint64_t forward_seed = 0;
    std::vector<ReconstructionRecord> reconstructions;
    std::vector<double> similarities;
    double score = 0.0;
    bool verdict = false;  // true = hallucination
    DetectorConfig config;

    nlohmann::json to_json() const;

    /// One line of the line-delimited outcome record format (schema_version 1).
    std::string to_jsonl() const;
};

/// Detects hallucinations by reconstructing the query from the answer through
/// reversed few-shot prompts and scoring reconstruction fidelity in embedding
/// space: generate the answer, run k backward passes per backward model along
/// the temperature ramp, embed, average cosine similarities against the
/// original query, and compare with tau.
class Detector {
public:
    Detector(DetectorConfig config,
             std::vector<std::shared_ptr<GenerationBackend>> backward_backends,
             std::shared_ptr<EmbeddingBackend> embedder);

    const DetectorConfig& config() const { return config_; }

    /// Runs the full pipeline, answer generation included. Throws
    /// EmptyGeneration when the forward pass produces nothing (an empty
    /// answer cannot be interrogated) and DetectionInfeasible when every
    /// backward pass fails at transport level or the embedder is down.
    DetectionOutcome detect(const std::string& query, const PromptSpec& spec,
                            GenerationBackend& forward_backend);

    /// Same pipeline with a pre-generated answer (evaluation harnesses supply
    /// cached answers so forward and detection decouple).
    DetectionOutcome detect_given_answer(const std::string& query, const std::string& answer,
                                         const PromptSpec& spec);

    /// The k * |backward_backends| reconstruction passes, tagged with
    /// backend, pass index, temperature, and seed. Partial transport failures
    /// come back as empty-text records; if every pass fails at transport
    /// level the detection is infeasible.
    std::vector<ReconstructionRecord> reconstruct_queries(const std::string& answer,
                                                          const PromptSpec& spec);

    /// Embeds the query once and each reconstruction once; an empty
    /// reconstruction contributes similarity zero (a degenerate
    /// reconstruction is itself evidence of inconsistency). Returns the
    /// per-reconstruction similarities and the aggregate score.
    std::pair<std::vector<double>, double> score(
        const std::string& query, const std::vector<ReconstructionRecord>& reconstructions);

private:
    DetectorConfig config_;
    std::vector<std::shared_ptr<GenerationBackend>> backward_backends_;
    std::shared_ptr<EmbeddingBackend> embedder_;
};

/// Seed for backward pass i on `backend_id`, derived from the run's base
/// seed. Recorded in the outcome so runs can be replayed.
std::uint64_t backward_pass_seed(std::uint64_t base_seed, const std::string& backend_id,
                                 size_t pass_index);

/// Seed for the forward call on `backend_id`.
std::uint64_t forward_seed(std::uint64_t base_seed, const std::string& backend_id);

}  // namespace queryback
