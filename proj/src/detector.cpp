#include "queryback/detector.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "queryback/error.hpp"
#include "queryback/parallel.hpp"
#include "queryback/text.hpp"

namespace queryback {

using nlohmann::json;

void validate(const DetectorConfig& config) {
    if (config.k == 0) {
        throw ContractViolation("detector: k must be >= 1");
    }
    if (!(config.tau >= -1.0 && config.tau <= 1.0)) {
        throw ContractViolation("detector: tau must be in [-1, 1]");
    }
    if (config.backward_backends.empty()) {
        throw ContractViolation("detector: at least one backward backend is required");
    }
}

std::uint64_t backward_pass_seed(std::uint64_t base_seed, const std::string& backend_id,
                                 size_t pass_index) {
    return text::derive_seed(base_seed, backend_id, pass_index);
}

std::uint64_t forward_seed(std::uint64_t base_seed, const std::string& backend_id) {
    return text::derive_seed(base_seed, "forward:" + backend_id);
}

json DetectionOutcome::to_json() const {
    json recs = json::array();
    for (const auto& r : reconstructions) {
        recs.push_back({
            {"backend_id", r.backend_id},
            {"pass_index", r.pass_index},
            {"temperature", r.temperature},
            {"seed", r.seed},
            {"text", r.text},
            {"error", r.error},
        });
    }
    return json{
        {"schema_version", 1},
        {"query", query},
        {"answer", answer},
        {"forward_seed", forward_seed},
        {"reconstructions", recs},
        {"similarities", similarities},
        {"score", score},
        {"verdict", verdict},
        {"config",
         {
             {"k", config.k},
             {"tau", config.tau},
             {"aggregation", to_string(config.aggregation)},
             {"variable_temperature", config.variable_temperature},
             {"backward_backends", config.backward_backends},
             {"embedding_backend", config.embedding_backend},
             {"base_seed", config.base_seed},
         }},
    };
}

std::string DetectionOutcome::to_jsonl() const { return to_json().dump(); }

Detector::Detector(DetectorConfig config,
                   std::vector<std::shared_ptr<GenerationBackend>> backward_backends,
                   std::shared_ptr<EmbeddingBackend> embedder)
    : config_(std::move(config)),
      backward_backends_(std::move(backward_backends)),
      embedder_(std::move(embedder)) {
    validate(config_);
    if (backward_backends_.size() != config_.backward_backends.size()) {
        throw ContractViolation("detector: resolved backends do not match the configured ids");
    }
    if (!embedder_) {
        throw ContractViolation("detector: embedding backend is required");
    }
}

std::vector<ReconstructionRecord> Detector::reconstruct_queries(const std::string& answer,
                                                                const PromptSpec& spec) {
    if (text::trim(answer).empty()) {
        throw ContractViolation("reconstruct_queries: empty answer");
    }
    const std::string prompt = render_backward(spec, answer);

    // One flat slot per (backend, pass); order fixed up front so concurrent
    // execution cannot reorder the outcome.
    std::vector<ReconstructionRecord> records(backward_backends_.size() * config_.k);
    for (size_t b = 0; b < backward_backends_.size(); ++b) {
        const auto& backend = backward_backends_[b];
        const std::vector<double> temps =
            config_.variable_temperature
                ? temperature_schedule(backend->default_temperature(), config_.k)
                : std::vector<double>(config_.k, backend->default_temperature());
        for (size_t i = 0; i < config_.k; ++i) {
            ReconstructionRecord& rec = records[b * config_.k + i];
            rec.backend_id = backend->id();
            rec.pass_index = i;
            rec.temperature = temps[i];
            rec.seed = backward_pass_seed(config_.base_seed, backend->id(), i);
        }
    }

    parallel_for(records.size(), config_.parallelism, [&](size_t idx) {
        ReconstructionRecord& rec = records[idx];
        GenerationBackend& backend = *backward_backends_[idx / config_.k];
        GenerationRequest request;
        request.prompt = prompt;
        request.temperature = rec.temperature;
        request.max_tokens = config_.max_tokens_backward;
        request.seed = rec.seed;
        try {
            rec.text = truncate_completion(backend.generate(request), spec);
        } catch (const BackendUnavailable& ex) {
            rec.error = ex.what();
        } catch (const EmptyGeneration&) {
            // Degenerate reconstruction; scored as similarity zero.
        }
    });

    const bool all_transport_failures =
        std::all_of(records.begin(), records.end(),
                    [](const ReconstructionRecord& r) { return !r.error.empty(); });
    if (all_transport_failures) {
        throw DetectionInfeasible("every reconstruction attempt failed at transport level");
    }
    return records;
}

std::pair<std::vector<double>, double> Detector::score(
    const std::string& query, const std::vector<ReconstructionRecord>& reconstructions) {
    if (reconstructions.empty()) {
        throw ContractViolation("score: no reconstructions");
    }
    EmbeddingVector query_vec;
    try {
        query_vec = embedder_->embed(query);
    } catch (const BackendUnavailable& ex) {
        throw DetectionInfeasible(std::string("embedding backend failed: ") + ex.what());
    }

    std::vector<double> sims(reconstructions.size(), 0.0);
    for (size_t i = 0; i < reconstructions.size(); ++i) {
        const auto& rec = reconstructions[i];
        if (rec.text.empty()) continue;  // failed or empty pass -> 0
        try {
            sims[i] = cosine_similarity(query_vec, embedder_->embed(rec.text));
        } catch (const BackendUnavailable& ex) {
            throw DetectionInfeasible(std::string("embedding backend failed: ") + ex.what());
        }
    }
    const double aggregate = aggregate_similarities(sims, config_.aggregation);
    return {std::move(sims), aggregate};
}

DetectionOutcome Detector::detect(const std::string& query, const PromptSpec& spec,
                                  GenerationBackend& forward_backend) {
    if (text::trim(query).empty()) {
        throw ContractViolation("detect: empty query");
    }
    GenerationRequest request;
    request.prompt = render_forward(spec, query);
    request.temperature = forward_backend.default_temperature();
    request.max_tokens = config_.max_tokens_forward;
    request.seed = forward_seed(config_.base_seed, forward_backend.id());

    const std::string answer = truncate_completion(forward_backend.generate(request), spec);
    if (answer.empty()) {
        throw EmptyGeneration("forward pass produced an empty answer");
    }
    DetectionOutcome outcome = detect_given_answer(query, answer, spec);
    outcome.forward_seed = *request.seed;
    return outcome;
}

DetectionOutcome Detector::detect_given_answer(const std::string& query,
                                               const std::string& answer,
                                               const PromptSpec& spec) {
    if (text::trim(query).empty()) {
        throw ContractViolation("detect_given_answer: empty query");
    }
    if (text::trim(answer).empty()) {
        throw ContractViolation("detect_given_answer: empty answer");
    }
    DetectionOutcome outcome;
    outcome.query = query;
    outcome.answer = answer;
    outcome.config = config_;
    outcome.reconstructions = reconstruct_queries(answer, spec);
    auto [sims, aggregate] = score(query, outcome.reconstructions);
    outcome.similarities = std::move(sims);
    outcome.score = aggregate;
    outcome.verdict = outcome.score < config_.tau;
    return outcome;
}

}  // namespace queryback
