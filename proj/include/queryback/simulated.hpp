#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "queryback/backends.hpp"
#include "queryback/prompting.hpp"

namespace queryback {

/// Failure mode wired into a simulated item.
///
///   None                 - forward emits the canonical answer, backward maps it home.
///   Fabricate            - forward emits another record's answer; the inverse
///                          table maps it to that record's query, not the original.
///   SymmetricHallucinate - forward fabricates, but the fabricated answer maps
///                          back to the original query (hallucination in both
///                          directions; the documented false-negative case).
///   ManyToOne            - the canonical answer is shared by several queries,
///                          so backward passes scatter across the group.
enum class HallucinationMode {
    None,
    Fabricate,
    SymmetricHallucinate,
    ManyToOne,
};

std::string to_string(HallucinationMode mode);

/// Parameters of the seeded benchmark world.
struct WorldSpec {
    std::uint64_t seed = 7;
    size_t items = 200;
    double fraction_none = 0.60;
    double fraction_fabricate = 0.30;
    double fraction_symmetric = 0.05;
    double fraction_many_to_one = 0.05;
    size_t exemplar_count = 3;
    size_t distractor_count = 24;
};

struct WorldItem {
    std::string id;
    std::string title;
    int year = 0;
    std::string query;               // canonical query
    std::string answer;              // canonical (truthful) answer
    std::vector<std::string> cast;   // ground-truth cast behind the answer
    HallucinationMode mode = HallucinationMode::None;
};

/// A weighted completion candidate; one entry of the sampling "vocabulary"
/// the simulated model sees for a lookup key.
struct CompletionCandidate {
    std::string output;
    double logit = 0.0;
};

/// Deterministic fact world backing the simulated backends: a fact table from
/// query keys to answer candidates, an inverse table from answer keys to query
/// candidates, and per-item failure modes. Immutable once built; the fact and
/// inverse tables agree for items in mode None.
class SimulatedWorld {
public:
    static SimulatedWorld benchmark(const WorldSpec& spec);

    const std::vector<WorldItem>& items() const { return items_; }
    const WorldItem* find_item(const std::string& id) const;

    const std::vector<FewShotExemplar>& exemplars() const { return exemplars_; }

    /// Candidates for the forward direction (query key -> answers), or nullptr.
    const std::vector<CompletionCandidate>* forward_candidates(const std::string& query) const;

    /// Candidates for the backward direction (answer key -> queries), or nullptr.
    const std::vector<CompletionCandidate>* backward_candidates(const std::string& answer) const;

    /// Deterministic fallbacks used when a key misses the tables.
    const std::string& fallback_query(std::uint64_t hash) const;
    const std::string& fallback_answer(std::uint64_t hash) const;

private:
    std::vector<WorldItem> items_;
    std::map<std::string, size_t> items_by_id_;
    std::map<std::string, std::vector<CompletionCandidate>> fact_table_;
    std::map<std::string, std::vector<CompletionCandidate>> inverse_table_;
    std::vector<FewShotExemplar> exemplars_;
    std::vector<std::string> distractor_queries_;
    std::vector<std::string> distractor_answers_;
};

/// Simulated completion model. Parses the rendered prompt to find the lead
/// query (forward) or lead answer (backward), looks the key up in the world,
/// and samples one candidate through the temperature softmax. Deterministic
/// given (prompt, temperature, seed), and safe for concurrent use.
class SimulatedModel : public GenerationBackend {
public:
    SimulatedModel(std::string id, std::shared_ptr<const SimulatedWorld> world,
                   double default_temperature = 0.6, std::uint64_t persona_salt = 0,
                   std::string query_label = "Query:", std::string answer_label = "Answer:");

    const std::string& id() const override { return id_; }
    double default_temperature() const override { return default_temperature_; }
    std::string generate(const GenerationRequest& request) override;

    /// Total generate() invocations; resume tests use it to prove the cache
    /// absorbed repeat work.
    std::uint64_t call_count() const { return calls_.load(); }

private:
    std::string id_;
    std::shared_ptr<const SimulatedWorld> world_;
    double default_temperature_;
    std::uint64_t persona_salt_;
    std::string query_label_;
    std::string answer_label_;
    std::atomic<std::uint64_t> calls_{0};
};

/// Deterministic embedding backend: hashed character-trigram frequency
/// vectors, L2-normalized, fixed dimension. Order-sensitive and graded, which
/// is what threshold logic needs offline.
class HashedNgramEmbedder : public EmbeddingBackend {
public:
    explicit HashedNgramEmbedder(std::string id = "sim-embed", size_t dimension = 256);

    const std::string& id() const override { return id_; }
    size_t dimension() const override { return dimension_; }
    EmbeddingVector embed(const std::string& input) override;

    std::uint64_t call_count() const { return calls_.load(); }

private:
    std::string id_;
    size_t dimension_;
    std::atomic<std::uint64_t> calls_{0};
};

}  // namespace queryback
