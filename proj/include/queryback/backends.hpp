#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "queryback/core.hpp"

namespace queryback {

/// A single text-generation call: prompt plus sampling parameters.
struct GenerationRequest {
    std::string prompt;
    double temperature = 1.0;
    int max_tokens = 256;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> stop_sequences;
};

/// Text generator behind a uniform interface. Simulated implementations are
/// deterministic given (prompt, temperature, seed); HTTP implementations make
/// no determinism promise. Implementations must be safe to call from multiple
/// threads at once.
class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;

    /// Stable identifier used in cache keys and reports.
    virtual const std::string& id() const = 0;

    /// Default sampling temperature for forward calls on this backend, and
    /// the base of the backward temperature ramp.
    virtual double default_temperature() const = 0;

    /// Returns the completion with stop sequences stripped and trailing
    /// whitespace trimmed. Throws BackendUnavailable when transport keeps
    /// failing after the retry budget, EmptyGeneration when the model returns
    /// nothing (the caller decides the policy).
    virtual std::string generate(const GenerationRequest& request) = 0;
};

/// Text embedder. embed() must return vectors of exactly dimension(), and the
/// simulated embedder is deterministic per input text.
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;

    virtual const std::string& id() const = 0;
    virtual size_t dimension() const = 0;

    /// Throws ContractViolation on empty text, BackendUnavailable on
    /// transport failure.
    virtual EmbeddingVector embed(const std::string& input) = 0;
};

/// Softmax with temperature: P_i = exp(z_i/T) / sum_j exp(z_j/T), computed
/// with max-subtraction. Requires nonempty finite logits and T > 0.
std::vector<double> softmax_probabilities(std::span<const double> logits, double temperature);

/// Samples an index from softmax_probabilities(logits, temperature) using the
/// given generator.
size_t softmax_sample(std::span<const double> logits, double temperature,
                      std::mt19937_64& rng);

}  // namespace queryback
