#pragma once

#include <span>
#include <string>
#include <vector>

namespace queryback {

/// D-dimensional real vector produced by an embedding backend. All entries
/// must be finite; dimension must agree between vectors compared in one call.
struct EmbeddingVector {
    std::vector<double> values;

    size_t dimension() const { return values.size(); }
};

/// How the per-reconstruction similarities are folded into one score.
/// Average is the method default; Maximum is the ablation variant.
enum class AggregationMode {
    Average,
    Maximum,
};

AggregationMode aggregation_from_string(const std::string& s);
std::string to_string(AggregationMode mode);

/// Cosine similarity (u.v)/(|u||v|) in [-1, 1]. Scores are computed in
/// 64-bit reals throughout.
///
/// Throws ContractViolation on dimension mismatch or non-finite entries, and
/// DegenerateInput when either vector has zero norm (a zero embedding signals
/// an upstream backend fault, not a similarity of zero).
double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

/// Arithmetic mean or maximum of a nonempty sequence of finite similarities.
double aggregate_similarities(std::span<const double> sims, AggregationMode mode);

/// Linear temperature ramp for the backward passes: entry i is
/// t0 + (1 - t0)/k * i for 0 <= i < k, so the highest temperature stays
/// strictly below 1 whenever t0 < 1.
///
/// Requires 0 < t0 <= 1 and k >= 1.
std::vector<double> temperature_schedule(double t0, size_t k);

}  // namespace queryback
