#include "queryback/core.hpp"

#include <algorithm>
#include <cmath>

#include "queryback/error.hpp"

namespace queryback {

AggregationMode aggregation_from_string(const std::string& s) {
    if (s == "average" || s == "avg") return AggregationMode::Average;
    if (s == "maximum" || s == "max") return AggregationMode::Maximum;
    throw ContractViolation("unknown aggregation mode: " + s);
}

std::string to_string(AggregationMode mode) {
    return mode == AggregationMode::Average ? "average" : "maximum";
}

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dimension() == 0 || v.dimension() == 0) {
        throw ContractViolation("cosine_similarity: empty vector");
    }
    if (u.dimension() != v.dimension()) {
        throw ContractViolation("cosine_similarity: dimension mismatch (" +
                                std::to_string(u.dimension()) + " vs " +
                                std::to_string(v.dimension()) + ")");
    }
    double dot = 0.0;
    double norm_u = 0.0;
    double norm_v = 0.0;
    for (size_t i = 0; i < u.values.size(); ++i) {
        const double a = u.values[i];
        const double b = v.values[i];
        if (!std::isfinite(a) || !std::isfinite(b)) {
            throw ContractViolation("cosine_similarity: non-finite entry at index " +
                                    std::to_string(i));
        }
        dot += a * b;
        norm_u += a * a;
        norm_v += b * b;
    }
    if (norm_u == 0.0 || norm_v == 0.0) {
        throw DegenerateInput("cosine_similarity: zero-norm vector");
    }
    return dot / (std::sqrt(norm_u) * std::sqrt(norm_v));
}

double aggregate_similarities(std::span<const double> sims, AggregationMode mode) {
    if (sims.empty()) {
        throw ContractViolation("aggregate_similarities: empty input");
    }
    for (double s : sims) {
        if (!std::isfinite(s)) {
            throw ContractViolation("aggregate_similarities: non-finite similarity");
        }
    }
    if (mode == AggregationMode::Maximum) {
        return *std::max_element(sims.begin(), sims.end());
    }
    double sum = 0.0;
    for (double s : sims) sum += s;
    return sum / static_cast<double>(sims.size());
}

std::vector<double> temperature_schedule(double t0, size_t k) {
    if (!(t0 > 0.0) || !(t0 <= 1.0) || !std::isfinite(t0)) {
        throw ContractViolation("temperature_schedule: t0 must be in (0, 1]");
    }
    if (k == 0) {
        throw ContractViolation("temperature_schedule: k must be >= 1");
    }
    std::vector<double> temps(k);
    const double step = (1.0 - t0) / static_cast<double>(k);
    for (size_t i = 0; i < k; ++i) {
        temps[i] = t0 + step * static_cast<double>(i);
    }
    return temps;
}

}  // namespace queryback
