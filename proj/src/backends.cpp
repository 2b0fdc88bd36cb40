#include "queryback/backends.hpp"

#include <algorithm>
#include <cmath>

#include "queryback/error.hpp"

namespace queryback {

std::vector<double> softmax_probabilities(std::span<const double> logits, double temperature) {
    if (logits.empty()) {
        throw ContractViolation("softmax: empty logits");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw ContractViolation("softmax: temperature must be positive and finite");
    }
    for (double z : logits) {
        if (!std::isfinite(z)) {
            throw ContractViolation("softmax: non-finite logit");
        }
    }
    const double z_max = *std::max_element(logits.begin(), logits.end());
    std::vector<double> probs(logits.size());
    double denom = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp((logits[i] - z_max) / temperature);
        denom += probs[i];
    }
    for (double& p : probs) p /= denom;
    return probs;
}

size_t softmax_sample(std::span<const double> logits, double temperature,
                      std::mt19937_64& rng) {
    const std::vector<double> probs = softmax_probabilities(logits, temperature);
    // Inverse-CDF draw from a uniform in [0, 1). Avoids std::discrete_distribution,
    // whose output is not pinned across standard library implementations.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return probs.size() - 1;
}

}  // namespace queryback
