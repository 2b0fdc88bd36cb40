#pragma once

// Independent brute-force oracles for the math the library implements. These
// deliberately take the slow, direct route (long-double accumulation, O(n^2)
// pair counting, exhaustive threshold sweeps) and never call the library code
// they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace oracle {

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size() || u.empty()) throw std::invalid_argument("oracle cosine: size");
    long double dot = 0.0L;
    long double nu = 0.0L;
    long double nv = 0.0L;
    for (size_t i = 0; i < u.size(); ++i) {
        dot += static_cast<long double>(u[i]) * v[i];
        nu += static_cast<long double>(u[i]) * u[i];
        nv += static_cast<long double>(v[i]) * v[i];
    }
    return static_cast<double>(dot / (std::sqrt(nu) * std::sqrt(nv)));
}

inline std::vector<double> softmax(const std::vector<double>& logits, double temperature) {
    long double denom = 0.0L;
    for (double z : logits) denom += std::exp(static_cast<long double>(z) / temperature);
    std::vector<double> probs(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) {
        probs[i] = static_cast<double>(
            std::exp(static_cast<long double>(logits[i]) / temperature) / denom);
    }
    return probs;
}

inline std::vector<double> temperature_ramp(double t0, size_t k) {
    std::vector<double> temps;
    for (size_t i = 0; i < k; ++i) {
        temps.push_back(t0 + (1.0 - t0) * static_cast<double>(i) / static_cast<double>(k));
    }
    return temps;
}

// Pairwise AUC with hallucinations ("positives") expected to score LOW:
// P(score_pos < score_neg) + 0.5 P(equal).
inline double auc_pairwise(const std::vector<double>& scores, const std::vector<bool>& labels) {
    size_t wins = 0;
    size_t ties = 0;
    size_t pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            ++pairs;
            if (scores[i] < scores[j]) ++wins;
            else if (scores[i] == scores[j]) ++ties;
        }
    }
    if (pairs == 0) throw std::invalid_argument("oracle auc: single-class labels");
    return (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) /
           static_cast<double>(pairs);
}

inline double balanced_accuracy(const std::vector<bool>& verdicts,
                                const std::vector<bool>& labels) {
    size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < verdicts.size(); ++i) {
        if (labels[i]) {
            verdicts[i] ? ++tp : ++fn;
        } else {
            verdicts[i] ? ++fp : ++tn;
        }
    }
    const double tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
    const double tnr = static_cast<double>(tn) / static_cast<double>(tn + fp);
    return (tpr + tnr) / 2.0;
}

// Exhaustive sweep over every achievable cut of "similar iff score >= tau";
// returns the midpoint of the widest optimal interval (lowest on width ties),
// with cosine's [-1, 1] range bounding the open ends.
inline double sweep_threshold(std::vector<double> similar, std::vector<double> dissimilar) {
    std::vector<double> values = similar;
    values.insert(values.end(), dissimilar.begin(), dissimilar.end());
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());

    auto ba = [&](double tau) {
        size_t s = 0;
        for (double v : similar) {
            if (v >= tau) ++s;
        }
        size_t d = 0;
        for (double v : dissimilar) {
            if (v < tau) ++d;
        }
        return 0.5 * (static_cast<double>(s) / similar.size() +
                      static_cast<double>(d) / dissimilar.size());
    };

    struct Region {
        double lo, hi, value;
    };
    std::vector<Region> regions;
    for (size_t i = 0; i < values.size(); ++i) {
        regions.push_back({i == 0 ? -1.0 : values[i - 1], values[i], ba(values[i])});
    }
    if (values.back() < 1.0) {
        regions.push_back({values.back(), 1.0, ba(std::nextafter(values.back(), 2.0))});
    }
    double best = -1.0;
    for (const auto& r : regions) best = std::max(best, r.value);

    std::vector<Region> winners;
    for (const auto& r : regions) {
        if (r.value != best) continue;
        if (!winners.empty() && winners.back().hi == r.lo) {
            winners.back().hi = r.hi;
        } else {
            winners.push_back(r);
        }
    }
    const Region* pick = &winners.front();
    for (const auto& r : winners) {
        if (r.hi - r.lo > pick->hi - pick->lo) pick = &r;
    }
    return (pick->lo + pick->hi) / 2.0;
}

}  // namespace oracle
