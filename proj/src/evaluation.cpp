#include "queryback/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "queryback/core.hpp"
#include "queryback/error.hpp"
#include "queryback/text.hpp"

namespace queryback {

using nlohmann::json;

std::vector<DatasetRecord> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open dataset: " + path);
    }
    std::vector<DatasetRecord> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (obj.is_discarded() || !obj.is_object()) {
            throw ConfigError(where + ": not a JSON object");
        }
        DatasetRecord record;
        if (!obj.contains("task") || !obj["task"].is_string()) {
            throw ConfigError(where + ": missing \"task\"");
        }
        record.task = task_from_string(obj["task"].get<std::string>());
        if (!obj.contains("id") || !obj["id"].is_string()) {
            throw ConfigError(where + ": missing \"id\"");
        }
        record.id = obj["id"].get<std::string>();
        if (!obj.contains("query_fields") || !obj["query_fields"].is_object()) {
            throw ConfigError(where + ": missing \"query_fields\" object");
        }
        for (const auto& [key, value] : obj["query_fields"].items()) {
            record.query_fields[key] =
                value.is_string() ? value.get<std::string>() : value.dump();
        }
        if (!obj.contains("truth_fields") || !obj["truth_fields"].is_object()) {
            throw ConfigError(where + ": missing \"truth_fields\" object");
        }
        record.truth_fields = obj["truth_fields"];

        const json& truth = record.truth_fields;
        switch (record.task) {
            case TaskKind::Movies:
                if (!truth.contains("cast") || !truth["cast"].is_array() ||
                    truth["cast"].empty()) {
                    throw ConfigError(where + ": movies records need a nonempty truth cast");
                }
                break;
            case TaskKind::Books:
                if (!truth.contains("author") || !truth["author"].is_string() ||
                    !truth.contains("year") || !truth["year"].is_number_integer()) {
                    throw ConfigError(where + ": books records need truth author and year");
                }
                break;
            case TaskKind::Gci:
                if (!truth.contains("capital") || !truth["capital"].is_string() ||
                    truth["capital"].get<std::string>().empty()) {
                    throw ConfigError(where + ": gci records need a truth capital");
                }
                break;
            case TaskKind::Custom:
                break;
        }
        records.push_back(std::move(record));
    }
    return records;
}

namespace {

// Boilerplate markers seen in cast answers; the name list follows the
// earliest one.
const char* const kCastMarkers[] = {
    "included", "includes", "include", "starring", "starred",
    "actors are", "actors were", "actors in", "cast is", "cast was",
    "features", "featured",
};

}  // namespace

std::vector<std::string> extract_names(const std::string& answer) {
    const std::string lowered = text::to_lower(answer);
    size_t list_start = 0;
    size_t best = std::string::npos;
    size_t best_len = 0;
    for (const char* marker : kCastMarkers) {
        const size_t pos = lowered.find(marker);
        if (pos != std::string::npos && (best == std::string::npos || pos < best)) {
            best = pos;
            best_len = std::string(marker).size();
        }
    }
    if (best != std::string::npos) {
        list_start = best + best_len;
        if (list_start < answer.size() && answer[list_start] == ':') ++list_start;
    }

    std::string list = answer.substr(list_start);
    // Unify the separators, then split once.
    for (auto& c : list) {
        if (c == '\n' || c == ';') c = ',';
    }
    size_t pos = 0;
    while ((pos = list.find(" and ", pos)) != std::string::npos) {
        list.replace(pos, 5, " , ");
    }

    std::vector<std::string> names;
    std::set<std::string> seen;
    for (const auto& piece : text::split(list, ",")) {
        std::string name = text::normalize_name(piece);
        if (name.empty()) continue;
        // Guard against whole sentences slipping through when the answer has
        // no recognizable list structure.
        if (std::count(name.begin(), name.end(), ' ') > 5) continue;
        if (seen.insert(name).second) names.push_back(std::move(name));
    }
    return names;
}

MovieVerification verify_movies(const std::string& answer,
                                const std::vector<std::string>& truth_cast) {
    if (truth_cast.empty()) {
        throw ContractViolation("verify_movies: empty truth cast");
    }
    std::set<std::string> truth;
    for (const auto& name : truth_cast) {
        const std::string normalized = text::normalize_name(name);
        if (!normalized.empty()) truth.insert(normalized);
    }
    const std::vector<std::string> extracted_list = extract_names(answer);
    const std::set<std::string> extracted(extracted_list.begin(), extracted_list.end());

    size_t intersection = 0;
    for (const auto& name : extracted) {
        if (truth.count(name)) ++intersection;
    }
    const size_t union_size = truth.size() + extracted.size() - intersection;
    const double iou =
        union_size == 0 ? 0.0
                        : static_cast<double>(intersection) / static_cast<double>(union_size);
    return {iou < 0.8, iou};
}

bool verify_books(const std::string& answer, const std::string& truth_author, int truth_year) {
    if (text::trim(truth_author).empty()) {
        throw ContractViolation("verify_books: empty truth author");
    }
    const std::string normalized_answer = text::normalize_name(answer);
    const std::string normalized_author = text::normalize_name(truth_author);
    const bool author_ok = text::contains(normalized_answer, normalized_author);
    const bool year_ok = text::contains(answer, std::to_string(truth_year));
    return !(author_ok && year_ok);
}

bool verify_gci(const std::string& answer, const std::string& truth_capital) {
    if (text::trim(truth_capital).empty()) {
        throw ContractViolation("verify_gci: empty truth capital");
    }
    return !text::contains(text::normalize_name(answer), text::normalize_name(truth_capital));
}

bool verify_record(const DatasetRecord& record, const std::string& answer) {
    switch (record.task) {
        case TaskKind::Movies: {
            std::vector<std::string> cast;
            for (const auto& name : record.truth_fields["cast"]) {
                cast.push_back(name.get<std::string>());
            }
            return verify_movies(answer, cast).label;
        }
        case TaskKind::Books:
            return verify_books(answer, record.truth_fields["author"].get<std::string>(),
                                record.truth_fields["year"].get<int>());
        case TaskKind::Gci:
            return verify_gci(answer, record.truth_fields["capital"].get<std::string>());
        case TaskKind::Custom:
            throw ContractViolation("no verifier for custom task records");
    }
    throw ContractViolation("no verifier for task");
}

BaselineResult baseline_embed_cosine(const std::string& query, const std::string& answer,
                                     EmbeddingBackend& embedder, double threshold) {
    const double score = cosine_similarity(embedder.embed(query), embedder.embed(answer));
    return {score, score < threshold};
}

std::vector<std::string> split_sentences(const std::string& answer) {
    std::vector<std::string> sentences;
    std::string current;
    for (size_t i = 0; i < answer.size(); ++i) {
        const char c = answer[i];
        current.push_back(c);
        if (c == '.' || c == '!' || c == '?') {
            // Do not break on single-letter initials ("Mark P. O. Morford").
            const bool initial =
                c == '.' && current.size() >= 2 &&
                std::isupper(static_cast<unsigned char>(current[current.size() - 2])) &&
                (current.size() == 2 ||
                 !std::isalnum(static_cast<unsigned char>(current[current.size() - 3])));
            const bool at_end = i + 1 >= answer.size();
            const bool followed_by_space =
                !at_end && std::isspace(static_cast<unsigned char>(answer[i + 1]));
            if (!initial && (at_end || followed_by_space)) {
                const std::string trimmed = text::trim(current);
                if (!trimmed.empty()) sentences.push_back(trimmed);
                current.clear();
            }
        }
    }
    const std::string rest = text::trim(current);
    if (!rest.empty()) sentences.push_back(rest);
    if (sentences.empty()) {
        const std::string whole = text::trim(answer);
        if (!whole.empty()) sentences.push_back(whole);
    }
    return sentences;
}

BaselineResult baseline_selfcheck(const std::string& query, const std::string& answer,
                                  const PromptSpec& spec, GenerationBackend& forward_backend,
                                  GenerationBackend& judge_backend,
                                  const SelfCheckOptions& options) {
    if (options.n_samples == 0) {
        throw ContractViolation("baseline_selfcheck: n_samples must be >= 1");
    }
    if (text::trim(query).empty() || text::trim(answer).empty()) {
        throw ContractViolation("baseline_selfcheck: empty query or answer");
    }

    const std::string prompt = render_forward(spec, query);
    std::vector<std::string> samples;
    samples.reserve(options.n_samples);
    for (size_t s = 0; s < options.n_samples; ++s) {
        GenerationRequest request;
        request.prompt = prompt;
        request.temperature = options.sample_temperature;
        request.max_tokens = options.max_tokens;
        request.seed =
            text::derive_seed(options.base_seed, "selfcheck-sample:" + forward_backend.id(), s);
        try {
            samples.push_back(truncate_completion(forward_backend.generate(request), spec));
        } catch (const BackendUnavailable&) {
            samples.emplace_back();  // judged as supporting nothing
        } catch (const EmptyGeneration&) {
            samples.emplace_back();
        }
    }

    const std::vector<std::string> sentences = split_sentences(answer);
    double total_inconsistency = 0.0;
    for (size_t i = 0; i < sentences.size(); ++i) {
        size_t unsupported = 0;
        for (size_t j = 0; j < samples.size(); ++j) {
            if (samples[j].empty()) {
                ++unsupported;
                continue;
            }
            GenerationRequest request;
            request.prompt = render_support_judgment(samples[j], sentences[i]);
            request.temperature = judge_backend.default_temperature();
            request.max_tokens = 8;
            request.seed = text::derive_seed(options.base_seed, "selfcheck-judge",
                                             i * options.n_samples + j);
            std::string reply;
            try {
                reply = judge_backend.generate(request);
            } catch (const BackendUnavailable&) {
                ++unsupported;
                continue;
            } catch (const EmptyGeneration&) {
                ++unsupported;
                continue;
            }
            if (!text::starts_with(text::to_lower(text::trim(reply)), "yes")) {
                ++unsupported;  // "no" and anything unparseable
            }
        }
        total_inconsistency +=
            static_cast<double>(unsupported) / static_cast<double>(samples.size());
    }
    const double score = total_inconsistency / static_cast<double>(sentences.size());
    return {score, score > options.threshold};
}

double roc_auc(std::span<const double> scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) {
        throw ContractViolation("roc_auc: scores and labels differ in length");
    }
    if (scores.empty()) {
        throw ContractViolation("roc_auc: empty input");
    }
    size_t n_pos = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) {
            throw ContractViolation("roc_auc: non-finite score");
        }
        if (labels[i]) ++n_pos;
    }
    const size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw UndefinedMetric("roc_auc: labels are single-class");
    }

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Mann-Whitney via the negatives' ascending rank sum: each (pos, neg)
    // pair with score_pos < score_neg contributes 1, ties contribute exactly
    // one half through the group-average ranks. Ranks are half-integers below
    // 2^53, so this is the same exact numerator the pairwise count produces.
    double rank_sum_neg = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (size_t k = i; k <= j; ++k) {
            if (!labels[order[k]]) rank_sum_neg += mean_rank;
        }
        i = j + 1;
    }

    return (rank_sum_neg -
            static_cast<double>(n_neg) * (static_cast<double>(n_neg) + 1.0) / 2.0) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

ConfusionCounts confusion(const std::vector<bool>& verdicts, const std::vector<bool>& labels) {
    if (verdicts.size() != labels.size()) {
        throw ContractViolation("confusion: verdicts and labels differ in length");
    }
    ConfusionCounts counts;
    for (size_t i = 0; i < verdicts.size(); ++i) {
        if (labels[i]) {
            verdicts[i] ? ++counts.tp : ++counts.fn;
        } else {
            verdicts[i] ? ++counts.fp : ++counts.tn;
        }
    }
    return counts;
}

BalancedAccuracy balanced_accuracy(const std::vector<bool>& verdicts,
                                   const std::vector<bool>& labels) {
    if (verdicts.empty()) {
        throw ContractViolation("balanced_accuracy: empty input");
    }
    BalancedAccuracy result;
    result.counts = confusion(verdicts, labels);
    const auto& c = result.counts;
    const size_t n_pos = c.tp + c.fn;
    const size_t n_neg = c.tn + c.fp;
    if (n_pos > 0 && n_neg > 0) {
        const double tpr = static_cast<double>(c.tp) / static_cast<double>(n_pos);
        const double tnr = static_cast<double>(c.tn) / static_cast<double>(n_neg);
        result.value = (tpr + tnr) / 2.0;
        result.balanced = true;
    } else {
        result.value = static_cast<double>(c.tp + c.tn) / static_cast<double>(verdicts.size());
        result.balanced = false;
    }
    return result;
}

double hallucination_rate(const std::vector<bool>& labels) {
    if (labels.empty()) {
        throw ContractViolation("hallucination_rate: empty input");
    }
    size_t positives = 0;
    for (bool label : labels) {
        if (label) ++positives;
    }
    return static_cast<double>(positives) / static_cast<double>(labels.size());
}

double calibrate_threshold(const std::vector<std::pair<std::string, std::string>>& similar_pairs,
                           const std::vector<std::pair<std::string, std::string>>& dissimilar_pairs,
                           EmbeddingBackend& embedder) {
    if (similar_pairs.empty() || dissimilar_pairs.empty()) {
        throw ContractViolation("calibrate_threshold: both pair lists must be nonempty");
    }
    auto pair_similarity = [&](const std::pair<std::string, std::string>& pair) {
        return cosine_similarity(embedder.embed(pair.first), embedder.embed(pair.second));
    };
    std::vector<double> sim_scores;
    std::vector<double> dis_scores;
    for (const auto& pair : similar_pairs) sim_scores.push_back(pair_similarity(pair));
    for (const auto& pair : dissimilar_pairs) dis_scores.push_back(pair_similarity(pair));

    std::vector<double> values = sim_scores;
    values.insert(values.end(), dis_scores.begin(), dis_scores.end());
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());

    auto ba_at = [&](double tau) {
        size_t s_ok = 0;
        for (double s : sim_scores) {
            if (s >= tau) ++s_ok;
        }
        size_t d_ok = 0;
        for (double d : dis_scores) {
            if (d < tau) ++d_ok;
        }
        return 0.5 * (static_cast<double>(s_ok) / static_cast<double>(sim_scores.size()) +
                      static_cast<double>(d_ok) / static_cast<double>(dis_scores.size()));
    };

    // The separator's balanced accuracy is piecewise constant between observed
    // values; each interval (previous value, value] is represented by its
    // upper end, plus the open region above the maximum (bounded by cosine's
    // range).
    struct Interval {
        double lo;
        double hi;
        double ba;
    };
    std::vector<Interval> intervals;
    for (size_t i = 0; i < values.size(); ++i) {
        const double lo = (i == 0) ? -1.0 : values[i - 1];
        intervals.push_back({lo, values[i], ba_at(values[i])});
    }
    if (values.back() < 1.0) {
        intervals.push_back({values.back(), 1.0, ba_at(std::nextafter(values.back(), 2.0))});
    }

    double best_ba = -1.0;
    for (const auto& interval : intervals) {
        best_ba = std::max(best_ba, interval.ba);
    }

    // Merge adjacent optimal intervals, then break ties toward the widest
    // one (lowest wins when widths tie).
    std::vector<Interval> optimal;
    for (const auto& interval : intervals) {
        if (interval.ba != best_ba) continue;
        if (!optimal.empty() && optimal.back().hi == interval.lo) {
            optimal.back().hi = interval.hi;
        } else {
            optimal.push_back(interval);
        }
    }
    const Interval* chosen = &optimal.front();
    for (const auto& interval : optimal) {
        if (interval.hi - interval.lo > chosen->hi - chosen->lo) chosen = &interval;
    }
    return (chosen->lo + chosen->hi) / 2.0;
}

json EvalRecord::to_json() const {
    json methods_json = json::object();
    for (const auto& [name, result] : methods) {
        methods_json[name] = {
            {"score", result.score},
            {"verdict", result.verdict},
            {"higher_is_hallucination", result.higher_is_hallucination},
        };
    }
    return json{
        {"schema_version", 1},
        {"task", to_string(record.task)},
        {"id", record.id},
        {"query_fields", record.query_fields},
        {"truth_fields", record.truth_fields},
        {"query", query},
        {"answer", generated_answer},
        {"forward_backend", forward_backend},
        {"label", label},
        {"methods", methods_json},
    };
}

EvalRecord EvalRecord::from_json(const json& j) {
    EvalRecord record;
    record.record.task = task_from_string(j.at("task").get<std::string>());
    record.record.id = j.at("id").get<std::string>();
    if (j.contains("query_fields")) {
        for (const auto& [key, value] : j.at("query_fields").items()) {
            record.record.query_fields[key] = value.get<std::string>();
        }
    }
    if (j.contains("truth_fields")) record.record.truth_fields = j.at("truth_fields");
    record.query = j.at("query").get<std::string>();
    record.generated_answer = j.at("answer").get<std::string>();
    record.forward_backend = j.value("forward_backend", std::string{});
    record.label = j.at("label").get<bool>();
    for (const auto& [name, value] : j.at("methods").items()) {
        MethodResult result;
        result.score = value.at("score").get<double>();
        result.verdict = value.at("verdict").get<bool>();
        result.higher_is_hallucination = value.value("higher_is_hallucination", false);
        record.methods[name] = result;
    }
    return record;
}

MetricsReport fold_metrics(const std::vector<EvalRecord>& records, const std::string& method) {
    std::vector<double> scores;
    std::vector<bool> verdicts;
    std::vector<bool> labels;
    for (const auto& record : records) {
        auto it = record.methods.find(method);
        if (it == record.methods.end()) continue;
        // Orient every method like a similarity for AUC: lower = more
        // hallucinated. AUC is invariant under the sign flip.
        scores.push_back(it->second.higher_is_hallucination ? -it->second.score
                                                            : it->second.score);
        verdicts.push_back(it->second.verdict);
        labels.push_back(record.label);
    }
    if (labels.empty()) {
        throw ContractViolation("fold_metrics: no records carry method " + method);
    }
    MetricsReport report;
    report.n_items = labels.size();
    report.hallucination_rate = hallucination_rate(labels);
    try {
        report.auc = roc_auc(scores, labels);
    } catch (const UndefinedMetric&) {
        report.auc.reset();  // single-class: report accuracy only
    }
    const BalancedAccuracy ba = balanced_accuracy(verdicts, labels);
    report.balanced_accuracy = ba.value;
    report.balanced = ba.balanced;
    report.counts = ba.counts;
    return report;
}

std::vector<std::string> method_names(const std::vector<EvalRecord>& records) {
    std::set<std::string> names;
    for (const auto& record : records) {
        for (const auto& [name, result] : record.methods) names.insert(name);
    }
    return {names.begin(), names.end()};
}

}  // namespace queryback
