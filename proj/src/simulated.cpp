#include "queryback/simulated.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <set>

#include "queryback/error.hpp"
#include "queryback/text.hpp"

namespace queryback {

namespace {

const char* const kTitleAdjectives[] = {
    "Amber",    "Ashen",   "Broken",  "Burning",  "Crimson", "Distant",  "Electric", "Emerald",
    "Fading",   "Fallen",  "Frozen",  "Gilded",   "Hidden",  "Hollow",   "Iron",     "Ivory",
    "Jade",     "Lonely",  "Lost",    "Midnight", "Molten",  "Obsidian", "Pale",     "Quiet",
    "Radiant",  "Restless","Rising",  "Sapphire", "Scarlet", "Shattered","Silent",   "Silver",
    "Sleeping", "Smoldering","Solar", "Stolen",   "Stormy",  "Sunken",   "Twilight", "Velvet",
    "Violet",   "Wandering","Whispering","Wild",  "Winter",  "Wicked",   "Golden",   "Crystal",
};

const char* const kTitleNouns[] = {
    "Anchor",   "Archive", "Ballad",  "Beacon",  "Bridge",  "Canyon",  "Carnival", "Cascade",
    "Citadel",  "Compass", "Corridor","Covenant","Crossing","Crown",   "Current",  "Ember",
    "Falcon",   "Fortress","Garden",  "Harbor",  "Horizon", "Lantern", "Legacy",   "Mariner",
    "Meridian", "Mirage",  "Orchard", "Outpost", "Paradox", "Passage", "Pilgrim",  "Prophecy",
    "Quarry",   "Reckoning","Refuge", "Requiem", "River",   "Sentinel","Shore",    "Sonata",
    "Spire",    "Summit",  "Tempest", "Threshold","Tide",   "Voyage",  "Vigil",    "Zephyr",
};

const char* const kFirstNames[] = {
    "Adrian",  "Alma",    "Bennett", "Bianca",  "Caleb",   "Celia",   "Damian",  "Daphne",
    "Elias",   "Elena",   "Felix",   "Fiona",   "Gideon",  "Greta",   "Hector",  "Helena",
    "Ivan",    "Irene",   "Jasper",  "Jolene",  "Killian", "Kendra",  "Lionel",  "Lydia",
    "Marcus",  "Marina",  "Nolan",   "Nadia",   "Oscar",   "Odette",  "Pascal",  "Paloma",
    "Quentin", "Quinn",   "Rafael",  "Rosalind","Silas",   "Sabine",  "Tobias",  "Thea",
    "Ulric",   "Una",     "Victor",  "Vera",    "Wendell", "Willa",   "Xavier",  "Yvonne",
};

const char* const kLastNames[] = {
    "Ashford",  "Barlow",  "Calloway", "Dunmore",  "Eastman",  "Fairbanks", "Galloway", "Hargrove",
    "Ingram",   "Jennings","Kingsley", "Lockhart", "Merriweather","Northgate","Okafor", "Pemberton",
    "Quimby",   "Radcliffe","Sterling","Thornton", "Underhill","Vance",     "Whitfield","Yardley",
    "Abernathy","Blackwood","Cormack", "Delacroix","Ellsworth","Fontaine",  "Greenfield","Holloway",
    "Iverson",  "Jessup",  "Kavanagh","Larkspur", "Montclair","Norwood",   "Oakhurst", "Prescott",
    "Quintrell","Rosemont","Stanhope","Trevelyan","Umber",    "Vickers",   "Westbrook","Zale",
};

constexpr size_t kAdjectiveCount = std::size(kTitleAdjectives);
constexpr size_t kNounCount = std::size(kTitleNouns);
constexpr size_t kFirstCount = std::size(kFirstNames);
constexpr size_t kLastCount = std::size(kLastNames);

// rng()%n instead of std::uniform_int_distribution: the standard distributions
// are not pinned across library implementations, and world generation must be
// reproducible from the seed alone.
size_t pick(std::mt19937_64& rng, size_t n) { return static_cast<size_t>(rng() % n); }

std::string make_name(std::mt19937_64& rng) {
    return std::string(kFirstNames[pick(rng, kFirstCount)]) + " " +
           kLastNames[pick(rng, kLastCount)];
}

std::vector<std::string> make_cast(std::mt19937_64& rng, size_t count,
                                   const std::set<std::string>* avoid = nullptr) {
    std::vector<std::string> cast;
    std::set<std::string> used;
    while (cast.size() < count) {
        std::string name = make_name(rng);
        if (used.count(name)) continue;
        if (avoid && avoid->count(name)) continue;
        used.insert(name);
        cast.push_back(std::move(name));
    }
    return cast;
}

std::string cast_answer(const std::string& title, int year,
                        const std::vector<std::string>& cast) {
    std::string out = "The cast of " + title + " (" + std::to_string(year) + ") included ";
    for (size_t i = 0; i < cast.size(); ++i) {
        if (i > 0) out += (i + 1 == cast.size()) ? ", and " : ", ";
        out += cast[i];
    }
    out += ".";
    return out;
}

std::string movie_query(const std::string& title, int year) {
    return "What actors played in the " + std::to_string(year) + " movie " + title + "?";
}

// Mild lexical edit standing in for a high-temperature wobble of the backward
// model; stays close to the original in embedding space.
std::string perturb_query(const std::string& query) {
    size_t pos = query.find(" movie ");
    if (pos != std::string::npos) {
        return query.substr(0, pos) + " film " + query.substr(pos + 7);
    }
    if (!query.empty() && query.back() == '?') {
        return query.substr(0, query.size() - 1) + " exactly?";
    }
    return query + " exactly";
}

std::string key_of(const std::string& s) { return text::normalize_basic(s); }

std::string strip_stop_sequences(std::string completion,
                                 const std::vector<std::string>& stops) {
    size_t cut = completion.size();
    for (const auto& stop : stops) {
        if (stop.empty()) continue;
        size_t pos = completion.find(stop);
        if (pos != std::string::npos && pos < cut) cut = pos;
    }
    completion.resize(cut);
    while (!completion.empty() &&
           std::isspace(static_cast<unsigned char>(completion.back()))) {
        completion.pop_back();
    }
    return completion;
}

}  // namespace

std::string to_string(HallucinationMode mode) {
    switch (mode) {
        case HallucinationMode::None: return "none";
        case HallucinationMode::Fabricate: return "fabricate";
        case HallucinationMode::SymmetricHallucinate: return "symmetric";
        case HallucinationMode::ManyToOne: return "many_to_one";
    }
    return "none";
}

const WorldItem* SimulatedWorld::find_item(const std::string& id) const {
    auto it = items_by_id_.find(id);
    return it == items_by_id_.end() ? nullptr : &items_[it->second];
}

const std::vector<CompletionCandidate>* SimulatedWorld::forward_candidates(
    const std::string& query) const {
    auto it = fact_table_.find(key_of(query));
    return it == fact_table_.end() ? nullptr : &it->second;
}

const std::vector<CompletionCandidate>* SimulatedWorld::backward_candidates(
    const std::string& answer) const {
    auto it = inverse_table_.find(key_of(answer));
    return it == inverse_table_.end() ? nullptr : &it->second;
}

const std::string& SimulatedWorld::fallback_query(std::uint64_t hash) const {
    static const std::string kUnknownQuery = "What is this answer about?";
    if (distractor_queries_.empty()) return kUnknownQuery;
    return distractor_queries_[hash % distractor_queries_.size()];
}

const std::string& SimulatedWorld::fallback_answer(std::uint64_t hash) const {
    static const std::string kUnknownAnswer = "There is no reliable record of that.";
    if (distractor_answers_.empty()) return kUnknownAnswer;
    return distractor_answers_[hash % distractor_answers_.size()];
}

SimulatedWorld SimulatedWorld::benchmark(const WorldSpec& spec) {
    if (spec.items == 0) {
        throw ContractViolation("benchmark world needs at least one item");
    }
    const double fraction_sum = spec.fraction_none + spec.fraction_fabricate +
                                spec.fraction_symmetric + spec.fraction_many_to_one;
    if (std::abs(fraction_sum - 1.0) > 1e-9) {
        throw ContractViolation("benchmark mode fractions must sum to 1");
    }

    SimulatedWorld world;
    std::mt19937_64 rng(text::mix64(spec.seed + 0x9e3779b97f4a7c15ULL));

    const size_t n_fabricate =
        static_cast<size_t>(std::llround(spec.fraction_fabricate * static_cast<double>(spec.items)));
    const size_t n_symmetric =
        static_cast<size_t>(std::llround(spec.fraction_symmetric * static_cast<double>(spec.items)));
    const size_t n_many_to_one =
        static_cast<size_t>(std::llround(spec.fraction_many_to_one * static_cast<double>(spec.items)));
    if (n_fabricate + n_symmetric + n_many_to_one > spec.items) {
        throw ContractViolation("benchmark mode fractions overflow the item count");
    }
    const size_t n_none = spec.items - n_fabricate - n_symmetric - n_many_to_one;

    std::vector<HallucinationMode> modes;
    modes.insert(modes.end(), n_none, HallucinationMode::None);
    modes.insert(modes.end(), n_fabricate, HallucinationMode::Fabricate);
    modes.insert(modes.end(), n_symmetric, HallucinationMode::SymmetricHallucinate);
    modes.insert(modes.end(), n_many_to_one, HallucinationMode::ManyToOne);
    for (size_t i = modes.size(); i > 1; --i) {
        std::swap(modes[i - 1], modes[pick(rng, i)]);
    }

    std::set<std::string> used_titles;
    auto fresh_title = [&]() {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            std::string title = std::string(kTitleAdjectives[pick(rng, kAdjectiveCount)]) + " " +
                                kTitleNouns[pick(rng, kNounCount)];
            if (used_titles.insert(title).second) return title;
        }
        throw Error("benchmark world: exhausted unique titles; reduce item count");
    };
    auto fresh_year = [&]() { return 1950 + static_cast<int>(pick(rng, 70)); };

    // Logit gaps control how often backward sampling escapes the canonical
    // query as the temperature ramp rises. The well-grounded inverse mapping
    // gets a wide gap (escapes are rare even at the top of the ramp); the
    // symmetric-hallucination mapping gets a narrow one.
    constexpr double kCanonicalLogit = 8.0;
    constexpr double kNoiseLogit = 4.0;
    constexpr double kSymmetricLogit = 6.0;
    constexpr double kSymmetricEscapeLogit = 4.5;
    constexpr double kFabricatedLogit = 6.0;
    constexpr double kFabricatedAltLogit = 3.5;

    auto register_grounded = [&world](const std::string& query, const std::string& answer) {
        world.fact_table_[key_of(query)] = {{answer, kCanonicalLogit}};
        world.inverse_table_[key_of(answer)] = {{query, kCanonicalLogit},
                                                {perturb_query(query), kNoiseLogit}};
    };

    for (size_t e = 0; e < spec.exemplar_count; ++e) {
        const std::string title = fresh_title();
        const int year = fresh_year();
        const auto cast = make_cast(rng, 4 + pick(rng, 3));
        const std::string query = movie_query(title, year);
        const std::string answer = cast_answer(title, year, cast);
        register_grounded(query, answer);
        world.exemplars_.push_back({query, answer});
    }

    const size_t distractor_count = std::max(spec.distractor_count, n_fabricate + 2);
    for (size_t d = 0; d < distractor_count; ++d) {
        const std::string title = fresh_title();
        const int year = fresh_year();
        const auto cast = make_cast(rng, 4 + pick(rng, 3));
        const std::string query = movie_query(title, year);
        const std::string answer = cast_answer(title, year, cast);
        register_grounded(query, answer);
        world.distractor_queries_.push_back(query);
        world.distractor_answers_.push_back(answer);
    }

    size_t fabricate_cursor = 0;
    for (size_t i = 0; i < spec.items; ++i) {
        WorldItem item;
        item.id = "item-" + std::to_string(i);
        item.title = fresh_title();
        item.year = fresh_year();
        item.cast = make_cast(rng, 4 + pick(rng, 4));
        item.query = movie_query(item.title, item.year);
        item.answer = cast_answer(item.title, item.year, item.cast);
        item.mode = modes[i];

        switch (item.mode) {
            case HallucinationMode::None: {
                register_grounded(item.query, item.answer);
                break;
            }
            case HallucinationMode::Fabricate: {
                // The model "believes" another record's answer; the inverse
                // table already maps that answer to its own query.
                const size_t donor = fabricate_cursor % distractor_count;
                const size_t alt_a = (fabricate_cursor + 1) % distractor_count;
                const size_t alt_b = (fabricate_cursor + 2) % distractor_count;
                ++fabricate_cursor;
                world.fact_table_[key_of(item.query)] = {
                    {world.distractor_answers_[donor], kFabricatedLogit},
                    {world.distractor_answers_[alt_a], kFabricatedAltLogit},
                    {world.distractor_answers_[alt_b], kFabricatedAltLogit},
                };
                break;
            }
            case HallucinationMode::SymmetricHallucinate: {
                // Wrong cast for the right movie, and the fabricated answer
                // maps straight back to the original query.
                const std::set<std::string> avoid(item.cast.begin(), item.cast.end());
                const auto invented = make_cast(rng, 4 + pick(rng, 3), &avoid);
                const std::string fabricated = cast_answer(item.title, item.year, invented);
                const std::string& escape =
                    world.distractor_queries_[pick(rng, world.distractor_queries_.size())];
                world.fact_table_[key_of(item.query)] = {{fabricated, kCanonicalLogit}};
                world.inverse_table_[key_of(fabricated)] = {
                    {item.query, kSymmetricLogit},
                    {escape, kSymmetricEscapeLogit},
                };
                break;
            }
            case HallucinationMode::ManyToOne: {
                // A sibling query (same title, different release year) shares
                // the answer, so backward passes split between the two.
                int sibling_year = fresh_year();
                while (sibling_year == item.year) sibling_year = fresh_year();
                const std::string sibling_query = movie_query(item.title, sibling_year);
                world.fact_table_[key_of(item.query)] = {{item.answer, kCanonicalLogit}};
                world.fact_table_[key_of(sibling_query)] = {{item.answer, kCanonicalLogit}};
                world.inverse_table_[key_of(item.answer)] = {
                    {item.query, kCanonicalLogit},
                    {sibling_query, kCanonicalLogit},
                };
                break;
            }
        }

        world.items_by_id_[item.id] = world.items_.size();
        world.items_.push_back(std::move(item));
    }

    return world;
}

SimulatedModel::SimulatedModel(std::string id, std::shared_ptr<const SimulatedWorld> world,
                               double default_temperature, std::uint64_t persona_salt,
                               std::string query_label, std::string answer_label)
    : id_(std::move(id)),
      world_(std::move(world)),
      default_temperature_(default_temperature),
      persona_salt_(persona_salt),
      query_label_(std::move(query_label)),
      answer_label_(std::move(answer_label)) {
    if (!world_) throw ContractViolation("SimulatedModel needs a world");
}

namespace {

// Judges "is the sentence supported by the context" by content-word overlap.
std::string judge_support(const std::string& prompt) {
    const size_t ctx_pos = prompt.find("Context:");
    const size_t sent_pos = prompt.find("Sentence:", ctx_pos == std::string::npos ? 0 : ctx_pos);
    const size_t question_pos = prompt.find(kSupportJudgmentQuestion);
    if (ctx_pos == std::string::npos || sent_pos == std::string::npos ||
        question_pos == std::string::npos || sent_pos < ctx_pos || question_pos < sent_pos) {
        return "No";
    }
    const std::string context = text::normalize_name(
        prompt.substr(ctx_pos + 8, sent_pos - ctx_pos - 8));
    const std::string sentence = text::normalize_name(
        prompt.substr(sent_pos + 9, question_pos - sent_pos - 9));
    const std::string padded_context = " " + context + " ";

    size_t total = 0;
    size_t found = 0;
    for (const auto& word : text::split(sentence, " ")) {
        if (word.size() < 3) continue;
        ++total;
        if (padded_context.find(" " + word + " ") != std::string::npos) ++found;
    }
    if (total == 0) return "No";
    return (static_cast<double>(found) / static_cast<double>(total) >= 0.6) ? "Yes" : "No";
}

std::string sample_candidate(const std::vector<CompletionCandidate>& candidates,
                             double temperature, std::mt19937_64& rng) {
    std::vector<double> logits;
    logits.reserve(candidates.size());
    for (const auto& c : candidates) logits.push_back(c.logit);
    return candidates[softmax_sample(logits, temperature, rng)].output;
}

}  // namespace

std::string SimulatedModel::generate(const GenerationRequest& request) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    const std::string prompt = text::trim(request.prompt);
    if (prompt.empty()) {
        throw ContractViolation(id_ + ": empty prompt");
    }
    if (!(request.temperature > 0.0) || !std::isfinite(request.temperature)) {
        throw ContractViolation(id_ + ": temperature must be positive");
    }

    std::mt19937_64 rng(text::mix64(
        text::fnv1a64(prompt) ^
        text::mix64(std::bit_cast<std::uint64_t>(request.temperature)) ^
        text::mix64(request.seed.value_or(0x51eade5ULL)) ^
        text::mix64(persona_salt_ + 0x7e57ULL)));

    std::string completion;
    if (prompt.find(kSupportJudgmentQuestion) != std::string::npos) {
        completion = judge_support(prompt);
    } else {
        const size_t qpos = prompt.rfind(query_label_);
        const size_t apos = prompt.rfind(answer_label_);
        const bool forward = apos != std::string::npos &&
                             apos + answer_label_.size() == prompt.size() &&
                             qpos != std::string::npos && qpos < apos;
        const bool backward = qpos != std::string::npos &&
                              qpos + query_label_.size() == prompt.size() &&
                              apos != std::string::npos && apos < qpos;
        if (forward) {
            const std::string lead = text::trim(
                prompt.substr(qpos + query_label_.size(), apos - qpos - query_label_.size()));
            const auto* candidates = world_->forward_candidates(lead);
            completion = candidates
                             ? sample_candidate(*candidates, request.temperature, rng)
                             : world_->fallback_answer(text::fnv1a64(key_of(lead)));
        } else if (backward) {
            const std::string lead = text::trim(
                prompt.substr(apos + answer_label_.size(), qpos - apos - answer_label_.size()));
            const auto* candidates = world_->backward_candidates(lead);
            completion = candidates
                             ? sample_candidate(*candidates, request.temperature, rng)
                             : world_->fallback_query(text::fnv1a64(key_of(lead)));
        } else {
            // Bare prompt: treat the whole text as a query.
            const auto* candidates = world_->forward_candidates(prompt);
            completion = candidates
                             ? sample_candidate(*candidates, request.temperature, rng)
                             : world_->fallback_answer(text::fnv1a64(key_of(prompt)));
        }
    }

    completion = strip_stop_sequences(std::move(completion), request.stop_sequences);
    if (completion.empty()) {
        throw EmptyGeneration(id_ + ": empty completion");
    }
    return completion;
}

HashedNgramEmbedder::HashedNgramEmbedder(std::string id, size_t dimension)
    : id_(std::move(id)), dimension_(dimension) {
    if (dimension_ == 0) throw ContractViolation("embedder dimension must be >= 1");
}

EmbeddingVector HashedNgramEmbedder::embed(const std::string& input) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    const std::string s = text::normalize_basic(input);
    if (s.empty()) {
        throw ContractViolation(id_ + ": cannot embed empty text");
    }
    std::vector<double> values(dimension_, 0.0);
    const std::string_view view(s);
    if (view.size() < 3) {
        values[text::fnv1a64(view) % dimension_] += 1.0;
    } else {
        for (size_t i = 0; i + 3 <= view.size(); ++i) {
            values[text::fnv1a64(view.substr(i, 3)) % dimension_] += 1.0;
        }
    }
    double norm = 0.0;
    for (double v : values) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : values) v /= norm;
    return {std::move(values)};
}

}  // namespace queryback
