#include "queryback/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "queryback/error.hpp"
#include "queryback/http_backend.hpp"

namespace queryback {

using nlohmann::json;

namespace {

WorldSpec parse_world(const json& j) {
    WorldSpec spec;
    spec.seed = j.value("seed", spec.seed);
    spec.items = j.value("items", spec.items);
    if (j.contains("mix")) {
        const json& mix = j["mix"];
        spec.fraction_none = mix.value("none", spec.fraction_none);
        spec.fraction_fabricate = mix.value("fabricate", spec.fraction_fabricate);
        spec.fraction_symmetric = mix.value("symmetric", spec.fraction_symmetric);
        spec.fraction_many_to_one = mix.value("many_to_one", spec.fraction_many_to_one);
    }
    spec.exemplar_count = j.value("exemplars", spec.exemplar_count);
    spec.distractor_count = j.value("distractors", spec.distractor_count);
    return spec;
}

BackendEntry parse_backend(const json& j) {
    BackendEntry entry;
    entry.id = j.value("id", std::string{});
    entry.kind = j.value("kind", std::string{});
    if (entry.id.empty() || entry.kind.empty()) {
        throw ConfigError("backend entries need \"id\" and \"kind\"");
    }
    entry.base_url = j.value("base_url", entry.base_url);
    entry.api_key_env = j.value("api_key_env", entry.api_key_env);
    entry.model_name = j.value("model_name", entry.model_name);
    entry.default_temperature = j.value("default_temperature", entry.default_temperature);
    entry.max_in_flight = j.value("max_in_flight", entry.max_in_flight);
    entry.retry_budget = j.value("retry_budget", entry.retry_budget);
    entry.retry_base_delay_ms = j.value("retry_base_delay_ms", entry.retry_base_delay_ms);
    entry.timeout_ms = j.value("timeout_ms", entry.timeout_ms);
    entry.world = j.value("world", entry.world);
    entry.salt = j.value("salt", entry.salt);
    entry.dimension = j.value("dimension", entry.dimension);
    return entry;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config: " + path);
    }
    json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw ConfigError(path + ": not a JSON object");
    }

    RunConfig config;
    if (doc.contains("worlds")) {
        for (const auto& [name, world] : doc["worlds"].items()) {
            config.worlds[name] = parse_world(world);
        }
    }
    if (doc.contains("backends")) {
        for (const auto& backend : doc["backends"]) {
            config.backends.push_back(parse_backend(backend));
        }
    }
    if (doc.contains("detector")) {
        const json& d = doc["detector"];
        config.detector.k = d.value("k", config.detector.k);
        config.detector.tau = d.value("tau", config.detector.tau);
        if (d.contains("aggregation")) {
            config.detector.aggregation =
                aggregation_from_string(d["aggregation"].get<std::string>());
        }
        config.detector.variable_temperature =
            d.value("variable_temperature", config.detector.variable_temperature);
        if (d.contains("backward_backends")) {
            config.detector.backward_backends =
                d["backward_backends"].get<std::vector<std::string>>();
        }
        config.detector.embedding_backend =
            d.value("embedding_backend", config.detector.embedding_backend);
        config.detector.max_tokens_forward =
            d.value("max_tokens_forward", config.detector.max_tokens_forward);
        config.detector.max_tokens_backward =
            d.value("max_tokens_backward", config.detector.max_tokens_backward);
    }
    if (doc.contains("tasks")) {
        for (const auto& t : doc["tasks"]) {
            TaskEntry entry;
            entry.task = task_from_string(t.value("task", std::string("movies")));
            entry.dataset_path = t.value("dataset", std::string{});
            entry.prompt_path = t.value("prompts", std::string{});
            entry.world = t.value("world", std::string{});
            if (entry.dataset_path.empty() && entry.world.empty()) {
                throw ConfigError(path + ": task entries need \"dataset\" or \"world\"");
            }
            config.tasks.push_back(std::move(entry));
        }
    }
    if (doc.contains("evaluation")) {
        const json& e = doc["evaluation"];
        config.evaluation.forward_backend =
            e.value("forward_backend", config.evaluation.forward_backend);
        if (e.contains("methods")) {
            config.evaluation.methods = e["methods"].get<std::vector<std::string>>();
        }
        config.evaluation.embed_cosine_threshold =
            e.value("embed_cosine_threshold", config.evaluation.embed_cosine_threshold);
        config.evaluation.k_sweep = e.value("k_sweep", config.evaluation.k_sweep);
        if (e.contains("selfcheck")) {
            const json& s = e["selfcheck"];
            config.evaluation.selfcheck.n_samples =
                s.value("n_samples", config.evaluation.selfcheck.n_samples);
            config.evaluation.selfcheck.judge_backend =
                s.value("judge_backend", config.evaluation.selfcheck.judge_backend);
            config.evaluation.selfcheck.threshold =
                s.value("threshold", config.evaluation.selfcheck.threshold);
            config.evaluation.selfcheck.sample_temperature =
                s.value("sample_temperature", config.evaluation.selfcheck.sample_temperature);
        }
    }
    config.cache_dir = doc.value("cache_dir", config.cache_dir);
    config.output_dir = doc.value("output_dir", config.output_dir);
    config.base_seed = doc.value("base_seed", config.base_seed);
    config.parallelism = doc.value("parallelism", config.parallelism);
    return config;
}

void BackendRegistry::add_world(const std::string& name,
                                std::shared_ptr<const SimulatedWorld> world) {
    worlds_[name] = std::move(world);
}

void BackendRegistry::add_generator(std::shared_ptr<GenerationBackend> backend,
                                    std::shared_ptr<GenerationBackend> raw) {
    const std::string id = backend->id();
    if (generators_.count(id) || embedders_.count(id)) {
        throw ConfigError("duplicate backend id: " + id);
    }
    raw_generators_[id] = raw ? std::move(raw) : backend;
    generators_[id] = std::move(backend);
}

void BackendRegistry::add_embedder(std::shared_ptr<EmbeddingBackend> backend,
                                   std::shared_ptr<EmbeddingBackend> raw) {
    const std::string id = backend->id();
    if (embedders_.count(id) || generators_.count(id)) {
        throw ConfigError("duplicate backend id: " + id);
    }
    raw_embedders_[id] = raw ? std::move(raw) : backend;
    embedders_[id] = std::move(backend);
}

std::shared_ptr<GenerationBackend> BackendRegistry::generator(const std::string& id) const {
    auto it = generators_.find(id);
    if (it == generators_.end()) {
        throw ConfigError("unknown generation backend: " + id);
    }
    return it->second;
}

std::shared_ptr<EmbeddingBackend> BackendRegistry::embedder(const std::string& id) const {
    auto it = embedders_.find(id);
    if (it == embedders_.end()) {
        throw ConfigError("unknown embedding backend: " + id);
    }
    return it->second;
}

std::shared_ptr<const SimulatedWorld> BackendRegistry::world(const std::string& name) const {
    auto it = worlds_.find(name);
    if (it == worlds_.end()) {
        throw ConfigError("unknown world: " + name);
    }
    return it->second;
}

std::shared_ptr<GenerationBackend> BackendRegistry::raw_generator(const std::string& id) const {
    auto it = raw_generators_.find(id);
    if (it == raw_generators_.end()) {
        throw ConfigError("unknown generation backend: " + id);
    }
    return it->second;
}

std::shared_ptr<EmbeddingBackend> BackendRegistry::raw_embedder(const std::string& id) const {
    auto it = raw_embedders_.find(id);
    if (it == raw_embedders_.end()) {
        throw ConfigError("unknown embedding backend: " + id);
    }
    return it->second;
}

BackendRegistry build_registry(const RunConfig& config) {
    BackendRegistry registry;
    for (const auto& [name, spec] : config.worlds) {
        registry.add_world(name, std::make_shared<SimulatedWorld>(SimulatedWorld::benchmark(spec)));
    }

    std::shared_ptr<CacheStore> cache;
    if (!config.cache_dir.empty()) {
        cache = std::make_shared<CacheStore>(config.cache_dir);
        registry.set_cache(cache);
    }

    for (const auto& entry : config.backends) {
        if (entry.kind == "simulated") {
            if (entry.world.empty() || !registry.has_world(entry.world)) {
                throw ConfigError("simulated backend " + entry.id + " needs a known \"world\"");
            }
            auto raw = std::make_shared<SimulatedModel>(
                entry.id, registry.world(entry.world), entry.default_temperature, entry.salt);
            std::shared_ptr<GenerationBackend> wrapped = raw;
            if (cache) {
                wrapped = std::make_shared<CachedGenerationBackend>(raw, cache, entry.id);
            }
            registry.add_generator(wrapped, raw);
        } else if (entry.kind == "simulated-embedding") {
            auto raw = std::make_shared<HashedNgramEmbedder>(entry.id, entry.dimension);
            std::shared_ptr<EmbeddingBackend> wrapped = raw;
            if (cache) {
                wrapped = std::make_shared<CachedEmbeddingBackend>(raw, cache, entry.id);
            }
            registry.add_embedder(wrapped, raw);
        } else if (entry.kind == "http-completions" || entry.kind == "http-chat") {
            HttpBackendOptions options;
            options.id = entry.id;
            options.base_url = entry.base_url;
            options.api_key_env = entry.api_key_env;
            options.model_name = entry.model_name;
            options.default_temperature = entry.default_temperature;
            options.max_in_flight = entry.max_in_flight;
            options.retry_budget = entry.retry_budget;
            options.retry_base_delay_ms = entry.retry_base_delay_ms;
            options.timeout_ms = entry.timeout_ms;
            options.chat = entry.kind == "http-chat";
            auto raw = std::make_shared<HttpGenerationBackend>(options);
            std::shared_ptr<GenerationBackend> wrapped = raw;
            if (cache) {
                wrapped = std::make_shared<CachedGenerationBackend>(raw, cache, entry.model_name);
            }
            registry.add_generator(wrapped, raw);
        } else if (entry.kind == "http-embedding") {
            HttpBackendOptions options;
            options.id = entry.id;
            options.base_url = entry.base_url;
            options.api_key_env = entry.api_key_env;
            options.model_name = entry.model_name;
            options.max_in_flight = entry.max_in_flight;
            options.retry_budget = entry.retry_budget;
            options.retry_base_delay_ms = entry.retry_base_delay_ms;
            options.timeout_ms = entry.timeout_ms;
            auto raw = std::make_shared<HttpEmbeddingBackend>(options, entry.dimension);
            std::shared_ptr<EmbeddingBackend> wrapped = raw;
            if (cache) {
                wrapped = std::make_shared<CachedEmbeddingBackend>(raw, cache, entry.model_name);
            }
            registry.add_embedder(wrapped, raw);
        } else {
            throw ConfigError("unknown backend kind: " + entry.kind);
        }
    }
    return registry;
}

ResolvedTask resolve_task(const TaskEntry& entry, const BackendRegistry& registry) {
    ResolvedTask task;
    task.entry = entry;

    if (!entry.prompt_path.empty()) {
        PromptFile file = load_prompt_file(entry.prompt_path);
        task.prompt_spec = file.spec;
        task.query_template = default_task_template(entry.task);
        if (!file.query_pattern.empty()) {
            task.query_template.query_pattern = file.query_pattern;
        }
    } else {
        task.query_template = default_task_template(entry.task);
    }

    if (!entry.world.empty()) {
        auto world = registry.world(entry.world);
        if (entry.prompt_path.empty()) {
            task.prompt_spec.exemplars = world->exemplars();
            if (entry.task != TaskKind::Movies) {
                throw ConfigError("synthetic worlds produce movies-style records");
            }
        }
        for (const auto& item : world->items()) {
            DatasetRecord record;
            record.task = TaskKind::Movies;
            record.id = item.id;
            record.query_fields["title"] = item.title;
            record.query_fields["year"] = std::to_string(item.year);
            record.truth_fields = nlohmann::json{{"cast", item.cast}};
            task.records.push_back(std::move(record));
        }
    } else {
        if (entry.prompt_path.empty()) {
            throw ConfigError("file-backed tasks need a \"prompts\" file with exemplars");
        }
        task.records = load_dataset(entry.dataset_path);
    }
    validate(task.prompt_spec);
    return task;
}

}  // namespace queryback
