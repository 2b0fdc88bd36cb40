#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "queryback/backends.hpp"
#include "queryback/cache.hpp"
#include "queryback/detector.hpp"
#include "queryback/evaluation.hpp"
#include "queryback/prompting.hpp"
#include "queryback/simulated.hpp"

namespace queryback {

/// One backend entry of the run config. `kind` selects the implementation:
/// simulated | simulated-embedding | http-completions | http-chat |
/// http-embedding.
struct BackendEntry {
    std::string id;
    std::string kind;
    std::string base_url;
    std::string api_key_env;
    std::string model_name;
    double default_temperature = 0.6;
    int max_in_flight = 4;
    int retry_budget = 3;
    int retry_base_delay_ms = 250;
    int timeout_ms = 30000;
    std::string world;        // simulated: which world backs it
    std::uint64_t salt = 0;   // simulated: persona salt for ensemble diversity
    size_t dimension = 256;   // embedding kinds
};

/// One evaluation task: either a JSONL dataset on disk or a seeded synthetic
/// world acting as the dataset source.
struct TaskEntry {
    TaskKind task = TaskKind::Movies;
    std::string dataset_path;  // file-backed tasks
    std::string prompt_path;   // prompt spec JSON; synthetic tasks may omit it
    std::string world;         // synthetic tasks
};

struct SelfCheckConfig {
    size_t n_samples = 4;
    std::string judge_backend;  // defaults to the forward backend
    double threshold = 0.5;
    double sample_temperature = 1.0;
};

struct EvaluationConfig {
    std::string forward_backend;
    std::vector<std::string> methods = {"interrogate", "embed-cosine", "selfcheck"};
    SelfCheckConfig selfcheck;
    double embed_cosine_threshold = 0.91;
    bool k_sweep = false;  // also score interrogate@k=1..k for the report series
};

struct RunConfig {
    std::map<std::string, WorldSpec> worlds;
    std::vector<BackendEntry> backends;
    DetectorConfig detector;
    std::vector<TaskEntry> tasks;
    EvaluationConfig evaluation;
    std::string cache_dir;
    std::string output_dir = "out";
    std::uint64_t base_seed = 0;
    size_t parallelism = 1;
};

/// Parses the JSON run config. Built-in defaults fill anything the file
/// leaves out; flags override on top of this (handled by the CLI).
RunConfig load_run_config(const std::string& path);

/// Resolved backends by id, plus the simulated worlds they share. When a
/// cache directory is set, generators and embedders come back wrapped in the
/// cache decorators; raw_* accessors reach the undecorated instances (the
/// simulated ones carry call counters).
class BackendRegistry {
public:
    void add_world(const std::string& name, std::shared_ptr<const SimulatedWorld> world);
    void add_generator(std::shared_ptr<GenerationBackend> backend,
                       std::shared_ptr<GenerationBackend> raw = nullptr);
    void add_embedder(std::shared_ptr<EmbeddingBackend> backend,
                      std::shared_ptr<EmbeddingBackend> raw = nullptr);

    std::shared_ptr<GenerationBackend> generator(const std::string& id) const;
    std::shared_ptr<EmbeddingBackend> embedder(const std::string& id) const;
    std::shared_ptr<const SimulatedWorld> world(const std::string& name) const;

    std::shared_ptr<GenerationBackend> raw_generator(const std::string& id) const;
    std::shared_ptr<EmbeddingBackend> raw_embedder(const std::string& id) const;

    bool has_world(const std::string& name) const { return worlds_.count(name) > 0; }

    std::shared_ptr<CacheStore> cache() const { return cache_; }
    void set_cache(std::shared_ptr<CacheStore> cache) { cache_ = std::move(cache); }

private:
    std::map<std::string, std::shared_ptr<GenerationBackend>> generators_;
    std::map<std::string, std::shared_ptr<GenerationBackend>> raw_generators_;
    std::map<std::string, std::shared_ptr<EmbeddingBackend>> embedders_;
    std::map<std::string, std::shared_ptr<EmbeddingBackend>> raw_embedders_;
    std::map<std::string, std::shared_ptr<const SimulatedWorld>> worlds_;
    std::shared_ptr<CacheStore> cache_;
};

/// Builds worlds and backends from the config and wires the cache decorators.
BackendRegistry build_registry(const RunConfig& config);

/// Prompt spec for a task: from its prompt file when set, else default labels
/// with the world's exemplars (synthetic tasks). The task's query pattern
/// falls back to the built-in template.
struct ResolvedTask {
    TaskEntry entry;
    PromptSpec prompt_spec;
    TaskTemplate query_template;
    std::vector<DatasetRecord> records;
};

ResolvedTask resolve_task(const TaskEntry& entry, const BackendRegistry& registry);

}  // namespace queryback
