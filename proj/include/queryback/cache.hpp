#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "queryback/backends.hpp"

namespace queryback {

enum class CacheKind {
    Generation,
    Embedding,
};

std::string to_string(CacheKind kind);

/// Identifies one cached result: the request class, the backend that produced
/// it, and a digest of the canonicalized request payload. Canonicalization is
/// byte-stable across runs and platforms (sorted-key JSON with shortest
/// round-trip numbers), and includes the model name so upstream model swaps
/// never alias.
struct CacheKey {
    CacheKind kind = CacheKind::Generation;
    std::string backend_id;
    std::string payload_hash;  // lowercase hex SHA-256

    std::string storage_name() const;
};

CacheKey make_generation_key(const std::string& backend_id, const std::string& model_name,
                             const GenerationRequest& request);
CacheKey make_embedding_key(const std::string& backend_id, const std::string& model_name,
                            const std::string& input);

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(const std::string& bytes);

/// Directory-backed store of generation and embedding results. Entries are
/// immutable once written, published atomically (write-temp-then-rename), and
/// carry a per-entry checksum; a corrupt entry reads as a miss and is
/// recomputed. Within one process, concurrent callers for the same key get
/// single-flight behavior: the producer runs exactly once and everyone shares
/// its result. No eviction; the store grows until cleared.
class CacheStore {
public:
    explicit CacheStore(std::filesystem::path directory);

    const std::filesystem::path& directory() const { return directory_; }

    std::string get_or_compute_text(const CacheKey& key,
                                    const std::function<std::string()>& compute);
    std::vector<double> get_or_compute_vector(const CacheKey& key,
                                              const std::function<std::vector<double>()>& compute);

    /// Entries served from disk / producers actually run, for observability.
    std::uint64_t hits() const;
    std::uint64_t misses() const;

private:
    struct Flight;

    // Works on canonical JSON dumps of the value; the typed wrappers parse.
    std::string get_or_compute_raw(const CacheKey& key,
                                   const std::function<std::string()>& compute_json_value);

    std::filesystem::path entry_path(const CacheKey& key) const;

    std::filesystem::path directory_;
    std::mutex flights_mutex_;
    std::map<std::string, std::shared_ptr<Flight>> flights_;
    mutable std::mutex stats_mutex_;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
};

/// GenerationBackend decorator that serves repeat requests from the store.
class CachedGenerationBackend : public GenerationBackend {
public:
    CachedGenerationBackend(std::shared_ptr<GenerationBackend> inner,
                            std::shared_ptr<CacheStore> store, std::string model_name);

    const std::string& id() const override { return inner_->id(); }
    double default_temperature() const override { return inner_->default_temperature(); }
    std::string generate(const GenerationRequest& request) override;

private:
    std::shared_ptr<GenerationBackend> inner_;
    std::shared_ptr<CacheStore> store_;
    std::string model_name_;
};

/// EmbeddingBackend decorator with the same contract.
class CachedEmbeddingBackend : public EmbeddingBackend {
public:
    CachedEmbeddingBackend(std::shared_ptr<EmbeddingBackend> inner,
                           std::shared_ptr<CacheStore> store, std::string model_name);

    const std::string& id() const override { return inner_->id(); }
    size_t dimension() const override { return inner_->dimension(); }
    EmbeddingVector embed(const std::string& input) override;

private:
    std::shared_ptr<EmbeddingBackend> inner_;
    std::shared_ptr<CacheStore> store_;
    std::string model_name_;
};

}  // namespace queryback
