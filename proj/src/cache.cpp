#include "queryback/cache.hpp"

#include <atomic>
#include <condition_variable>
#include <ctime>
#include <fstream>
#include <optional>

#include <unistd.h>

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include "queryback/error.hpp"

namespace queryback {

namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;

std::string iso_utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::string to_string(CacheKind kind) {
    return kind == CacheKind::Generation ? "generation" : "embedding";
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0x0F]);
    }
    return out;
}

std::string CacheKey::storage_name() const {
    return to_string(kind) + "|" + backend_id + "|" + payload_hash;
}

CacheKey make_generation_key(const std::string& backend_id, const std::string& model_name,
                             const GenerationRequest& request) {
    json payload{
        {"max_tokens", request.max_tokens},
        {"model", model_name},
        {"prompt", request.prompt},
        {"seed", request.seed ? json(*request.seed) : json(nullptr)},
        {"stop", request.stop_sequences},
        {"temperature", request.temperature},
    };
    return {CacheKind::Generation, backend_id, sha256_hex(payload.dump())};
}

CacheKey make_embedding_key(const std::string& backend_id, const std::string& model_name,
                            const std::string& input) {
    json payload{
        {"model", model_name},
        {"text", input},
    };
    return {CacheKind::Embedding, backend_id, sha256_hex(payload.dump())};
}

struct CacheStore::Flight {
    std::mutex mutex;
    std::condition_variable cv;
    bool done = false;
    std::string value;  // canonical JSON dump of the produced value
    std::exception_ptr error;
};

CacheStore::CacheStore(std::filesystem::path directory) : directory_(std::move(directory)) {
    std::error_code ec;
    std::filesystem::create_directories(directory_, ec);
    if (ec) {
        throw Error("cannot create cache directory " + directory_.string() + ": " + ec.message());
    }
}

std::filesystem::path CacheStore::entry_path(const CacheKey& key) const {
    return directory_ / to_string(key.kind) / key.payload_hash.substr(0, 2) /
           (key.payload_hash + ".json");
}

namespace {

// Returns the canonical dump of the entry's value, or nullopt on any missing,
// unreadable, or checksum-failing entry (all treated as a miss).
std::optional<std::string> read_entry(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    json entry = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (entry.is_discarded() || !entry.is_object()) return std::nullopt;
    if (!entry.contains("value") || !entry.contains("checksum")) return std::nullopt;
    std::string value_dump = entry["value"].dump();
    if (!entry["checksum"].is_string() ||
        entry["checksum"].get<std::string>() != sha256_hex(value_dump)) {
        return std::nullopt;
    }
    return value_dump;
}

void write_entry(const std::filesystem::path& path, const CacheKey& key,
                 const std::string& value_dump) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) {
        throw Error("cache: cannot create " + path.parent_path().string() + ": " + ec.message());
    }

    json entry{
        {"schema_version", kSchemaVersion},
        {"kind", to_string(key.kind)},
        {"backend_id", key.backend_id},
        {"value", json::parse(value_dump)},
        {"checksum", sha256_hex(value_dump)},
        {"created_at", iso_utc_now()},
    };

    // Publish atomically so concurrent readers in other processes never see a
    // half-written entry; first write wins, later writes replace it with the
    // same value bytes (modulo created_at).
    static std::atomic<std::uint64_t> tmp_counter{0};
    const std::string tmp_name =
        path.filename().string() + ".tmp." + std::to_string(::getpid()) + "." +
        std::to_string(tmp_counter.fetch_add(1));
    const std::filesystem::path tmp_path = path.parent_path() / tmp_name;
    {
        std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cache: cannot write " + tmp_path.string());
        }
        out << entry.dump();
        out.flush();
        if (!out) {
            throw Error("cache: short write to " + tmp_path.string());
        }
    }
    std::filesystem::rename(tmp_path, path, ec);
    if (ec) {
        std::filesystem::remove(tmp_path, ec);
        throw Error("cache: cannot publish " + path.string());
    }
}

}  // namespace

std::string CacheStore::get_or_compute_raw(const CacheKey& key,
                                           const std::function<std::string()>& compute) {
    const std::filesystem::path path = entry_path(key);
    if (auto cached = read_entry(path)) {
        std::lock_guard lock(stats_mutex_);
        ++hits_;
        return *cached;
    }

    const std::string flight_key = key.storage_name();
    std::shared_ptr<Flight> flight;
    bool leader = false;
    {
        std::lock_guard lock(flights_mutex_);
        auto it = flights_.find(flight_key);
        if (it == flights_.end()) {
            flight = std::make_shared<Flight>();
            flights_.emplace(flight_key, flight);
            leader = true;
        } else {
            flight = it->second;
        }
    }

    if (!leader) {
        std::unique_lock lock(flight->mutex);
        flight->cv.wait(lock, [&] { return flight->done; });
        if (flight->error) std::rethrow_exception(flight->error);
        std::lock_guard stats(stats_mutex_);
        ++hits_;
        return flight->value;
    }

    auto finish = [&](std::string value, std::exception_ptr error) {
        {
            std::lock_guard lock(flight->mutex);
            flight->value = std::move(value);
            flight->error = error;
            flight->done = true;
        }
        flight->cv.notify_all();
        std::lock_guard lock(flights_mutex_);
        flights_.erase(flight_key);
    };

    try {
        // Another process (or an earlier flight) may have published while we
        // queued; a fresh disk probe avoids recomputing.
        std::string value_dump;
        if (auto cached = read_entry(path)) {
            value_dump = *cached;
        } else {
            value_dump = compute();
            write_entry(path, key, value_dump);
            std::lock_guard stats(stats_mutex_);
            ++misses_;
        }
        finish(value_dump, nullptr);
        return value_dump;
    } catch (...) {
        finish({}, std::current_exception());
        throw;
    }
}

std::string CacheStore::get_or_compute_text(const CacheKey& key,
                                            const std::function<std::string()>& compute) {
    const std::string dump = get_or_compute_raw(key, [&] { return json(compute()).dump(); });
    json value = json::parse(dump);
    if (!value.is_string()) {
        throw Error("cache: entry for " + key.storage_name() + " is not text");
    }
    return value.get<std::string>();
}

std::vector<double> CacheStore::get_or_compute_vector(
    const CacheKey& key, const std::function<std::vector<double>()>& compute) {
    const std::string dump = get_or_compute_raw(key, [&] { return json(compute()).dump(); });
    json value = json::parse(dump);
    if (!value.is_array()) {
        throw Error("cache: entry for " + key.storage_name() + " is not a vector");
    }
    return value.get<std::vector<double>>();
}

std::uint64_t CacheStore::hits() const {
    std::lock_guard lock(stats_mutex_);
    return hits_;
}

std::uint64_t CacheStore::misses() const {
    std::lock_guard lock(stats_mutex_);
    return misses_;
}

CachedGenerationBackend::CachedGenerationBackend(std::shared_ptr<GenerationBackend> inner,
                                                 std::shared_ptr<CacheStore> store,
                                                 std::string model_name)
    : inner_(std::move(inner)), store_(std::move(store)), model_name_(std::move(model_name)) {}

std::string CachedGenerationBackend::generate(const GenerationRequest& request) {
    const CacheKey key = make_generation_key(inner_->id(), model_name_, request);
    return store_->get_or_compute_text(key, [&] { return inner_->generate(request); });
}

CachedEmbeddingBackend::CachedEmbeddingBackend(std::shared_ptr<EmbeddingBackend> inner,
                                               std::shared_ptr<CacheStore> store,
                                               std::string model_name)
    : inner_(std::move(inner)), store_(std::move(store)), model_name_(std::move(model_name)) {}

EmbeddingVector CachedEmbeddingBackend::embed(const std::string& input) {
    const CacheKey key = make_embedding_key(inner_->id(), model_name_, input);
    return {store_->get_or_compute_vector(key, [&] { return inner_->embed(input).values; })};
}

}  // namespace queryback
