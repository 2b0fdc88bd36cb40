#include "queryback/http_backend.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "queryback/error.hpp"
#include "queryback/text.hpp"

namespace queryback {

namespace {

using nlohmann::json;

// Runtime-sized concurrency gate (std::counting_semaphore pins its ceiling at
// compile time).
class InFlightGate {
public:
    explicit InFlightGate(int slots) : slots_(slots) {}

    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return slots_ > 0; });
        --slots_;
    }

    void release() {
        {
            std::lock_guard lock(mutex_);
            ++slots_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int slots_;
};

struct GateGuard {
    explicit GateGuard(InFlightGate& gate) : gate_(gate) { gate_.acquire(); }
    ~GateGuard() { gate_.release(); }
    GateGuard(const GateGuard&) = delete;
    GateGuard& operator=(const GateGuard&) = delete;
    InFlightGate& gate_;
};

bool retryable_status(int status) {
    return status == 408 || status == 429 || (status >= 500 && status < 600);
}

std::string strip_stop_sequences(std::string completion,
                                 const std::vector<std::string>& stops) {
    size_t cut = completion.size();
    for (const auto& stop : stops) {
        if (stop.empty()) continue;
        const size_t pos = completion.find(stop);
        if (pos != std::string::npos && pos < cut) cut = pos;
    }
    completion.resize(cut);
    while (!completion.empty() &&
           std::isspace(static_cast<unsigned char>(completion.back()))) {
        completion.pop_back();
    }
    return completion;
}

class HttpCore {
public:
    explicit HttpCore(HttpBackendOptions options)
        : options_(std::move(options)), gate_(std::max(1, options_.max_in_flight)) {
        if (options_.id.empty()) throw ConfigError("http backend needs an id");
        if (options_.base_url.empty()) {
            throw ConfigError("http backend " + options_.id + " needs a base_url");
        }
        if (!options_.api_key_env.empty()) {
            const char* key = std::getenv(options_.api_key_env.c_str());
            if (key == nullptr || *key == '\0') {
                throw ConfigError("backend " + options_.id + ": environment variable " +
                                  options_.api_key_env + " is not set");
            }
            api_key_ = key;
        }
    }

    // POSTs the body, retrying per the budget with exponential backoff; only
    // the in-flight gate bounds concurrency.
    json post_json(const std::string& path, const json& body) {
        GateGuard guard(gate_);
        std::string last_error;
        for (int attempt = 0; attempt <= options_.retry_budget; ++attempt) {
            if (attempt > 0) {
                const auto delay = std::chrono::milliseconds(
                    static_cast<long long>(options_.retry_base_delay_ms) << (attempt - 1));
                std::this_thread::sleep_for(delay);
            }

            httplib::Client client(options_.base_url);
            client.set_connection_timeout(0, options_.timeout_ms * 1000LL);
            client.set_read_timeout(options_.timeout_ms / 1000, (options_.timeout_ms % 1000) * 1000);
            client.set_write_timeout(options_.timeout_ms / 1000, (options_.timeout_ms % 1000) * 1000);
            httplib::Headers headers;
            if (!api_key_.empty()) {
                headers.emplace("Authorization", "Bearer " + api_key_);
            }

            auto result = client.Post(path, headers, body.dump(), "application/json");
            if (!result) {
                last_error = "transport error: " + httplib::to_string(result.error());
                continue;
            }
            if (result->status >= 200 && result->status < 300) {
                json payload = json::parse(result->body, nullptr, /*allow_exceptions=*/false);
                if (payload.is_discarded()) {
                    throw BackendUnavailable(options_.id + ": malformed JSON response");
                }
                return payload;
            }
            if (retryable_status(result->status)) {
                last_error = "HTTP " + std::to_string(result->status);
                continue;
            }
            throw BackendUnavailable(options_.id + ": HTTP " + std::to_string(result->status) +
                                     " " + result->body);
        }
        throw BackendUnavailable(options_.id + ": retry budget exhausted (" + last_error + ")");
    }

    const HttpBackendOptions& options() const { return options_; }

private:
    HttpBackendOptions options_;
    std::string api_key_;
    InFlightGate gate_;
};

}  // namespace

struct HttpGenerationBackend::Impl {
    explicit Impl(HttpBackendOptions options) : core(std::move(options)) {}
    HttpCore core;
};

HttpGenerationBackend::HttpGenerationBackend(HttpBackendOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {}

HttpGenerationBackend::~HttpGenerationBackend() = default;

const std::string& HttpGenerationBackend::id() const { return impl_->core.options().id; }

double HttpGenerationBackend::default_temperature() const {
    return impl_->core.options().default_temperature;
}

const std::string& HttpGenerationBackend::model_name() const {
    return impl_->core.options().model_name;
}

std::string HttpGenerationBackend::generate(const GenerationRequest& request) {
    if (text::trim(request.prompt).empty()) {
        throw ContractViolation(id() + ": empty prompt");
    }
    if (!(request.temperature > 0.0) || !std::isfinite(request.temperature)) {
        throw ContractViolation(id() + ": temperature must be positive");
    }
    const auto& options = impl_->core.options();

    json body{
        {"model", options.model_name},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
    if (request.seed) {
        body["seed"] = *request.seed;
    }
    if (!request.stop_sequences.empty()) {
        body["stop"] = request.stop_sequences;
    }
    std::string path;
    if (options.chat) {
        path = "/v1/chat/completions";
        body["messages"] = json::array({{{"role", "user"}, {"content", request.prompt}}});
    } else {
        path = "/v1/completions";
        body["prompt"] = request.prompt;
    }

    const json payload = impl_->core.post_json(path, body);
    if (!payload.contains("choices") || !payload["choices"].is_array() ||
        payload["choices"].empty()) {
        throw BackendUnavailable(id() + ": response has no choices");
    }
    const json& choice = payload["choices"][0];
    std::string completion;
    if (options.chat) {
        completion = choice.contains("message") ? choice["message"].value("content", "")
                                                : std::string{};
    } else {
        completion = choice.value("text", "");
    }
    completion = strip_stop_sequences(std::move(completion), request.stop_sequences);
    if (completion.empty()) {
        throw EmptyGeneration(id() + ": empty completion");
    }
    return completion;
}

struct HttpEmbeddingBackend::Impl {
    Impl(HttpBackendOptions options, size_t dim) : core(std::move(options)), dimension(dim) {}
    HttpCore core;
    size_t dimension;
};

HttpEmbeddingBackend::HttpEmbeddingBackend(HttpBackendOptions options, size_t dimension)
    : impl_(std::make_unique<Impl>(std::move(options), dimension)) {
    if (dimension == 0) {
        throw ConfigError("embedding backend " + id() + " needs a positive dimension");
    }
}

HttpEmbeddingBackend::~HttpEmbeddingBackend() = default;

const std::string& HttpEmbeddingBackend::id() const { return impl_->core.options().id; }

size_t HttpEmbeddingBackend::dimension() const { return impl_->dimension; }

const std::string& HttpEmbeddingBackend::model_name() const {
    return impl_->core.options().model_name;
}

EmbeddingVector HttpEmbeddingBackend::embed(const std::string& input) {
    if (text::trim(input).empty()) {
        throw ContractViolation(id() + ": cannot embed empty text");
    }
    const json body{
        {"model", impl_->core.options().model_name},
        {"input", input},
    };
    const json payload = impl_->core.post_json("/v1/embeddings", body);
    if (!payload.contains("data") || !payload["data"].is_array() || payload["data"].empty() ||
        !payload["data"][0].contains("embedding")) {
        throw BackendUnavailable(id() + ": response has no embedding data");
    }
    EmbeddingVector vec{payload["data"][0]["embedding"].get<std::vector<double>>()};
    if (vec.dimension() != impl_->dimension) {
        throw BackendUnavailable(id() + ": server returned dimension " +
                                 std::to_string(vec.dimension()) + ", expected " +
                                 std::to_string(impl_->dimension));
    }
    return vec;
}

}  // namespace queryback
