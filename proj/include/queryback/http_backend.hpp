#pragma once

#include <memory>
#include <string>

#include "queryback/backends.hpp"

namespace queryback {

/// Connection settings for an OpenAI-compatible server (api.openai.com or a
/// local llama-server both speak this shape). The API key is read from the
/// environment variable named by api_key_env; keys never live in config files.
struct HttpBackendOptions {
    std::string id;
    std::string base_url;               // e.g. "http://127.0.0.1:8080"
    std::string api_key_env;            // empty = unauthenticated (local server)
    std::string model_name;
    double default_temperature = 0.6;
    int max_in_flight = 4;              // concurrent requests cap, per backend
    int retry_budget = 3;               // retries after the first attempt
    int retry_base_delay_ms = 250;      // doubled per retry
    int timeout_ms = 30000;
    bool chat = false;                  // true: /v1/chat/completions, false: /v1/completions
};

/// Completion client with bounded concurrency and exponential backoff on
/// 408/429/5xx and transport errors. A request is retried at most
/// retry_budget times; anything else fails fast as BackendUnavailable.
class HttpGenerationBackend : public GenerationBackend {
public:
    explicit HttpGenerationBackend(HttpBackendOptions options);
    ~HttpGenerationBackend() override;

    const std::string& id() const override;
    double default_temperature() const override;
    std::string generate(const GenerationRequest& request) override;

    const std::string& model_name() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Embedding client against /v1/embeddings with the same retry behavior.
/// `dimension` pins the expected vector length; a server answering with a
/// different length is treated as a backend fault.
class HttpEmbeddingBackend : public EmbeddingBackend {
public:
    HttpEmbeddingBackend(HttpBackendOptions options, size_t dimension);
    ~HttpEmbeddingBackend() override;

    const std::string& id() const override;
    size_t dimension() const override;
    EmbeddingVector embed(const std::string& input) override;

    const std::string& model_name() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace queryback
