#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "queryback/error.hpp"
#include "queryback/http_backend.hpp"

using namespace queryback;
using nlohmann::json;

namespace {

// Local stub speaking the OpenAI-compatible shape, with failure injection and
// a server-side concurrency counter.
class StubServer {
public:
    StubServer() {
        server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
            handle(req, res, Endpoint::Completions);
        });
        server_.Post("/v1/chat/completions",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         handle(req, res, Endpoint::Chat);
                     });
        server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
            handle(req, res, Endpoint::Embeddings);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~StubServer() {
        server_.stop();
        thread_.join();
    }

    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

    std::atomic<int> requests{0};
    std::atomic<int> fail_next{0};          // respond 500 to this many requests
    std::atomic<int> hard_status{0};        // nonzero: always respond with it
    std::atomic<int> handler_delay_ms{0};
    std::atomic<int> in_flight{0};
    std::atomic<int> max_in_flight{0};

    std::string last_authorization() const {
        std::lock_guard lock(strings_mutex_);
        return last_authorization_;
    }
    std::string last_model() const {
        std::lock_guard lock(strings_mutex_);
        return last_model_;
    }

private:
    enum class Endpoint { Completions, Chat, Embeddings };

    void handle(const httplib::Request& req, httplib::Response& res, Endpoint endpoint) {
        requests.fetch_add(1);
        const int current = in_flight.fetch_add(1) + 1;
        int seen = max_in_flight.load();
        while (current > seen && !max_in_flight.compare_exchange_weak(seen, current)) {
        }
        if (handler_delay_ms.load() > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(handler_delay_ms.load()));
        }
        {
            std::lock_guard lock(strings_mutex_);
            last_authorization_ = req.get_header_value("Authorization");
        }

        if (hard_status.load() != 0) {
            res.status = hard_status.load();
            res.set_content("forced failure", "text/plain");
            in_flight.fetch_sub(1);
            return;
        }
        int budget = fail_next.load();
        while (budget > 0 && !fail_next.compare_exchange_weak(budget, budget - 1)) {
        }
        if (budget > 0) {
            res.status = 500;
            res.set_content("injected failure", "text/plain");
            in_flight.fetch_sub(1);
            return;
        }

        const json body = json::parse(req.body, nullptr, false);
        {
            std::lock_guard lock(strings_mutex_);
            last_model_ = body.value("model", "");
        }
        json reply;
        switch (endpoint) {
            case Endpoint::Completions:
                reply = {{"choices",
                          {{{"text", "completion for temp " +
                                         std::to_string(body.value("temperature", 0.0)) + "\n"}}}}};
                break;
            case Endpoint::Chat:
                reply = {{"choices",
                          {{{"message",
                             {{"role", "assistant"}, {"content", "chat reply\n"}}}}}}};
                break;
            case Endpoint::Embeddings: {
                std::vector<double> values(8, 0.0);
                const std::string input = body.value("input", "");
                for (size_t i = 0; i < input.size(); ++i) {
                    values[i % values.size()] += static_cast<double>(input[i]);
                }
                reply = {{"data", {{{"embedding", values}}}}};
                break;
            }
        }
        res.set_content(reply.dump(), "application/json");
        in_flight.fetch_sub(1);
    }

    mutable std::mutex strings_mutex_;
    std::string last_authorization_;
    std::string last_model_;

    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

HttpBackendOptions options_for(const StubServer& stub, const std::string& id = "http-a") {
    HttpBackendOptions options;
    options.id = id;
    options.base_url = stub.base_url();
    options.model_name = "stub-model";
    options.retry_budget = 3;
    options.retry_base_delay_ms = 5;
    options.max_in_flight = 4;
    options.timeout_ms = 5000;
    return options;
}

GenerationRequest simple_request() {
    GenerationRequest request;
    request.prompt = "Query: ping\nAnswer:";
    request.temperature = 0.5;
    request.max_tokens = 32;
    request.seed = 9;
    return request;
}

}  // namespace

TEST_CASE("completion and embedding round trips against the stub") {
    StubServer stub;

    HttpGenerationBackend completions(options_for(stub));
    CHECK(completions.generate(simple_request()) == "completion for temp 0.500000");
    CHECK(stub.last_model() == "stub-model");

    HttpBackendOptions chat_options = options_for(stub, "http-chat");
    chat_options.chat = true;
    HttpGenerationBackend chat(chat_options);
    CHECK(chat.generate(simple_request()) == "chat reply");

    HttpEmbeddingBackend embeddings(options_for(stub, "http-embed"), 8);
    const EmbeddingVector vec = embeddings.embed("hello");
    CHECK(vec.dimension() == 8);
    CHECK(vec.values[0] != 0.0);
    CHECK(embeddings.embed("hello").values == vec.values);

    HttpEmbeddingBackend wrong_dim(options_for(stub, "http-embed-16"), 16);
    CHECK_THROWS_AS(wrong_dim.embed("hello"), BackendUnavailable);
}

TEST_CASE("client strips stop sequences that the server ignored") {
    StubServer stub;
    HttpGenerationBackend backend(options_for(stub));
    GenerationRequest request = simple_request();
    request.stop_sequences = {" for temp"};
    CHECK(backend.generate(request) == "completion");

    request.stop_sequences = {"completion"};
    CHECK_THROWS_AS(backend.generate(request), EmptyGeneration);
}

TEST_CASE("injected 500s are retried within the budget") {
    StubServer stub;
    stub.fail_next = 2;
    HttpGenerationBackend backend(options_for(stub));
    CHECK(backend.generate(simple_request()) == "completion for temp 0.500000");
    CHECK(stub.requests.load() == 3);  // 2 failures + 1 success
}

TEST_CASE("the retry budget bounds the attempts, then the backend is unavailable") {
    StubServer stub;
    stub.fail_next = 100;
    HttpBackendOptions options = options_for(stub);
    options.retry_budget = 2;
    HttpGenerationBackend backend(options);
    CHECK_THROWS_AS(backend.generate(simple_request()), BackendUnavailable);
    CHECK(stub.requests.load() == 3);  // initial attempt + 2 retries, never more
}

TEST_CASE("non-retryable statuses fail fast") {
    StubServer stub;
    stub.hard_status = 404;
    HttpGenerationBackend backend(options_for(stub));
    CHECK_THROWS_AS(backend.generate(simple_request()), BackendUnavailable);
    CHECK(stub.requests.load() == 1);
}

TEST_CASE("transport errors exhaust the budget too") {
    HttpBackendOptions options;
    options.id = "http-dead";
    options.base_url = "http://127.0.0.1:9";  // discard port; nothing listens
    options.model_name = "stub-model";
    options.retry_budget = 1;
    options.retry_base_delay_ms = 1;
    options.timeout_ms = 200;
    HttpGenerationBackend backend(options);
    CHECK_THROWS_AS(backend.generate(simple_request()), BackendUnavailable);
}

TEST_CASE("concurrent generates never exceed max_in_flight") {
    StubServer stub;
    stub.handler_delay_ms = 25;
    HttpBackendOptions options = options_for(stub);
    options.max_in_flight = 2;
    HttpGenerationBackend backend(options);

    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([&] {
            if (!backend.generate(simple_request()).empty()) ok.fetch_add(1);
        });
    }
    for (auto& t : threads) t.join();
    CHECK(ok.load() == 8);
    CHECK(stub.max_in_flight.load() <= 2);
}

TEST_CASE("api keys come from the environment, never the config") {
    StubServer stub;
    ::setenv("QB_TEST_API_KEY", "secret-123", 1);
    HttpBackendOptions options = options_for(stub);
    options.api_key_env = "QB_TEST_API_KEY";
    HttpGenerationBackend backend(options);
    backend.generate(simple_request());
    CHECK(stub.last_authorization() == "Bearer secret-123");

    ::unsetenv("QB_TEST_API_KEY");
    CHECK_THROWS_AS((HttpGenerationBackend{options}), ConfigError);

    // unauthenticated local servers are fine
    HttpBackendOptions anonymous = options_for(stub, "http-anon");
    HttpGenerationBackend no_auth(anonymous);
    no_auth.generate(simple_request());
    CHECK(stub.last_authorization().empty());
}
