#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include "queryback/cache.hpp"
#include "queryback/error.hpp"
#include "queryback/simulated.hpp"

using namespace queryback;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
    const std::filesystem::path dir = std::filesystem::path("build") / "cache_tests" / name;
    std::filesystem::remove_all(dir);
    return dir;
}

GenerationRequest request_with(double temperature, std::uint64_t seed) {
    GenerationRequest request;
    request.prompt = "the prompt";
    request.temperature = temperature;
    request.max_tokens = 64;
    request.seed = seed;
    return request;
}

}  // namespace

TEST_CASE("second lookup with the same key skips the producer") {
    CacheStore store(fresh_dir("repeat"));
    const CacheKey key = make_generation_key("backend", "model", request_with(0.6, 1));

    int produced = 0;
    auto compute = [&] {
        ++produced;
        return std::string("value");
    };
    CHECK(store.get_or_compute_text(key, compute) == "value");
    CHECK(store.get_or_compute_text(key, compute) == "value");
    CHECK(produced == 1);
    CHECK(store.hits() == 1);
    CHECK(store.misses() == 1);
}

TEST_CASE("request parameters that matter produce distinct keys") {
    const CacheKey base = make_generation_key("backend", "model", request_with(0.6, 1));
    CHECK(make_generation_key("backend", "model", request_with(0.68, 1)).payload_hash !=
          base.payload_hash);
    CHECK(make_generation_key("backend", "model", request_with(0.6, 2)).payload_hash !=
          base.payload_hash);
    CHECK(make_generation_key("backend", "other-model", request_with(0.6, 1)).payload_hash !=
          base.payload_hash);
    CHECK(make_generation_key("other-backend", "model", request_with(0.6, 1)).storage_name() !=
          base.storage_name());

    GenerationRequest stop = request_with(0.6, 1);
    stop.stop_sequences = {"\n"};
    CHECK(make_generation_key("backend", "model", stop).payload_hash != base.payload_hash);

    // embedding vs generation never alias even with equal payloads
    CHECK(make_embedding_key("backend", "model", "text").storage_name() !=
          make_generation_key("backend", "model", request_with(0.6, 1)).storage_name());
}

TEST_CASE("values round-trip byte-identically") {
    CacheStore store(fresh_dir("roundtrip"));
    const CacheKey key = make_embedding_key("embed", "model", "some text");

    const std::vector<double> value{0.1, -0.25, 1.0 / 3.0, 0.0, 1e-17};
    const std::vector<double> first =
        store.get_or_compute_vector(key, [&] { return value; });
    const std::vector<double> second =
        store.get_or_compute_vector(key, [] { return std::vector<double>{9.9}; });
    CHECK(first == value);
    CHECK(second == value);
}

TEST_CASE("corrupt entries read as a miss and are recomputed") {
    const auto dir = fresh_dir("corrupt");
    CacheStore store(dir);
    const CacheKey key = make_generation_key("backend", "model", request_with(0.6, 1));

    int produced = 0;
    auto compute = [&] {
        ++produced;
        return std::string("value-" + std::to_string(produced));
    };
    CHECK(store.get_or_compute_text(key, compute) == "value-1");

    // flip the stored value without updating the checksum
    const std::filesystem::path entry =
        dir / "generation" / key.payload_hash.substr(0, 2) / (key.payload_hash + ".json");
    REQUIRE(std::filesystem::exists(entry));
    {
        std::ofstream out(entry, std::ios::trunc);
        out << R"({"schema_version":1,"value":"tampered","checksum":"00"})";
    }
    CHECK(store.get_or_compute_text(key, compute) == "value-2");
    CHECK(produced == 2);

    // garbage bytes behave the same way
    {
        std::ofstream out(entry, std::ios::trunc);
        out << "not json at all {{{";
    }
    CHECK(store.get_or_compute_text(key, compute) == "value-3");
}

TEST_CASE("producer failures are not cached") {
    CacheStore store(fresh_dir("failure"));
    const CacheKey key = make_generation_key("backend", "model", request_with(0.6, 1));

    CHECK_THROWS_AS(store.get_or_compute_text(
                        key, []() -> std::string { throw BackendUnavailable("down"); }),
                    BackendUnavailable);
    CHECK(store.get_or_compute_text(key, [] { return std::string("recovered"); }) ==
          "recovered");
}

TEST_CASE("concurrent callers for one key observe single-flight") {
    CacheStore store(fresh_dir("singleflight"));
    const CacheKey key = make_generation_key("backend", "model", request_with(0.6, 1));

    std::atomic<int> produced{0};
    auto compute = [&] {
        produced.fetch_add(1);
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
        return std::string("shared");
    };

    std::vector<std::thread> threads;
    std::vector<std::string> results(8);
    for (size_t i = 0; i < results.size(); ++i) {
        threads.emplace_back(
            [&, i] { results[i] = store.get_or_compute_text(key, compute); });
    }
    for (auto& t : threads) t.join();

    CHECK(produced.load() == 1);
    for (const auto& r : results) CHECK(r == "shared");
}

TEST_CASE("two stores on one directory share entries") {
    const auto dir = fresh_dir("shared");
    int produced = 0;
    auto compute = [&] {
        ++produced;
        return std::string("persisted");
    };
    const CacheKey key = make_generation_key("backend", "model", request_with(0.6, 1));
    {
        CacheStore first(dir);
        CHECK(first.get_or_compute_text(key, compute) == "persisted");
    }
    CacheStore second(dir);
    CHECK(second.get_or_compute_text(key, compute) == "persisted");
    CHECK(produced == 1);
}

TEST_CASE("cached backend decorators absorb repeat calls") {
    WorldSpec spec;
    spec.seed = 3;
    spec.items = 10;
    auto world = std::make_shared<SimulatedWorld>(SimulatedWorld::benchmark(spec));
    auto model = std::make_shared<SimulatedModel>("sim-a", world);
    auto store = std::make_shared<CacheStore>(fresh_dir("decorator"));
    CachedGenerationBackend cached(model, store, "sim-a");

    PromptSpec prompt_spec;
    prompt_spec.exemplars = world->exemplars();
    GenerationRequest request;
    request.prompt = render_forward(prompt_spec, world->items().front().query);
    request.temperature = 0.6;
    request.seed = 11;

    const std::string first = cached.generate(request);
    CHECK(model->call_count() == 1);
    CHECK(cached.generate(request) == first);
    CHECK(model->call_count() == 1);

    request.temperature = 0.68;
    cached.generate(request);
    CHECK(model->call_count() == 2);

    auto embedder = std::make_shared<HashedNgramEmbedder>("sim-embed", 64);
    CachedEmbeddingBackend cached_embed(embedder, store, "sim-embed");
    const EmbeddingVector vec = cached_embed.embed("hello world");
    CHECK(cached_embed.embed("hello world").values == vec.values);
    CHECK(embedder->call_count() == 1);
    CHECK(cached_embed.dimension() == 64);
}
