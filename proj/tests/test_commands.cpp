#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "queryback/commands.hpp"
#include "queryback/error.hpp"
#include "queryback/simulated.hpp"

using namespace queryback;

namespace {

RunConfig benchmark_config(const std::string& cache_dir = {}, size_t items = 40) {
    RunConfig config;
    WorldSpec world;
    world.seed = 7;
    world.items = items;
    config.worlds["bench"] = world;

    BackendEntry forward;
    forward.id = "sim-f";
    forward.kind = "simulated";
    forward.world = "bench";
    config.backends.push_back(forward);

    for (int b = 1; b <= 2; ++b) {
        BackendEntry backward;
        backward.id = "sim-b" + std::to_string(b);
        backward.kind = "simulated";
        backward.world = "bench";
        backward.salt = static_cast<std::uint64_t>(b);
        config.backends.push_back(backward);
    }
    BackendEntry embed;
    embed.id = "sim-embed";
    embed.kind = "simulated-embedding";
    config.backends.push_back(embed);

    config.detector.backward_backends = {"sim-b1", "sim-b2"};
    config.detector.embedding_backend = "sim-embed";
    config.tasks.push_back({TaskKind::Movies, "", "", "bench"});
    config.evaluation.forward_backend = "sim-f";
    config.base_seed = 42;
    config.cache_dir = cache_dir;
    return config;
}

std::filesystem::path fresh_dir(const std::string& name) {
    const std::filesystem::path dir = std::filesystem::path("build") / "cmd_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

struct CoutCapture {
    CoutCapture() : old_(std::cout.rdbuf(buffer_.rdbuf())) {}
    ~CoutCapture() { std::cout.rdbuf(old_); }
    std::string text() const { return buffer_.str(); }

private:
    std::ostringstream buffer_;
    std::streambuf* old_;
};

}  // namespace

TEST_CASE("run_evaluation produces one record per item with all methods") {
    RunConfig config = benchmark_config();
    BackendRegistry registry = build_registry(config);
    const auto records = run_evaluation({}, config, registry);
    REQUIRE(records.size() == 40);
    for (const auto& record : records) {
        CHECK(record.forward_backend == "sim-f");
        CHECK(record.methods.count("interrogate") == 1);
        CHECK(record.methods.count("embed-cosine") == 1);
        CHECK(record.methods.count("selfcheck") == 1);
        CHECK_FALSE(record.generated_answer.empty());
    }
    // grounded items come back consistent, fabricated ones flagged
    auto world = registry.world("bench");
    for (const auto& record : records) {
        const WorldItem* item = world->find_item(record.record.id);
        REQUIRE(item != nullptr);
        if (item->mode == HallucinationMode::None) {
            CHECK_FALSE(record.label);
            CHECK_FALSE(record.methods.at("interrogate").verdict);
        }
        if (item->mode == HallucinationMode::Fabricate) {
            CHECK(record.label);
        }
    }
}

TEST_CASE("method and task filters narrow the run") {
    RunConfig config = benchmark_config();
    BackendRegistry registry = build_registry(config);

    EvaluateArgs args;
    args.methods = {"interrogate"};
    args.limit = 5;
    const auto records = run_evaluation(args, config, registry);
    REQUIRE(records.size() == 5);
    CHECK(records[0].methods.size() == 1);
    CHECK(records[0].methods.count("interrogate") == 1);

    EvaluateArgs wrong_task;
    wrong_task.tasks = {"books"};
    CHECK(run_evaluation(wrong_task, config, registry).empty());

    EvaluateArgs bad_method;
    bad_method.methods = {"nonsense"};
    CHECK_THROWS_AS(run_evaluation(bad_method, config, registry), ConfigError);
}

TEST_CASE("k-sweep adds interrogate@k methods and the csv series") {
    RunConfig config = benchmark_config();
    config.evaluation.k_sweep = true;
    BackendRegistry registry = build_registry(config);

    EvaluateArgs args;
    args.limit = 12;
    const auto records = run_evaluation(args, config, registry);
    for (size_t k = 1; k <= 5; ++k) {
        CHECK(records[0].methods.count("interrogate@k=" + std::to_string(k)) == 1);
    }

    const std::string csv = k_series_csv(records);
    CHECK(csv.find("task,forward_backend,k,auc,b_acc") == 0);
    for (size_t k = 1; k <= 5; ++k) {
        CHECK(csv.find("movies,sim-f," + std::to_string(k) + ",") != std::string::npos);
    }

    // no sweep methods -> no series
    EvaluateArgs plain;
    plain.methods = {"embed-cosine"};
    plain.limit = 4;
    CHECK(k_series_csv(run_evaluation(plain, config, registry)).empty());
}

TEST_CASE("evaluation runs are deterministic and parallelism-independent") {
    RunConfig serial = benchmark_config();
    BackendRegistry serial_registry = build_registry(serial);
    const auto first = run_evaluation({}, serial, serial_registry);
    const auto second = run_evaluation({}, serial, serial_registry);

    RunConfig parallel = benchmark_config();
    parallel.parallelism = 4;
    BackendRegistry parallel_registry = build_registry(parallel);
    const auto third = run_evaluation({}, parallel, parallel_registry);

    REQUIRE(first.size() == second.size());
    REQUIRE(first.size() == third.size());
    for (size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].to_json() == second[i].to_json());
        CHECK(first[i].to_json() == third[i].to_json());
    }
}

TEST_CASE("interrupted runs resume from the cache with zero duplicate calls") {
    const auto cache_a = fresh_dir("resume_cache");
    const auto cache_b = fresh_dir("cold_cache");

    // interrupted at 50%, then resumed to completion on the same cache
    RunConfig config = benchmark_config(cache_a.string());
    BackendRegistry registry = build_registry(config);
    EvaluateArgs half;
    half.limit = 20;
    run_evaluation(half, config, registry);
    std::uint64_t phase1 = 0;
    for (const auto& id : {"sim-f", "sim-b1", "sim-b2"}) {
        phase1 += std::dynamic_pointer_cast<SimulatedModel>(registry.raw_generator(id))
                      ->call_count();
    }
    const auto resumed = run_evaluation({}, config, registry);
    std::uint64_t total = 0;
    for (const auto& id : {"sim-f", "sim-b1", "sim-b2"}) {
        total += std::dynamic_pointer_cast<SimulatedModel>(registry.raw_generator(id))
                     ->call_count();
    }

    // one uninterrupted run on a cold cache = the baseline amount of work
    RunConfig cold = benchmark_config(cache_b.string());
    BackendRegistry cold_registry = build_registry(cold);
    const auto uninterrupted = run_evaluation({}, cold, cold_registry);
    std::uint64_t cold_total = 0;
    for (const auto& id : {"sim-f", "sim-b1", "sim-b2"}) {
        cold_total += std::dynamic_pointer_cast<SimulatedModel>(cold_registry.raw_generator(id))
                          ->call_count();
    }

    CHECK(phase1 < total);
    CHECK(total == cold_total);  // resume repeated no generation work
    REQUIRE(resumed.size() == uninterrupted.size());
    for (size_t i = 0; i < resumed.size(); ++i) {
        CHECK(resumed[i].to_json() == uninterrupted[i].to_json());
    }
}

TEST_CASE("cmd_evaluate writes records, report, meta and is byte-stable") {
    const auto out_a = fresh_dir("eval_out_a");
    const auto out_b = fresh_dir("eval_out_b");

    RunConfig config = benchmark_config();
    config.evaluation.k_sweep = true;
    EvaluateArgs args;
    args.limit = 10;

    config.output_dir = out_a.string();
    BackendRegistry registry_a = build_registry(config);
    CoutCapture capture_a;
    CHECK(cmd_evaluate(args, config, registry_a) == 0);

    config.output_dir = out_b.string();
    BackendRegistry registry_b = build_registry(config);
    CoutCapture capture_b;
    CHECK(cmd_evaluate(args, config, registry_b) == 0);

    CHECK(std::filesystem::exists(out_a / "records.jsonl"));
    CHECK(std::filesystem::exists(out_a / "report.json"));
    CHECK(std::filesystem::exists(out_a / "k_series.csv"));
    CHECK(std::filesystem::exists(out_a / "run_meta.json"));
    CHECK(slurp(out_a / "records.jsonl") == slurp(out_b / "records.jsonl"));
    CHECK(slurp(out_a / "report.json") == slurp(out_b / "report.json"));
    CHECK(slurp(out_a / "k_series.csv") == slurp(out_b / "k_series.csv"));

    const auto records = read_records((out_a / "records.jsonl").string());
    CHECK(records.size() == 10);
}

TEST_CASE("reports carry the fold and the reference footer") {
    RunConfig config = benchmark_config();
    BackendRegistry registry = build_registry(config);
    EvaluateArgs args;
    args.limit = 15;
    const auto records = run_evaluation(args, config, registry);

    const std::string table = format_report(records);
    CHECK(table.find("movies") != std::string::npos);
    CHECK(table.find("interrogate") != std::string::npos);
    CHECK(table.find("reference points from published large-scale runs") != std::string::npos);
    CHECK(table.find("0.8130") != std::string::npos);

    const nlohmann::json report = report_json(records);
    CHECK(report["schema_version"] == 1);
    CHECK(report["groups"].size() >= 3);
    CHECK(report["reference_footer"].size() == 11);
    bool found_interrogate = false;
    for (const auto& group : report["groups"]) {
        if (group["method"] == "interrogate") {
            found_interrogate = true;
            CHECK(group["n_items"] == 15);
            CHECK(group["counts"].contains("tp"));
        }
    }
    CHECK(found_interrogate);
}

TEST_CASE("cmd_report renders saved records and flags empty files") {
    const auto dir = fresh_dir("report_cmd");
    RunConfig config = benchmark_config();
    config.evaluation.k_sweep = true;
    BackendRegistry registry = build_registry(config);
    EvaluateArgs args;
    args.limit = 8;
    const auto records = run_evaluation(args, config, registry);
    write_records((dir / "records.jsonl").string(), records);

    {
        CoutCapture capture;
        CHECK(cmd_report({(dir / "records.jsonl").string(), dir.string()}) == 0);
        CHECK(capture.text().find("interrogate@k=3") != std::string::npos);
    }
    CHECK(std::filesystem::exists(dir / "k_series.csv"));

    std::ofstream(dir / "empty.jsonl").close();
    CHECK(cmd_report({(dir / "empty.jsonl").string(), dir.string()}) == 2);
    CHECK(cmd_report({(dir / "missing.jsonl").string(), dir.string()}) == 2);
}

TEST_CASE("cmd_detect exit codes follow the verdict") {
    RunConfig config = benchmark_config();
    BackendRegistry registry = build_registry(config);
    auto world = registry.world("bench");

    const WorldItem* grounded = nullptr;
    const WorldItem* fabricated = nullptr;
    for (const auto& item : world->items()) {
        if (item.mode == HallucinationMode::None && !grounded) grounded = &item;
        if (item.mode == HallucinationMode::Fabricate && !fabricated) fabricated = &item;
    }
    REQUIRE(grounded != nullptr);
    REQUIRE(fabricated != nullptr);

    DetectArgs ok;
    ok.query = grounded->query;
    {
        CoutCapture capture;
        CHECK(cmd_detect(ok, config, registry) == 0);
        CHECK(capture.text().find("consistent") != std::string::npos);
    }

    DetectArgs bad;
    bad.query = fabricated->query;
    bad.json_output = true;
    {
        CoutCapture capture;
        CHECK(cmd_detect(bad, config, registry) == 1);
        const nlohmann::json outcome = nlohmann::json::parse(capture.text());
        CHECK(outcome["verdict"] == true);
        CHECK(outcome["reconstructions"].size() == 10);
    }

    // pre-supplied answer skips the forward pass
    DetectArgs given;
    given.query = grounded->query;
    given.answer = grounded->answer;
    {
        CoutCapture capture;
        CHECK(cmd_detect(given, config, registry) == 0);
    }

    DetectArgs empty;
    CHECK(cmd_detect(empty, config, registry) == 2);

    RunConfig broken = benchmark_config();
    broken.detector.backward_backends = {"missing-backend"};
    BackendRegistry broken_registry = build_registry(broken);
    DetectArgs q;
    q.query = grounded->query;
    CHECK(cmd_detect(q, broken, broken_registry) == 2);
}

TEST_CASE("cmd_calibrate prints the swept threshold for the shipped fixture") {
    RunConfig config = benchmark_config();
    BackendRegistry registry = build_registry(config);

    CalibrateArgs args;
    args.pairs_path = "data/fixtures/calibration_pairs.jsonl";
    CoutCapture capture;
    CHECK(cmd_calibrate(args, config, registry) == 0);
    const double tau = std::stod(capture.text());
    CHECK(tau > 0.0);
    CHECK(tau < 1.0);

    CalibrateArgs missing;
    missing.pairs_path = "does/not/exist.jsonl";
    CHECK(cmd_calibrate(missing, config, registry) == 2);
}

TEST_CASE("file-backed datasets run through the whole pipeline") {
    // The simulated world knows nothing about these records, so every answer
    // is a deterministic fallback fabrication; the point is that dataset
    // loading, prompt files, verifiers and all three methods hold together.
    RunConfig config = benchmark_config();
    config.tasks.clear();
    config.tasks.push_back(
        {TaskKind::Movies, "data/fixtures/movies.jsonl", "data/prompts/movies.json", ""});
    config.tasks.push_back(
        {TaskKind::Books, "data/fixtures/books.jsonl", "data/prompts/books.json", ""});
    config.tasks.push_back(
        {TaskKind::Gci, "data/fixtures/gci.jsonl", "data/prompts/gci.json", ""});

    BackendRegistry registry = build_registry(config);
    const auto records = run_evaluation({}, config, registry);
    REQUIRE(records.size() == 16);  // 6 movies + 5 books + 5 gci
    for (const auto& record : records) {
        CHECK_FALSE(record.generated_answer.empty());
        CHECK(record.label);  // fallback answers never match the real truth
        CHECK(record.methods.at("interrogate").verdict);
    }
    const std::string table = format_report(records);
    CHECK(table.find("books") != std::string::npos);
    CHECK(table.find("gci") != std::string::npos);

    // single-class labels: AUC omitted, plain accuracy flagged in the table
    const MetricsReport single_class = fold_metrics(records, "interrogate");
    CHECK_FALSE(single_class.auc.has_value());
    CHECK_FALSE(single_class.balanced);
    CHECK(table.find("*") != std::string::npos);
}

TEST_CASE("the installed binary wires flags, configs and exit codes") {
    const std::string cli = QUERYBACK_CLI_PATH;
    const auto dir = fresh_dir("cli_smoke");

    // pick stable queries out of the shipped synthetic config's world
    const RunConfig config = load_run_config("configs/synthetic.json");
    BackendRegistry registry = build_registry(config);
    auto world = registry.world("bench");
    const WorldItem* grounded = nullptr;
    const WorldItem* fabricated = nullptr;
    for (const auto& item : world->items()) {
        if (item.mode == HallucinationMode::None && !grounded) grounded = &item;
        if (item.mode == HallucinationMode::Fabricate && !fabricated) fabricated = &item;
    }
    REQUIRE(grounded != nullptr);
    REQUIRE(fabricated != nullptr);

    auto run = [&](const std::string& args) {
        const std::string command = cli + " " + args + " > " + (dir / "stdout.txt").string() +
                                    " 2> " + (dir / "stderr.txt").string();
        const int status = std::system(command.c_str());
        return WEXITSTATUS(status);
    };

    CHECK(run("detect --config configs/synthetic.json --query '" + grounded->query +
              "' --json") == 0);
    const nlohmann::json outcome = nlohmann::json::parse(slurp(dir / "stdout.txt"));
    CHECK(outcome["verdict"] == false);
    CHECK(outcome["config"]["k"] == 5);

    CHECK(run("detect --config configs/synthetic.json --query '" + fabricated->query + "'") ==
          1);

    // --k overrides the config file
    CHECK(run("detect --config configs/synthetic.json --k 2 --query '" + grounded->query +
              "' --json") == 0);
    const nlohmann::json small_k = nlohmann::json::parse(slurp(dir / "stdout.txt"));
    CHECK(small_k["config"]["k"] == 2);
    CHECK(small_k["reconstructions"].size() == 4);

    CHECK(run("detect --config configs/synthetic.json --query ''") == 2);
    CHECK(run("detect --config does-not-exist.json --query 'x'") == 2);

    CHECK(run("calibrate --config configs/synthetic.json --pairs "
              "data/fixtures/calibration_pairs.jsonl") == 0);
    CHECK(std::stod(slurp(dir / "stdout.txt")) > 0.0);

    CHECK(run("evaluate --config configs/synthetic.json --limit 8 --methods interrogate") == 0);
    CHECK(std::filesystem::exists("out/synthetic/records.jsonl"));
    CHECK(run("report --records out/synthetic/records.jsonl --output-dir " + dir.string()) ==
          0);
}

TEST_CASE("run config files load and built-in defaults hold") {
    const auto dir = fresh_dir("config_files");
    const auto path = dir / "run.json";
    {
        std::ofstream out(path);
        out << R"({
            "worlds": {"bench": {"seed": 7, "items": 20}},
            "backends": [
                {"id": "sim-f", "kind": "simulated", "world": "bench"},
                {"id": "sim-b1", "kind": "simulated", "world": "bench", "salt": 1},
                {"id": "sim-embed", "kind": "simulated-embedding", "dimension": 128}
            ],
            "detector": {"k": 3, "tau": 0.8, "aggregation": "maximum",
                         "backward_backends": ["sim-b1"], "embedding_backend": "sim-embed"},
            "tasks": [{"task": "movies", "world": "bench"}],
            "evaluation": {"forward_backend": "sim-f", "methods": ["interrogate"]},
            "base_seed": 5,
            "parallelism": 2
        })";
    }
    const RunConfig config = load_run_config(path.string());
    CHECK(config.worlds.at("bench").items == 20);
    CHECK(config.detector.k == 3);
    CHECK(config.detector.tau == 0.8);
    CHECK(config.detector.aggregation == AggregationMode::Maximum);
    CHECK(config.detector.variable_temperature);  // default stands
    CHECK(config.base_seed == 5);
    CHECK(config.parallelism == 2);
    CHECK(config.evaluation.methods == std::vector<std::string>{"interrogate"});

    BackendRegistry registry = build_registry(config);
    CHECK(registry.embedder("sim-embed")->dimension() == 128);
    EvaluateArgs args;
    const auto records = run_evaluation(args, config, registry);
    CHECK(records.size() == 20);

    CHECK_THROWS_AS(load_run_config("missing.json"), ConfigError);
}

TEST_CASE("duplicate backend ids are rejected") {
    RunConfig config = benchmark_config();
    BackendEntry duplicate = config.backends.front();
    config.backends.push_back(duplicate);
    CHECK_THROWS_AS(build_registry(config), ConfigError);
}
