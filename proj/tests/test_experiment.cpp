#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "hetformer/experiment.hpp"
#include "hetformer/parameters.hpp"

using namespace hetformer;
using hetformer::testing::TempDir;

TEST_CASE("git blob hash matches git's object id") {
    const std::string hello = "hello\n";
    CHECK(git_blob_sha1(std::vector<char>(hello.begin(), hello.end())) == "ce013625030ba8dba906f756967f9e9ca394464a");
    CHECK(git_blob_sha1({}) == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST_CASE("provenance expands directories") {
    TempDir dir("prov");
    std::ofstream(dir.file("a.txt")) << "hello\n";
    const auto p = provenance({dir.str()});
    CHECK(p.dump().find("ce013625030ba8dba906f756967f9e9ca394464a") != std::string::npos);
}

TEST_CASE("configs round-trip and reject unknown keys") {
    ExperimentConfig cfg;
    cfg.graph_dir = "g";
    cfg.walk.top_gamma = 30;
    cfg.train.lr = 0.005;
    cfg.ablation.no_positional = true;
    cfg.precision = Precision::Float64;
    cfg.synth.background_users = 12;
    cfg.synth.attributes = {{NodeType::User, "profile", 7}};
    cfg.gammas = {3, 5};
    const auto j = config_to_json(cfg);
    const auto back = config_from_json(j);
    CHECK(config_to_json(back) == j);
    CHECK(back.walk.top_gamma == 30);
    CHECK(back.synth.attributes.front().dim == 7);

    auto bad = j;
    bad["train"]["learning_rate"] = 1.0;
    CHECK_THROWS_AS(config_from_json(bad), std::invalid_argument);
    bad = j;
    bad["schema"] = "twitter";
    CHECK_THROWS_AS(config_from_json(bad), std::invalid_argument);

    const auto partial = config_from_json(nlohmann::json{{"walk", {{"seed", 9}}}}, cfg);
    CHECK(partial.walk.seed == 9);
    CHECK(partial.walk.top_gamma == 30);
    CHECK(model_config(cfg).seed == cfg.train.seed);
}

TEST_CASE("checkpoints round-trip and reject mismatches") {
    ParameterStore<float> a(1), b(2);
    a.create("w", 3, 2, Init::Xavier);
    a.create_vector("b", 2, Init::Small);
    b.create("w", 3, 2, Init::Zeros);
    b.create_vector("b", 2, Init::Zeros);
    const auto bytes = encode_checkpoint(snapshot(a));
    restore(b, decode_checkpoint(bytes));
    CHECK(snapshot(b).at("w").data == snapshot(a).at("w").data);
    CHECK(snapshot(b).at("b").dims == std::vector<std::uint32_t>{2});

    ParameterStore<float> c(1);
    c.create("w", 2, 3, Init::Zeros);
    try {
        restore(c, snapshot(a));
        FAIL("expected BadCheckpoint");
    } catch (const TensorError& e) {
        CHECK(e.kind() == TensorErrc::BadCheckpoint);
    }
    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(decode_checkpoint(trailing), TensorError);
    CHECK_THROWS_AS(a.create("w", 1, 1, Init::Zeros), ModelError);

    ParameterStore<float> d(1), e(1);
    d.create("x", 4, 4, Init::Xavier);
    e.create("other", 1, 1, Init::Xavier);
    e.create("x", 4, 4, Init::Xavier);
    CHECK(snapshot(d).at("x").data == snapshot(e).at("x").data);
}

TEST_CASE("truncating samples equals resampling with the smaller gamma") {
    const auto g = hetformer::testing::random_graph(40, 30, 2);
    WalkConfig w;
    w.iterations = 3000;
    w.top_gamma = 16;
    const auto big = sample_all(g, w);
    w.top_gamma = 5;
    CHECK(truncate_samples(big, 5) == sample_all(g, w));
}

TEST_CASE("samples are cached and reused") {
    TempDir dir("cache");
    SynthConfig s;
    s.news = 20;
    write_dataset(generate(s), dir.str());
    ExperimentConfig cfg;
    cfg.graph_dir = dir.str();
    cfg.cache = dir.file("cache.rwr");
    cfg.walk.iterations = 300;
    const auto data = load_dataset(cfg);
    const auto first = obtain_samples(cfg, data.graph);
    CHECK(std::filesystem::exists(cfg.cache));
    cfg.walk.seed = 1234;  // ignored: the cache wins
    CHECK(obtain_samples(cfg, data.graph) == first);
}

TEST_CASE("evaluation of a trained checkpoint reproduces the test metrics") {
    ExperimentConfig cfg;
    cfg.synth.news = 60;
    cfg.synth.attributes = {{NodeType::News, "text", 4}, {NodeType::Post, "text", 4}, {NodeType::User, "profile", 4}};
    cfg.content.dim = 8;
    cfg.walk.iterations = 500;
    cfg.walk.top_gamma = 6;
    cfg.train.epochs = 3;
    const auto data = make_dataset(generate(cfg.synth));
    const auto samples = sample_all(data.graph, cfg.walk);
    const auto result = run_training(cfg, data, samples);
    const auto m = run_evaluation(cfg, data, samples, result.run.best, result.split.test);
    CHECK(m.accuracy == result.run.test.accuracy);
    CHECK(m.confusion == result.run.test.confusion);
}
