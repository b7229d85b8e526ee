#include <doctest.h>

#include <random>

#include "hetformer/experiment.hpp"
#include "hetformer/model.hpp"
#include "hetformer/synth.hpp"

using namespace hetformer;

namespace {

struct Fixture {
    Dataset data;
    SampleMap samples;

    explicit Fixture(std::uint32_t gamma, std::uint64_t seed = 3) {
        SynthConfig s;
        s.news = 30;
        s.attributes = {{NodeType::News, "text", 6}, {NodeType::Post, "text", 5}, {NodeType::User, "profile", 4}};
        s.seed = seed;
        data = make_dataset(generate(s));
        WalkConfig w;
        w.iterations = 2000;
        w.top_gamma = gamma;
        w.seed = seed;
        samples = sample_all(data.graph, w);
    }
};

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.content.dim = 8;
    cfg.content.heads = 2;
    cfg.transformer.heads = 2;
    cfg.transformer.max_len = 32;
    return cfg;
}

}  // namespace

TEST_CASE("sequence lengths follow the sample sizes") {
    Fixture f(12);
    HetFormerModel<double> model(small_config(), f.data.graph, f.samples, f.data.features);
    for (NodeId id : f.data.graph.news_ids()) {
        const auto& s = model.sample_for(id);
        const auto enc = model.encode_sample(id);
        CHECK(enc.enc.rows() == s.size() + 1);
        CHECK(enc.dec.rows() == s.count(NodeType::News) + 1);
        CHECK(enc.enc.cols() == 8);
    }
}

TEST_CASE("neighbor rows follow rank order") {
    Fixture f(10);
    auto cfg = small_config();
    cfg.transformer.no_positional = true;
    HetFormerModel<double> model(cfg, f.data.graph, f.samples, f.data.features);
    const NodeId id = f.data.graph.news_ids().front();
    const auto& s = model.sample_for(id);
    const auto enc = model.encode_sample(id);
    const auto& types = model.params().at("xf.type");
    // Removing the type embedding leaves the content rows; each must equal
    // the per-type encoding at the neighbor's position in its partition.
    std::array<std::vector<NodeId>, kNodeTypeCount> ids;
    for (std::size_t t = 0; t < kNodeTypeCount; ++t)
        for (const auto& n : s.partitions[t]) ids[t].push_back(n.id);
    std::array<tensor::Tensor<double>, kNodeTypeCount> per_type;
    for (std::size_t t = 0; t < kNodeTypeCount; ++t)
        per_type[t] = model.content().encode(static_cast<NodeType>(t), ids[t]);
    std::array<std::size_t, kNodeTypeCount> seen{};
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto t = static_cast<std::size_t>(s.ranked[i].type);
        const std::size_t k = seen[t]++;
        const auto tt = static_cast<std::size_t>(token_type(s.ranked[i].type));
        for (std::size_t c = 0; c < 8; ++c) {
            CHECK(enc.enc.at(i + 1, c) - types.at(tt, c) == doctest::Approx(per_type[t].at(k, c)).epsilon(1e-12));
        }
    }
}

TEST_CASE("ablation flags change the parameter set") {
    Fixture f(6);
    auto cfg = small_config();
    cfg.ablation.literal_eq8 = true;
    cfg.ablation.no_decoder = true;
    HetFormerModel<double> model(cfg, f.data.graph, f.samples, f.data.features);
    CHECK_FALSE(model.params().contains("head.hidden.w"));
    CHECK(model.params().contains("head.out.w"));
    CHECK_FALSE(model.params().contains("xf.dec.norm.g"));
    CHECK(model.config().transformer.no_decoder);

    cfg = small_config();
    cfg.ablation.target_only = true;
    HetFormerModel<double> target_only(cfg, f.data.graph, f.samples, f.data.features);
    const NodeId id = f.data.graph.news_ids().front();
    CHECK(target_only.sample_for(id).size() == 0);
    CHECK(target_only.encode_sample(id).enc.rows() == 1);
}

TEST_CASE("predictions are probabilities, one per news") {
    Fixture f(8);
    HetFormerModel<float> model(small_config(), f.data.graph, f.samples, f.data.features);
    std::mt19937_64 rng(1);
    const auto& ids = f.data.graph.news_ids();
    const auto p = model.predict(std::span<const NodeId>(ids.data(), 5), false, rng);
    CHECK(p.rows() == 5);
    CHECK(p.cols() == 1);
    for (float x : p.data()) {
        CHECK(x > 0.0f);
        CHECK(x < 1.0f);
    }
    SampleMap none;
    HetFormerModel<float> missing(small_config(), f.data.graph, none, f.data.features);
    CHECK_THROWS_AS(missing.sample_for(ids.front()), ModelError);
}

TEST_CASE("full model gradients pass finite differences") {
    const auto r = run_model_gradcheck(1);
    CHECK(r.checked > 1000);
    CHECK(r.max_rel_error < 1e-4);
}
