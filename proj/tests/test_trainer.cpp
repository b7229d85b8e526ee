#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "hetformer/experiment.hpp"
#include "hetformer/trainer.hpp"

using namespace hetformer;

namespace {

std::vector<std::pair<NodeId, NewsLabel>> labeled(std::size_t n, std::size_t fake) {
    std::vector<std::pair<NodeId, NewsLabel>> out;
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(i + 1, i < fake ? NewsLabel::Fake : NewsLabel::Real);
    return out;
}

std::size_t count_fake(const std::vector<NodeId>& ids, std::size_t fake) {
    return static_cast<std::size_t>(std::count_if(ids.begin(), ids.end(), [&](NodeId id) { return id <= fake; }));
}

}  // namespace

TEST_CASE("split sizes, disjointness and stratification") {
    const auto s = split_news(labeled(100, 40), 0.1, 7);
    CHECK(s.test.size() == 10);
    CHECK(s.val.size() == 18);
    CHECK(s.train.size() == 72);
    std::set<NodeId> all;
    for (const auto* part : {&s.train, &s.val, &s.test}) {
        CHECK(std::is_sorted(part->begin(), part->end()));
        all.insert(part->begin(), part->end());
    }
    CHECK(all.size() == 100);
    CHECK(count_fake(s.test, 40) == 4);
    CHECK(count_fake(s.val, 40) == 7);
    CHECK(split_news(labeled(100, 40), 0.1, 7).test == s.test);
    CHECK(split_news(labeled(100, 40), 0.1, 8).test != s.test);
    try {
        split_news(labeled(9, 4), 0.1, 1);
        FAIL("expected TooFewSamples");
    } catch (const TrainError& e) {
        CHECK(e.kind() == TrainErrc::TooFewSamples);
    }
}

TEST_CASE("metrics from a confusion matrix") {
    using L = NewsLabel;
    const std::vector<L> truth = {L::Fake, L::Fake, L::Fake, L::Real, L::Real, L::Real, L::Real, L::Real};
    const std::vector<L> pred = {L::Fake, L::Fake, L::Real, L::Real, L::Real, L::Real, L::Fake, L::Real};
    const auto m = compute_metrics(truth, pred);
    CHECK(m.accuracy == doctest::Approx(6.0 / 8.0));
    CHECK(m.fake.precision == doctest::Approx(2.0 / 3.0));
    CHECK(m.fake.recall == doctest::Approx(2.0 / 3.0));
    CHECK(m.real.precision == doctest::Approx(4.0 / 5.0));
    CHECK(m.real.recall == doctest::Approx(4.0 / 5.0));
    CHECK(m.real.f1 == doctest::Approx(0.8));
    CHECK(m.confusion[0][1] == 1);
    CHECK(m.fake.support == 3);
    CHECK(f1_score(0.719, 0.605) == doctest::Approx(0.657).epsilon(0.001));
    CHECK(f1_score(0.0, 0.0) == 0.0);
    CHECK(decide(0.5) == L::Real);
    CHECK(decide(0.4999) == L::Fake);
    CHECK(compute_metrics({}, {}).accuracy == 0.0);
}

TEST_CASE("training with a zero learning rate leaves parameters unchanged") {
    SynthConfig s;
    s.news = 40;
    s.attributes = {{NodeType::News, "text", 4}, {NodeType::Post, "text", 4}, {NodeType::User, "profile", 4}};
    const auto data = make_dataset(generate(s));
    WalkConfig w;
    w.iterations = 500;
    w.top_gamma = 6;
    const auto samples = sample_all(data.graph, w);
    ModelConfig mc;
    mc.content.dim = 8;
    HetFormerModel<float> model(mc, data.graph, samples, data.features);
    const auto before = snapshot(model.params());
    TrainConfig tc;
    tc.lr = 0.0;
    tc.momentum = 0.9;
    tc.epochs = 3;
    const auto split = split_news(data.graph, 0.1, 1);
    const auto run = train(model, data.graph, split, tc);
    CHECK(run.log.size() == 3);
    CHECK(run.best_epoch == 1);
    const auto after = snapshot(model.params());
    REQUIRE(after.size() == before.size());
    for (const auto& [name, entry] : before) CHECK(after.at(name).data == entry.data);
}

TEST_CASE("early stopping, best checkpoint and deterministic logs") {
    SynthConfig s;
    s.news = 60;
    s.attributes = {{NodeType::News, "text", 4}, {NodeType::Post, "text", 4}, {NodeType::User, "profile", 4}};
    const auto data = make_dataset(generate(s));
    WalkConfig w;
    w.iterations = 500;
    w.top_gamma = 6;
    const auto samples = sample_all(data.graph, w);
    ModelConfig mc;
    mc.content.dim = 8;
    TrainConfig tc;
    tc.lr = 0.01;
    tc.epochs = 12;
    tc.patience = 2;
    const auto split = split_news(data.graph, 0.1, 1);
    auto run_once = [&] {
        HetFormerModel<double> model(mc, data.graph, samples, data.features);
        auto run = train(model, data.graph, split, tc);
        const auto val = evaluate(model, data.graph, split.val, 16);
        CHECK(val.accuracy == run.best_val_acc);
        return run;
    };
    const auto a = run_once();
    const auto b = run_once();
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].train_loss == b.log[i].train_loss);
        CHECK(a.log[i].val_acc == b.log[i].val_acc);
    }
    CHECK(a.log.size() <= a.best_epoch + tc.patience);
    for (const auto& e : a.log) CHECK(e.val_acc <= a.best_val_acc);
}

TEST_CASE("evaluation rejects unlabeled news and bad configs") {
    const auto g = HetGraph::build({{1, NodeType::News, std::nullopt}, {2, NodeType::Post, std::nullopt}},
                                   {{1, 2, EdgeType::NewsPost}});
    EmbeddingTable news(AttributeKey{NodeType::News, "text", 2});
    const float v[2] = {1, 2};
    news.set(1, v);
    FeatureStore f2({news});
    SampleMap samples;
    samples[1] = make_sample(1, {});
    ModelConfig mc;
    mc.content.dim = 4;
    HetFormerModel<double> model(mc, g, samples, f2);
    const NodeId ids[1] = {1};
    try {
        evaluate(model, g, ids, 4);
        FAIL("expected MissingLabel");
    } catch (const TrainError& e) {
        CHECK(e.kind() == TrainErrc::MissingLabel);
    }
    TrainConfig tc;
    tc.momentum = 1.0;
    CHECK_THROWS_AS(tc.validate(), TrainError);
    tc = {};
    tc.batch = 0;
    CHECK_THROWS_AS(tc.validate(), TrainError);
}
