#include "hetformer/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "hetformer/binary_io.hpp"

namespace hetformer {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object section, rejecting unknown ones.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw std::invalid_argument("config: '" + name_ + "' must be an object");
    }
    ~Section() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (const auto& [key, _] : j_.items()) {
            if (!used_.count(key)) throw std::invalid_argument("config: unknown key '" + name_ + "." + key + "'");
        }
    }

    template <typename T>
    void get(const char* key, T& out) {
        used_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw std::invalid_argument("config: bad value for '" + name_ + "." + key + "': " + e.what());
        }
    }
    const json* child(const char* key) {
        used_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

private:
    const json& j_;
    std::string name_;
    std::set<std::string> used_;
};

NodeType node_type_from(const std::string& s) {
    auto t = parse_node_type(s);
    if (!t) throw std::invalid_argument("config: unknown node type '" + s + "'");
    return *t;
}

template <typename F>
auto with_precision(Precision p, F&& f) {
    if (p == Precision::Float64) return f(double{});
    return f(float{});
}

}  // namespace

ExperimentConfig config_from_json(const json& j, ExperimentConfig c) {
    Section top(j, "config");
    top.get("graph_dir", c.graph_dir);
    top.get("emb_dir", c.emb_dir);
    top.get("cache", c.cache);
    top.get("checkpoint", c.checkpoint);
    top.get("report", c.report);
    top.get("run_log", c.run_log);
    top.get("workers", c.workers);
    top.get("gammas", c.gammas);
    if (const json* s = top.child("schema")) {
        auto parsed = parse_schema(s->get<std::string>());
        if (!parsed) throw std::invalid_argument("config: unknown schema");
        c.schema = *parsed;
    }
    if (const json* p = top.child("precision")) {
        const auto v = p->get<std::string>();
        if (v == "float32") c.precision = Precision::Float32;
        else if (v == "float64") c.precision = Precision::Float64;
        else throw std::invalid_argument("config: precision must be float32 or float64");
    }
    if (const json* w = top.child("walk")) {
        Section s(*w, "walk");
        s.get("restart_p", c.walk.restart_p);
        s.get("iterations", c.walk.iterations);
        s.get("top_gamma", c.walk.top_gamma);
        s.get("seed", c.walk.seed);
    }
    if (const json* w = top.child("content")) {
        Section s(*w, "content");
        s.get("dim", c.content.dim);
        s.get("heads", c.content.heads);
        s.get("layers", c.content.layers);
        s.get("per_attribute_blocks", c.content.per_attribute_blocks);
    }
    if (const json* w = top.child("transformer")) {
        Section s(*w, "transformer");
        s.get("layers", c.transformer.layers);
        s.get("heads", c.transformer.heads);
        s.get("ff_dim", c.transformer.ff_dim);
        s.get("dropout", c.transformer.dropout);
        s.get("max_len", c.transformer.max_len);
    }
    if (const json* w = top.child("train")) {
        Section s(*w, "train");
        s.get("lr", c.train.lr);
        s.get("epochs", c.train.epochs);
        s.get("patience", c.train.patience);
        s.get("seed", c.train.seed);
        s.get("batch", c.train.batch);
        s.get("momentum", c.train.momentum);
        s.get("test_fraction", c.train.test_fraction);
        s.get("class_weight", c.train.class_weight);
    }
    if (const json* w = top.child("ablation")) {
        Section s(*w, "ablation");
        s.get("no_decoder", c.ablation.no_decoder);
        s.get("no_positional", c.ablation.no_positional);
        s.get("literal_eq8", c.ablation.literal_eq8);
        s.get("target_only", c.ablation.target_only);
    }
    if (const json* w = top.child("synth")) {
        Section s(*w, "synth");
        auto& y = c.synth;
        s.get("news", y.news);
        s.get("fake_fraction", y.fake_fraction);
        s.get("posts_per_news", y.posts_per_news);
        s.get("users_per_post", y.users_per_post);
        s.get("users", y.users);
        s.get("background_users", y.background_users);
        s.get("community_strength", y.community_strength);
        s.get("signal", y.signal);
        s.get("neighbor_signal", y.neighbor_signal);
        s.get("separation", y.separation);
        s.get("repost_prob", y.repost_prob);
        s.get("follows_per_user", y.follows_per_user);
        s.get("follow_community", y.follow_community);
        s.get("content_free", y.content_free);
        s.get("seed", y.seed);
        if (const json* attrs = s.child("attributes")) {
            y.attributes.clear();
            for (const auto& a : *attrs) {
                Section as(a, "synth.attributes[]");
                std::string type;
                AttributeSpec spec;
                as.get("type", type);
                as.get("name", spec.name);
                as.get("dim", spec.dim);
                spec.type = node_type_from(type);
                y.attributes.push_back(spec);
            }
        }
    }
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json attrs = json::array();
    for (const auto& a : c.synth.attributes) {
        attrs.push_back({{"type", std::string(to_string(a.type))}, {"name", a.name}, {"dim", a.dim}});
    }
    return {
        {"graph_dir", c.graph_dir},
        {"emb_dir", c.emb_dir},
        {"cache", c.cache},
        {"checkpoint", c.checkpoint},
        {"report", c.report},
        {"run_log", c.run_log},
        {"schema", std::string(to_string(c.schema))},
        {"workers", c.workers},
        {"precision", c.precision == Precision::Float64 ? "float64" : "float32"},
        {"gammas", c.gammas},
        {"walk",
         {{"restart_p", c.walk.restart_p},
          {"iterations", c.walk.iterations},
          {"top_gamma", c.walk.top_gamma},
          {"seed", c.walk.seed}}},
        {"content",
         {{"dim", c.content.dim},
          {"heads", c.content.heads},
          {"layers", c.content.layers},
          {"per_attribute_blocks", c.content.per_attribute_blocks}}},
        {"transformer",
         {{"layers", c.transformer.layers},
          {"heads", c.transformer.heads},
          {"ff_dim", c.transformer.ff_dim},
          {"dropout", c.transformer.dropout},
          {"max_len", c.transformer.max_len}}},
        {"train",
         {{"lr", c.train.lr},
          {"epochs", c.train.epochs},
          {"patience", c.train.patience},
          {"seed", c.train.seed},
          {"batch", c.train.batch},
          {"momentum", c.train.momentum},
          {"test_fraction", c.train.test_fraction},
          {"class_weight", c.train.class_weight}}},
        {"ablation",
         {{"no_decoder", c.ablation.no_decoder},
          {"no_positional", c.ablation.no_positional},
          {"literal_eq8", c.ablation.literal_eq8},
          {"target_only", c.ablation.target_only}}},
        {"synth",
         {{"news", c.synth.news},
          {"fake_fraction", c.synth.fake_fraction},
          {"posts_per_news", c.synth.posts_per_news},
          {"users_per_post", c.synth.users_per_post},
          {"users", c.synth.users},
          {"background_users", c.synth.background_users},
          {"community_strength", c.synth.community_strength},
          {"signal", c.synth.signal},
          {"neighbor_signal", c.synth.neighbor_signal},
          {"separation", c.synth.separation},
          {"repost_prob", c.synth.repost_prob},
          {"follows_per_user", c.synth.follows_per_user},
          {"follow_community", c.synth.follow_community},
          {"content_free", c.synth.content_free},
          {"seed", c.synth.seed},
          {"attributes", attrs}}},
    };
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument("config " + path + ": " + e.what());
    }
    return config_from_json(j);
}

ModelConfig model_config(const ExperimentConfig& cfg) {
    ModelConfig m;
    m.content = cfg.content;
    m.transformer = cfg.transformer;
    m.ablation = cfg.ablation;
    m.seed = cfg.train.seed;
    return m;
}

json metrics_to_json(const MetricsReport& m) {
    auto cls = [](const ClassMetrics& c) {
        return json{{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}};
    };
    return {{"accuracy", m.accuracy},
            {"fake", cls(m.fake)},
            {"real", cls(m.real)},
            {"confusion", m.confusion},
            {"total", m.total}};
}

json epoch_to_json(const EpochLog& e) {
    return {{"epoch", e.epoch},           {"train_loss", e.train_loss}, {"val_acc", e.val_acc},
            {"val_f1_fake", e.val_f1_fake}, {"val_f1_real", e.val_f1_real}, {"seconds", e.seconds}};
}

std::string git_blob_sha1(const std::vector<char>& content) {
    std::string header = "blob " + std::to_string(content.size());
    header.push_back('\0');
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                    EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, md, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw std::runtime_error("sha1 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

json provenance(const std::vector<std::string>& paths) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    for (const auto& p : paths) {
        if (p.empty()) continue;
        std::error_code ec;
        if (fs::is_directory(p, ec)) {
            for (const auto& entry : fs::directory_iterator(p)) {
                if (entry.is_regular_file()) files.push_back(entry.path().string());
            }
        } else if (fs::is_regular_file(p, ec)) {
            files.push_back(p);
        }
    }
    std::sort(files.begin(), files.end());
    files.erase(std::unique(files.begin(), files.end()), files.end());
    json out = json::object();
    for (const auto& f : files) {
        std::vector<char> bytes;
        if (binary::read_file(f, bytes)) out[f] = git_blob_sha1(bytes);
    }
    return out;
}

Dataset load_dataset(const ExperimentConfig& cfg) {
    if (cfg.graph_dir.empty()) throw std::invalid_argument("config: graph_dir is required");
    Dataset d;
    d.graph = load_graph_dir(cfg.graph_dir, cfg.schema);
    d.features = FeatureStore(load_embedding_dir(cfg.emb_dir.empty() ? cfg.graph_dir : cfg.emb_dir));
    return d;
}

Dataset make_dataset(SynthDataset data) {
    Dataset d;
    d.graph = std::move(data.graph);
    d.features = FeatureStore(std::move(data.tables));
    return d;
}

SampleMap obtain_samples(const ExperimentConfig& cfg, const HetGraph& g) {
    if (!cfg.cache.empty() && std::filesystem::exists(cfg.cache)) return load_rwr_cache(cfg.cache);
    auto samples = sample_all(g, cfg.walk, cfg.workers);
    if (!cfg.cache.empty()) write_rwr_cache(samples, cfg.cache);
    return samples;
}

SampleMap truncate_samples(const SampleMap& samples, std::uint32_t gamma) {
    SampleMap out;
    for (const auto& [root, s] : samples) {
        std::vector<RankedNeighbor> ranked(s.ranked.begin(),
                                           s.ranked.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(gamma, s.size())));
        out.emplace(root, make_sample(root, std::move(ranked)));
    }
    return out;
}

ExperimentResult run_training(const ExperimentConfig& cfg, const Dataset& data, const SampleMap& samples,
                              const std::function<void(const EpochLog&)>& on_epoch) {
    return with_precision(cfg.precision, [&](auto tag) {
        using Real = decltype(tag);
        HetFormerModel<Real> model(model_config(cfg), data.graph, samples, data.features);
        ExperimentResult r;
        r.split = split_news(data.graph, cfg.train.test_fraction, cfg.train.seed);
        r.parameters = model.params().scalar_count();
        r.run = train(model, data.graph, r.split, cfg.train, on_epoch);
        return r;
    });
}

MetricsReport run_evaluation(const ExperimentConfig& cfg, const Dataset& data, const SampleMap& samples,
                             const Checkpoint& ckpt, const std::vector<NodeId>& news) {
    return with_precision(cfg.precision, [&](auto tag) {
        using Real = decltype(tag);
        HetFormerModel<Real> model(model_config(cfg), data.graph, samples, data.features);
        restore(model.params(), ckpt);
        return evaluate(model, data.graph, news, cfg.train.batch);
    });
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig& cfg, const Dataset& data,
                                  const std::vector<std::uint32_t>& gammas) {
    if (gammas.empty()) return {};
    WalkConfig walk = cfg.walk;
    walk.top_gamma = *std::max_element(gammas.begin(), gammas.end());
    const auto full = sample_all(data.graph, walk, cfg.workers);
    std::vector<SweepPoint> out;
    for (auto gamma : gammas) {
        ExperimentConfig c = cfg;
        c.walk.top_gamma = gamma;
        c.transformer.max_len = std::max(c.transformer.max_len, gamma + 1);
        const auto r = run_training(c, data, truncate_samples(full, gamma));
        out.push_back({gamma, r.run.val.accuracy, r.run.test.accuracy});
    }
    return out;
}

tensor::GradCheckResult run_model_gradcheck(std::uint64_t seed) {
    SynthConfig s;
    s.news = 5;
    s.posts_per_news = 1.5;
    s.users = 4;
    s.follows_per_user = 1;
    s.seed = seed;
    s.attributes = {{NodeType::News, "text", 6}, {NodeType::Post, "text", 5}, {NodeType::User, "profile", 4}};
    const auto data = make_dataset(generate(s));

    WalkConfig walk;
    walk.top_gamma = 4;
    walk.iterations = 2000;
    walk.seed = seed;
    const auto samples = sample_all(data.graph, walk, 1);

    ModelConfig mc;
    mc.content.dim = 8;
    mc.content.heads = 2;
    mc.transformer.layers = 1;
    mc.transformer.heads = 2;
    mc.transformer.max_len = 8;
    mc.seed = seed;
    HetFormerModel<double> model(mc, data.graph, samples, data.features);

    const auto& news = data.graph.news_ids();
    std::vector<double> targets;
    for (NodeId id : news) targets.push_back(static_cast<double>(*data.graph.label_of(id)));
    auto f = [&]() {
        std::mt19937_64 rng(0);
        return tensor::bce_loss(model.predict(news, false, rng), std::span<const double>(targets));
    };
    return tensor::grad_check<double>(f, model.params().tensors());
}

}  // namespace hetformer
