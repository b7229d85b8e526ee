// hetformer: command-line front end for sampling, training and evaluation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hetformer/experiment.hpp"

namespace {

using hetformer::ExperimentConfig;
using nlohmann::json;

struct Overrides {
    std::string config;
    std::string graph, emb, cache, checkpoint, report, log, out, precision;
    double lr = 0, p = 0;
    std::uint32_t epochs = 0, patience = 0, batch = 0, gamma = 0, workers = 0, iterations = 0;
    std::uint64_t seed = 0;
    bool ablate_decoder = false, ablate_positional = false, literal_eq8 = false, target_only = false;
    std::vector<std::uint32_t> gammas;
    std::map<std::string, CLI::Option*> given;  // keyed "<subcommand>:<flag>"
    std::string active;
};

void track(Overrides& o, CLI::App* cmd, const std::string& flag, CLI::Option* opt) {
    o.given[cmd->get_name() + ":" + flag] = opt;
}

bool given(const Overrides& o, const std::string& name) {
    auto it = o.given.find(o.active + ":" + name);
    return it != o.given.end() && it->second->count() > 0;
}

ExperimentConfig resolve(const Overrides& o) {
    ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : hetformer::load_config(o.config);
    if (const char* env = std::getenv("HETFORMER_SEED")) {
        const auto seed = std::stoull(env);
        cfg.walk.seed = cfg.train.seed = cfg.synth.seed = seed;
    }
    if (given(o, "--graph")) cfg.graph_dir = o.graph;
    if (given(o, "--emb")) cfg.emb_dir = o.emb;
    if (given(o, "--cache")) cfg.cache = o.cache;
    if (given(o, "--checkpoint")) cfg.checkpoint = o.checkpoint;
    if (given(o, "--report")) cfg.report = o.report;
    if (given(o, "--log")) cfg.run_log = o.log;
    if (given(o, "--precision")) cfg = hetformer::config_from_json(json{{"precision", o.precision}}, cfg);
    if (given(o, "--lr")) cfg.train.lr = o.lr;
    if (given(o, "--epochs")) cfg.train.epochs = o.epochs;
    if (given(o, "--patience")) cfg.train.patience = o.patience;
    if (given(o, "--batch")) cfg.train.batch = o.batch;
    if (given(o, "--seed")) cfg.walk.seed = cfg.train.seed = cfg.synth.seed = o.seed;
    if (given(o, "--p")) cfg.walk.restart_p = o.p;
    if (given(o, "--T")) cfg.walk.iterations = o.iterations;
    if (given(o, "--gamma")) cfg.walk.top_gamma = o.gamma;
    if (given(o, "--workers")) cfg.workers = o.workers;
    if (given(o, "--gammas")) cfg.gammas = o.gammas;
    cfg.ablation.no_decoder = cfg.ablation.no_decoder || o.ablate_decoder;
    cfg.ablation.no_positional = cfg.ablation.no_positional || o.ablate_positional;
    cfg.ablation.literal_eq8 = cfg.ablation.literal_eq8 || o.literal_eq8;
    cfg.ablation.target_only = cfg.ablation.target_only || o.target_only;
    return cfg;
}

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    track(o, cmd, "--graph", cmd->add_option("--graph", o.graph, "directory with nodes.tsv and edges.tsv"));
    track(o, cmd, "--emb", cmd->add_option("--emb", o.emb, "directory with .hetemb files (defaults to --graph)"));
    track(o, cmd, "--cache", cmd->add_option("--cache", o.cache, "RWR cache file"));
    track(o, cmd, "--seed", cmd->add_option("--seed", o.seed, "global seed"));
    track(o, cmd, "--workers", cmd->add_option("--workers", o.workers, "sampling threads"));
    track(o, cmd, "--p", cmd->add_option("--p", o.p, "restart probability"));
    track(o, cmd, "--T", cmd->add_option("--T", o.iterations, "walk length per news node"));
    track(o, cmd, "--gamma", cmd->add_option("--gamma", o.gamma, "neighbors kept per news node"));
}

void add_training(CLI::App* cmd, Overrides& o) {
    track(o, cmd, "--checkpoint", cmd->add_option("--checkpoint", o.checkpoint, "checkpoint file"));
    track(o, cmd, "--report", cmd->add_option("--report", o.report, "report JSON file"));
    track(o, cmd, "--log", cmd->add_option("--log", o.log, "per-epoch JSON lines log"));
    track(o, cmd, "--precision", cmd->add_option("--precision", o.precision, "float32 or float64"));
    track(o, cmd, "--lr", cmd->add_option("--lr", o.lr, "learning rate"));
    track(o, cmd, "--epochs", cmd->add_option("--epochs", o.epochs, "maximum epochs"));
    track(o, cmd, "--patience", cmd->add_option("--patience", o.patience, "early-stopping patience"));
    track(o, cmd, "--batch", cmd->add_option("--batch", o.batch, "batch size"));
    cmd->add_flag("--ablate-decoder", o.ablate_decoder, "encoder only");
    cmd->add_flag("--ablate-positional", o.ablate_positional, "no positional embeddings");
    cmd->add_flag("--literal-eq8", o.literal_eq8, "sigmoid(relu(.)) head without hidden layer");
    cmd->add_flag("--target-only", o.target_only, "ignore neighbors");
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) return;
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::vector<std::string> inputs(const ExperimentConfig& cfg) {
    return {cfg.graph_dir, cfg.emb_dir, cfg.cache};
}

int cmd_synth(const ExperimentConfig& cfg, const std::string& out_dir, bool content_free) {
    auto synth = cfg.synth;
    synth.content_free = synth.content_free || content_free;
    const auto data = hetformer::generate(synth);
    hetformer::write_dataset(data, out_dir);
    const auto st = hetformer::stats(data.graph);
    json report{{"config", hetformer::config_to_json(cfg)},
                {"out", out_dir},
                {"nodes", st.total_nodes()},
                {"edges", st.total_edges()},
                {"fake", st.fake_news},
                {"real", st.real_news},
                {"outputs", hetformer::provenance({out_dir})}};
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_sample(ExperimentConfig cfg, const std::string& out) {
    if (!out.empty()) cfg.cache = out;
    if (cfg.cache.empty()) throw std::invalid_argument("sample: --out or cache is required");
    const auto g = hetformer::load_graph_dir(cfg.graph_dir, cfg.schema);
    const auto samples = hetformer::sample_all(g, cfg.walk, cfg.workers);
    hetformer::write_rwr_cache(samples, cfg.cache);
    json report{{"config", hetformer::config_to_json(cfg)},
                {"inputs", hetformer::provenance({cfg.graph_dir})},
                {"news", samples.size()},
                {"cache", hetformer::provenance({cfg.cache})}};
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
    const auto data = hetformer::load_dataset(cfg);
    const auto samples = hetformer::obtain_samples(cfg, data.graph);
    std::ostringstream log;
    const auto result = hetformer::run_training(cfg, data, samples, [&](const hetformer::EpochLog& e) {
        const auto line = hetformer::epoch_to_json(e).dump();
        log << line << "\n";
        std::cerr << line << "\n";
    });
    write_text(cfg.run_log, log.str());
    if (!cfg.checkpoint.empty()) hetformer::write_checkpoint(result.run.best, cfg.checkpoint);
    json report{{"config", hetformer::config_to_json(cfg)},
                {"provenance", hetformer::provenance(inputs(cfg))},
                {"parameters", result.parameters},
                {"epochs_run", result.run.log.size()},
                {"best_epoch", result.run.best_epoch},
                {"split", {{"train", result.split.train.size()},
                           {"val", result.split.val.size()},
                           {"test", result.split.test.size()}}},
                {"val", hetformer::metrics_to_json(result.run.val)},
                {"test", hetformer::metrics_to_json(result.run.test)}};
    write_text(cfg.report, report.dump(2) + "\n");
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& which) {
    if (cfg.checkpoint.empty()) throw std::invalid_argument("eval: checkpoint is required");
    const auto data = hetformer::load_dataset(cfg);
    const auto samples = hetformer::obtain_samples(cfg, data.graph);
    const auto ckpt = hetformer::load_checkpoint(cfg.checkpoint);
    const auto split = hetformer::split_news(data.graph, cfg.train.test_fraction, cfg.train.seed);
    const auto& ids = which == "val" ? split.val : which == "train" ? split.train : split.test;
    const auto m = hetformer::run_evaluation(cfg, data, samples, ckpt, ids);
    json report{{"config", hetformer::config_to_json(cfg)},
                {"provenance", hetformer::provenance({cfg.graph_dir, cfg.emb_dir, cfg.cache, cfg.checkpoint})},
                {"split", which},
                {which, hetformer::metrics_to_json(m)}};
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_sweep(const ExperimentConfig& cfg) {
    const auto data = hetformer::load_dataset(cfg);
    const auto points = hetformer::run_sweep(cfg, data, cfg.gammas);
    json rows = json::array();
    for (const auto& p : points) rows.push_back({{"gamma", p.gamma}, {"val_acc", p.val_acc}, {"test_acc", p.test_acc}});
    json report{{"config", hetformer::config_to_json(cfg)},
                {"provenance", hetformer::provenance({cfg.graph_dir, cfg.emb_dir})},
                {"points", rows}};
    write_text(cfg.report, report.dump(2) + "\n");
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_gradcheck(const ExperimentConfig& cfg) {
    const auto r = hetformer::run_model_gradcheck(cfg.train.seed);
    const bool ok = r.max_rel_error < 1e-4;
    json report{{"max_rel_error", r.max_rel_error},
                {"max_abs_error", r.max_abs_error},
                {"checked", r.checked},
                {"tolerance", 1e-4},
                {"pass", ok}};
    std::cout << report.dump(2) << "\n";
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hetformer: heterogeneous-graph transformer for fake news detection"};
    app.require_subcommand(1);
    Overrides o;
    std::string split = "test";
    bool content_free = false;

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth, o);
    synth->add_option("--out", o.out, "output directory")->required();
    synth->add_flag("--content-free", content_free, "news content carries no label signal");

    auto* sample = app.add_subcommand("sample", "run RWR sampling and write the cache");
    add_common(sample, o);
    sample->add_option("--out", o.out, "cache file");

    auto* train = app.add_subcommand("train", "train and report test metrics");
    add_common(train, o);
    add_training(train, o);

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval, o);
    add_training(eval, o);
    eval->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));

    auto* sweep = app.add_subcommand("sweep", "train once per gamma");
    add_common(sweep, o);
    add_training(sweep, o);
    track(o, sweep, "--gammas", sweep->add_option("--gammas", o.gammas, "comma-separated gamma list")->delimiter(','));

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the full model");
    add_common(gradcheck, o);

    CLI11_PARSE(app, argc, argv);

    try {
        for (auto* sub : app.get_subcommands()) o.active = sub->get_name();
        const auto cfg = resolve(o);
        if (*synth) return cmd_synth(cfg, o.out, content_free);
        if (*sample) return cmd_sample(cfg, o.out);
        if (*train) return cmd_train(cfg);
        if (*eval) return cmd_eval(cfg, split);
        if (*sweep) return cmd_sweep(cfg);
        if (*gradcheck) return cmd_gradcheck(cfg);
    } catch (const hetformer::GraphError& e) {
        std::cerr << "hetformer: graph error: " << e.what() << "\n";
    } catch (const hetformer::EmbeddingError& e) {
        std::cerr << "hetformer: embedding error: " << e.what() << "\n";
    } catch (const hetformer::SamplerError& e) {
        std::cerr << "hetformer: sampler error: " << e.what() << "\n";
    } catch (const hetformer::TensorError& e) {
        std::cerr << "hetformer: tensor error: " << e.what() << "\n";
    } catch (const hetformer::ModelError& e) {
        std::cerr << "hetformer: model error: " << e.what() << "\n";
    } catch (const hetformer::TrainError& e) {
        std::cerr << "hetformer: training error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "hetformer: " << e.what() << "\n";
    }
    return 2;
}
