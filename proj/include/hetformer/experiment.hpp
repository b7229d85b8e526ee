#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetformer/content.hpp"
#include "hetformer/model.hpp"
#include "hetformer/rwr.hpp"
#include "hetformer/synth.hpp"
#include "hetformer/trainer.hpp"

namespace hetformer {

enum class Precision { Float32, Float64 };

struct ExperimentConfig {
    std::string graph_dir;
    std::string emb_dir;  // defaults to graph_dir
    std::string cache;
    std::string checkpoint;
    std::string report;
    std::string run_log;
    GraphSchema schema = GraphSchema::FakeNewsNet;
    WalkConfig walk;
    std::uint32_t workers = 1;
    ContentConfig content;
    TransformerConfig transformer;
    TrainConfig train;
    AblationFlags ablation;
    Precision precision = Precision::Float32;
    SynthConfig synth;
    std::vector<std::uint32_t> gammas = {2, 4, 8, 16, 32, 64};
};

// Keys absent from `j` keep the values of `base`; unknown keys throw
// std::invalid_argument so typos never pass silently.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

ModelConfig model_config(const ExperimentConfig& cfg);

nlohmann::json metrics_to_json(const MetricsReport& m);
nlohmann::json epoch_to_json(const EpochLog& e);

// SHA-1 of "blob <size>\0<content>", as git computes object ids.
std::string git_blob_sha1(const std::vector<char>& content);
// Maps each input path to its blob hash; directories are expanded to
// their regular files.
nlohmann::json provenance(const std::vector<std::string>& paths);

struct Dataset {
    HetGraph graph;
    FeatureStore features;
};

Dataset load_dataset(const ExperimentConfig& cfg);
Dataset make_dataset(SynthDataset data);

// Uses cfg.cache when that file exists; otherwise samples and, if a cache
// path is set, writes it.
SampleMap obtain_samples(const ExperimentConfig& cfg, const HetGraph& g);

// Keeps the first `gamma` ranked neighbors of every sample. Equal to
// resampling with top_gamma = gamma under the same seed and walk length.
SampleMap truncate_samples(const SampleMap& samples, std::uint32_t gamma);

struct ExperimentResult {
    TrainRun run;
    Split split;
    std::size_t parameters = 0;
};

ExperimentResult run_training(const ExperimentConfig& cfg, const Dataset& data, const SampleMap& samples,
                              const std::function<void(const EpochLog&)>& on_epoch = {});
MetricsReport run_evaluation(const ExperimentConfig& cfg, const Dataset& data, const SampleMap& samples,
                             const Checkpoint& ckpt, const std::vector<NodeId>& news);

struct SweepPoint {
    std::uint32_t gamma = 0;
    double val_acc = 0.0;
    double test_acc = 0.0;
};

// Samples once at the largest gamma and truncates for the others.
std::vector<SweepPoint> run_sweep(const ExperimentConfig& cfg, const Dataset& data,
                                  const std::vector<std::uint32_t>& gammas);

// Finite-difference check of the full model in 64-bit on a tiny synthetic
// instance (5 news, d = 8, gamma = 4, one layer, two heads).
tensor::GradCheckResult run_model_gradcheck(std::uint64_t seed);

}  // namespace hetformer
