#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hetformer/graph.hpp"
#include "hetformer/model.hpp"
#include "hetformer/parameters.hpp"

namespace hetformer {

struct TrainConfig {
    double lr = 1e-3;
    std::uint32_t epochs = 40;
    std::uint32_t patience = 5;
    std::uint64_t seed = 42;
    std::uint32_t batch = 16;
    double momentum = 0.0;
    double test_fraction = 0.1;
    bool class_weight = false;

    void validate() const;  // throws TrainError(InvalidConfig)
};

struct Split {
    std::vector<NodeId> train;
    std::vector<NodeId> val;
    std::vector<NodeId> test;
};

// Holds out round(test_fraction * N) for test, then splits the rest 4:1
// into train and val. Each split is stratified by label and sorted by id.
Split split_news(const std::vector<std::pair<NodeId, NewsLabel>>& labeled, double test_fraction, std::uint64_t seed);
Split split_news(const HetGraph& g, double test_fraction, std::uint64_t seed);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct MetricsReport {
    double accuracy = 0.0;
    ClassMetrics fake;
    ClassMetrics real;
    // confusion[truth][prediction], indexed by NewsLabel.
    std::array<std::array<std::size_t, 2>, 2> confusion{};
    std::size_t total = 0;
};

// 2PR / (P + R), or 0 when P + R == 0.
double f1_score(double precision, double recall);
MetricsReport compute_metrics(std::span<const NewsLabel> truth, std::span<const NewsLabel> predicted);
// Probability of the real class; >= 0.5 decides real.
NewsLabel decide(double prob_real);

struct EpochLog {
    std::uint32_t epoch = 0;
    double train_loss = 0.0;
    double val_acc = 0.0;
    double val_f1_fake = 0.0;
    double val_f1_real = 0.0;
    double seconds = 0.0;
};

struct TrainRun {
    std::vector<EpochLog> log;
    std::uint32_t best_epoch = 0;
    double best_val_acc = 0.0;
    Checkpoint best;
    MetricsReport val;
    MetricsReport test;
};

template <typename Real>
std::vector<double> predict_probs(const HetFormerModel<Real>& model, std::span<const NodeId> news, std::size_t batch);

// Throws TrainError(MissingLabel) for unlabeled news.
template <typename Real>
MetricsReport evaluate(const HetFormerModel<Real>& model, const HetGraph& g, std::span<const NodeId> news,
                       std::size_t batch);

// Mini-batch SGD on mean binary cross-entropy with early stopping on
// validation accuracy. The model ends up holding the best-validation
// parameters, and `test` is measured with them.
template <typename Real>
TrainRun train(HetFormerModel<Real>& model, const HetGraph& g, const Split& split, const TrainConfig& cfg,
               const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace hetformer
