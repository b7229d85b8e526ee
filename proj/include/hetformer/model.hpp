#pragma once

#include <random>
#include <span>

#include "hetformer/content.hpp"
#include "hetformer/parameters.hpp"
#include "hetformer/rwr.hpp"
#include "hetformer/transformer.hpp"

namespace hetformer {

struct AblationFlags {
    bool no_decoder = false;
    bool no_positional = false;
    bool literal_eq8 = false;  // sigmoid(relu(Rep * W_out + b_out)) with no hidden layer
    bool target_only = false;  // ignore all neighbors (l = 0): content-only baseline
};

struct ModelConfig {
    ContentConfig content;
    TransformerConfig transformer;
    AblationFlags ablation;
    std::uint64_t seed = 42;
};

template <typename Real>
class PredictionHead {
public:
    PredictionHead(std::uint32_t dim, bool literal, ParameterStore<Real>& params);

    // [B x d] -> probabilities [B x 1].
    tensor::Tensor<Real> predict(const tensor::Tensor<Real>& rep) const;
    bool literal() const { return literal_; }

private:
    bool literal_;
    tensor::Tensor<Real> w_hidden_, b_hidden_, w_out_, b_out_;
};

// Encoder and decoder token sequences for one target news node.
template <typename Real>
struct EncodedSample {
    tensor::Tensor<Real> enc;
    tensor::Tensor<Real> dec;
};

// The whole pipeline: content aggregation, sequence construction,
// encoder-decoder aggregation and the prediction head.
template <typename Real>
class HetFormerModel {
public:
    HetFormerModel(const ModelConfig& cfg, const HetGraph& graph, const SampleMap& samples,
                   const FeatureStore& features);

    HetFormerModel(const HetFormerModel&) = delete;
    HetFormerModel& operator=(const HetFormerModel&) = delete;

    const ModelConfig& config() const { return cfg_; }
    ParameterStore<Real>& params() { return params_; }
    const ParameterStore<Real>& params() const { return params_; }
    const ContentAggregator<Real>& content() const { return content_; }
    const HetTransformer<Real>& transformer() const { return transformer_; }
    const PredictionHead<Real>& head() const { return head_; }

    // The sample actually used for `news` (empty under target_only).
    const NeighborSample& sample_for(NodeId news) const;
    EncodedSample<Real> encode_sample(NodeId news) const;

    tensor::Tensor<Real> represent(std::span<const NodeId> news, bool train, std::mt19937_64& rng) const;
    tensor::Tensor<Real> predict(std::span<const NodeId> news, bool train, std::mt19937_64& rng) const;

private:
    ModelConfig cfg_;
    const HetGraph* graph_;
    const SampleMap* samples_;
    ParameterStore<Real> params_;
    ContentAggregator<Real> content_;
    HetTransformer<Real> transformer_;
    PredictionHead<Real> head_;
    NeighborSample empty_;
};

}  // namespace hetformer
