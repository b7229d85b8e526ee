#include "hetformer/model.hpp"

namespace hetformer {

using tensor::Tensor;

namespace {

TransformerConfig with_ablation(TransformerConfig t, const AblationFlags& a) {
    t.no_decoder = t.no_decoder || a.no_decoder;
    t.no_positional = t.no_positional || a.no_positional;
    return t;
}

}  // namespace

template <typename Real>
PredictionHead<Real>::PredictionHead(std::uint32_t dim, bool literal, ParameterStore<Real>& params) : literal_(literal) {
    if (!literal_) {
        w_hidden_ = params.create("head.hidden.w", dim, dim, Init::Xavier);
        b_hidden_ = params.create_vector("head.hidden.b", dim, Init::Zeros);
    }
    w_out_ = params.create("head.out.w", dim, 1, Init::Xavier);
    b_out_ = params.create_vector("head.out.b", 1, Init::Zeros);
}

template <typename Real>
Tensor<Real> PredictionHead<Real>::predict(const Tensor<Real>& rep) const {
    if (literal_) return tensor::sigmoid(tensor::relu(tensor::add_row(tensor::matmul(rep, w_out_), b_out_)));
    const auto hidden = tensor::relu(tensor::add_row(tensor::matmul(rep, w_hidden_), b_hidden_));
    return tensor::sigmoid(tensor::add_row(tensor::matmul(hidden, w_out_), b_out_));
}

template <typename Real>
HetFormerModel<Real>::HetFormerModel(const ModelConfig& cfg, const HetGraph& graph, const SampleMap& samples,
                                     const FeatureStore& features)
    : cfg_(cfg),
      graph_(&graph),
      samples_(&samples),
      params_(cfg.seed),
      content_(cfg.content, features, params_),
      transformer_(with_ablation(cfg.transformer, cfg.ablation), cfg.content.dim, params_),
      head_(cfg.content.dim, cfg.ablation.literal_eq8, params_) {
    cfg_.transformer = transformer_.config();
}

template <typename Real>
const NeighborSample& HetFormerModel<Real>::sample_for(NodeId news) const {
    if (cfg_.ablation.target_only) return empty_;
    auto it = samples_->find(news);
    if (it == samples_->end()) {
        throw ModelError(ModelErrc::InvalidConfig, "no neighbor sample for news " + std::to_string(news), news);
    }
    return it->second;
}

template <typename Real>
EncodedSample<Real> HetFormerModel<Real>::encode_sample(NodeId news) const {
    const auto target = content_.encode_target(*graph_, news);
    const auto& sample = sample_for(news);
    const std::size_t d = cfg_.content.dim;

    std::array<Tensor<Real>, kNodeTypeCount> per_type;
    std::array<std::size_t, kNodeTypeCount> offset{};
    std::vector<Tensor<Real>> parts;
    std::size_t rows = 0;
    for (std::size_t t = 0; t < kNodeTypeCount; ++t) {
        std::vector<NodeId> ids;
        for (const auto& n : sample.partitions[t]) ids.push_back(n.id);
        per_type[t] = content_.encode(static_cast<NodeType>(t), ids);
        offset[t] = rows;
        rows += ids.size();
        if (!ids.empty()) parts.push_back(per_type[t]);
    }

    Tensor<Real> neighbors = Tensor<Real>::zeros(0, d);
    if (rows > 0) {
        // Partitions preserve rank order, so the k-th neighbor of type t is
        // row offset[t] + (k-th occurrence of t) of the stacked partitions.
        std::array<std::size_t, kNodeTypeCount> seen{};
        std::vector<std::size_t> order;
        for (const auto& n : sample.ranked) {
            const auto t = static_cast<std::size_t>(n.type);
            order.push_back(offset[t] + seen[t]++);
        }
        neighbors = tensor::gather_rows(tensor::concat_rows(parts), std::span<const std::size_t>(order));
    }

    EncodedSample<Real> out;
    out.enc = transformer_.build_enc_input(target, neighbors, sample);
    if (!transformer_.config().no_decoder) {
        out.dec = transformer_.build_dec_input(target, per_type[static_cast<std::size_t>(NodeType::News)]);
    }
    return out;
}

template <typename Real>
Tensor<Real> HetFormerModel<Real>::represent(std::span<const NodeId> news, bool train, std::mt19937_64& rng) const {
    std::vector<Tensor<Real>> enc, dec;
    for (NodeId id : news) {
        auto s = encode_sample(id);
        enc.push_back(std::move(s.enc));
        if (s.dec.defined()) dec.push_back(std::move(s.dec));
    }
    return transformer_.forward(transformer_.make_batch(enc, dec), train, rng);
}

template <typename Real>
Tensor<Real> HetFormerModel<Real>::predict(std::span<const NodeId> news, bool train, std::mt19937_64& rng) const {
    return head_.predict(represent(news, train, rng));
}

template class PredictionHead<float>;
template class PredictionHead<double>;
template struct EncodedSample<float>;
template struct EncodedSample<double>;
template class HetFormerModel<float>;
template class HetFormerModel<double>;

}  // namespace hetformer
