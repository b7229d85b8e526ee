#include "hetformer/content.hpp"

#include <algorithm>
#include <cmath>

namespace hetformer {

using tensor::Tensor;

void ContentConfig::validate() const {
    if (dim == 0 || heads == 0 || dim % heads != 0) {
        throw ModelError(ModelErrc::InvalidConfig, "content: dim must be a positive multiple of heads");
    }
    if (layers == 0) throw ModelError(ModelErrc::InvalidConfig, "content: at least one attention layer");
}

FeatureStore::FeatureStore(std::vector<EmbeddingTable> tables) {
    for (auto& t : tables) by_type_[static_cast<std::size_t>(t.key().node_type)].push_back(std::move(t));
    for (auto& group : by_type_) {
        std::sort(group.begin(), group.end(),
                  [](const EmbeddingTable& a, const EmbeddingTable& b) { return a.key().name < b.key().name; });
        for (std::size_t i = 1; i < group.size(); ++i) {
            if (group[i].key().name == group[i - 1].key().name) {
                throw ModelError(ModelErrc::InvalidConfig, "duplicate attribute " + group[i].key().stem());
            }
        }
    }
}

std::vector<AttributeKey> FeatureStore::keys() const {
    std::vector<AttributeKey> out;
    for (const auto& group : by_type_)
        for (const auto& t : group) out.push_back(t.key());
    return out;
}

template <typename Real>
StackedAttribute<Real> stack_attribute(std::span<const NodeId> ids, const EmbeddingTable& table, std::uint32_t dim) {
    if (table.dim() != dim) {
        throw ModelError(ModelErrc::DimMismatch, "attribute " + table.key().stem() + " has dim " +
                                                     std::to_string(table.dim()) + ", expected " + std::to_string(dim));
    }
    std::vector<Real> values(ids.size() * dim, Real(0));
    std::vector<char> present(ids.size(), 0);
    for (std::size_t j = 0; j < ids.size(); ++j) {
        auto row = table.lookup(ids[j]);
        if (!row) continue;
        present[j] = 1;
        std::copy(row->begin(), row->end(), values.begin() + static_cast<std::ptrdiff_t>(j * dim));
    }
    return {Tensor<Real>::from(ids.size(), dim, std::move(values)), std::move(present)};
}

template <typename Real>
Tensor<Real> fuse(const std::vector<Tensor<Real>>& per_attribute) {
    return tensor::mean_of(per_attribute);
}

template <typename Real>
ContentAggregator<Real>::ContentAggregator(const ContentConfig& cfg, const FeatureStore& features,
                                           ParameterStore<Real>& params)
    : cfg_(cfg), features_(&features) {
    cfg_.validate();
    const std::size_t d = cfg_.dim;
    const std::size_t dk = d / cfg_.heads;
    for (std::size_t ti = 0; ti < kNodeTypeCount; ++ti) {
        const auto type = static_cast<NodeType>(ti);
        const auto& attrs = features.attributes(type);
        if (attrs.empty()) continue;
        const std::string tname(to_string(type));
        for (const auto& table : attrs) {
            proj_[ti].push_back(
                params.create("proj." + tname + "." + table.key().name, d, table.dim(), Init::Xavier));
        }
        const std::size_t n_blocks = cfg_.per_attribute_blocks ? attrs.size() : 1;
        for (std::size_t b = 0; b < n_blocks; ++b) {
            std::string prefix = "attn." + tname + ".";
            if (cfg_.per_attribute_blocks) prefix += attrs[b].key().name + ".";
            std::vector<Layer> layers;
            for (std::uint32_t j = 0; j < cfg_.layers; ++j) {
                const std::string lp = prefix + "layer" + std::to_string(j) + ".";
                Layer layer;
                for (std::uint32_t h = 0; h < cfg_.heads; ++h) {
                    const std::string hp = lp + "head" + std::to_string(h) + ".";
                    layer.heads.push_back({params.create(hp + "q", d, dk, Init::Xavier),
                                           params.create(hp + "k", d, dk, Init::Xavier),
                                           params.create(hp + "v", d, dk, Init::Xavier)});
                }
                layer.o = params.create(lp + "o", d, d, Init::Xavier);
                layers.push_back(std::move(layer));
            }
            blocks_[ti].push_back(std::move(layers));
        }
    }
}

template <typename Real>
const std::vector<typename ContentAggregator<Real>::Layer>& ContentAggregator<Real>::block(NodeType type,
                                                                                           std::size_t attr) const {
    const auto& blocks = blocks_[static_cast<std::size_t>(type)];
    if (blocks.empty()) {
        throw ModelError(ModelErrc::InvalidConfig, "no attributes for node type " + std::string(to_string(type)));
    }
    return blocks[cfg_.per_attribute_blocks ? attr : 0];
}

template <typename Real>
Tensor<Real> ContentAggregator<Real>::project(const Tensor<Real>& q, NodeType type, std::size_t attr) const {
    const auto& proj = proj_[static_cast<std::size_t>(type)];
    if (attr >= proj.size()) throw ModelError(ModelErrc::InvalidConfig, "attribute index out of range");
    if (q.cols() != proj[attr].cols()) {
        throw ModelError(ModelErrc::DimMismatch, "project: input has " + std::to_string(q.cols()) + " columns, expected " +
                                                     std::to_string(proj[attr].cols()));
    }
    return tensor::matmul_nt(q, proj[attr]);
}

template <typename Real>
Tensor<Real> ContentAggregator<Real>::attend(const Tensor<Real>& x, NodeType type, std::size_t attr,
                                             AttentionTrace<Real>* trace) const {
    if (x.rows() == 0) return x;
    const Real inv_sqrt_dk = Real(1) / std::sqrt(static_cast<Real>(cfg_.dim / cfg_.heads));
    Tensor<Real> h = x;
    for (const auto& layer : block(type, attr)) {
        std::vector<Tensor<Real>> heads;
        heads.reserve(layer.heads.size());
        for (const auto& head : layer.heads) {
            auto q = tensor::matmul(h, head.q);
            auto k = tensor::matmul(h, head.k);
            auto v = tensor::matmul(h, head.v);
            auto weights = tensor::softmax_rows(tensor::scale(tensor::matmul_nt(q, k), inv_sqrt_dk));
            if (trace) trace->weights.push_back(weights);
            heads.push_back(tensor::matmul(weights, v));
        }
        h = tensor::matmul(tensor::concat_cols(heads), layer.o);
    }
    return h;
}

template <typename Real>
Tensor<Real> ContentAggregator<Real>::encode(NodeType type, std::span<const NodeId> ids,
                                             AttentionTrace<Real>* trace) const {
    if (ids.empty()) return Tensor<Real>::zeros(0, cfg_.dim);
    const auto& attrs = features_->attributes(type);
    if (attrs.empty()) {
        throw ModelError(ModelErrc::InvalidConfig, "no attributes for node type " + std::string(to_string(type)));
    }
    std::vector<Tensor<Real>> outs;
    outs.reserve(attrs.size());
    for (std::size_t a = 0; a < attrs.size(); ++a) {
        auto stacked = stack_attribute<Real>(ids, attrs[a], attrs[a].dim());
        outs.push_back(attend(project(stacked.q, type, a), type, a, trace));
    }
    return fuse(outs);
}

template <typename Real>
Tensor<Real> ContentAggregator<Real>::encode_target(const HetGraph& g, NodeId news, AttentionTrace<Real>* trace) const {
    if (g.type_of(news) != NodeType::News) {
        throw ModelError(ModelErrc::NotANewsNode, "node " + std::to_string(news) + " is not a news node", news);
    }
    const NodeId ids[1] = {news};
    return encode(NodeType::News, ids, trace);
}

template struct StackedAttribute<float>;
template struct StackedAttribute<double>;
template StackedAttribute<float> stack_attribute(std::span<const NodeId>, const EmbeddingTable&, std::uint32_t);
template StackedAttribute<double> stack_attribute(std::span<const NodeId>, const EmbeddingTable&, std::uint32_t);
template Tensor<float> fuse(const std::vector<Tensor<float>>&);
template Tensor<double> fuse(const std::vector<Tensor<double>>&);
template class ContentAggregator<float>;
template class ContentAggregator<double>;

}  // namespace hetformer
