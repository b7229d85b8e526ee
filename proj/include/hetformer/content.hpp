#pragma once

#include <array>
#include <string>
#include <vector>

#include "hetformer/embeddings.hpp"
#include "hetformer/graph.hpp"
#include "hetformer/parameters.hpp"
#include "hetformer/tensor.hpp"

namespace hetformer {

struct ContentConfig {
    std::uint32_t dim = 32;   // unified dimension d
    std::uint32_t heads = 2;  // must divide dim
    std::uint32_t layers = 1;
    bool per_attribute_blocks = false;

    void validate() const;  // throws ModelError(InvalidConfig)
};

// Embedding tables grouped by node type, each group ordered by attribute name.
class FeatureStore {
public:
    FeatureStore() = default;
    explicit FeatureStore(std::vector<EmbeddingTable> tables);

    const std::vector<EmbeddingTable>& attributes(NodeType t) const { return by_type_[static_cast<std::size_t>(t)]; }
    std::vector<AttributeKey> keys() const;

private:
    std::array<std::vector<EmbeddingTable>, kNodeTypeCount> by_type_;
};

// One stacked attribute: row j holds the embedding of ids[j], or zeros when
// the node has no value for this attribute (present[j] == 0).
template <typename Real>
struct StackedAttribute {
    tensor::Tensor<Real> q;
    std::vector<char> present;
};

template <typename Real>
StackedAttribute<Real> stack_attribute(std::span<const NodeId> ids, const EmbeddingTable& table, std::uint32_t dim);

// Softmax weights recorded per (attribute, layer, head) during attend.
template <typename Real>
struct AttentionTrace {
    std::vector<tensor::Tensor<Real>> weights;
};

template <typename Real>
tensor::Tensor<Real> fuse(const std::vector<tensor::Tensor<Real>>& per_attribute);

template <typename Real>
class ContentAggregator {
public:
    ContentAggregator(const ContentConfig& cfg, const FeatureStore& features, ParameterStore<Real>& params);

    const ContentConfig& config() const { return cfg_; }

    // Q' = Q * M^T.
    tensor::Tensor<Real> project(const tensor::Tensor<Real>& q, NodeType type, std::size_t attr) const;
    // Multi-head self-attention with Q = K = V = x, stacked `layers` times.
    tensor::Tensor<Real> attend(const tensor::Tensor<Real>& x, NodeType type, std::size_t attr,
                                AttentionTrace<Real>* trace = nullptr) const;
    // Full pipeline for a same-type node list; [ids.size() x d], possibly 0 rows.
    tensor::Tensor<Real> encode(NodeType type, std::span<const NodeId> ids, AttentionTrace<Real>* trace = nullptr) const;
    // The target news node on its own (m = 1): [1 x d].
    tensor::Tensor<Real> encode_target(const HetGraph& g, NodeId news, AttentionTrace<Real>* trace = nullptr) const;

private:
    struct Head {
        tensor::Tensor<Real> q, k, v;
    };
    struct Layer {
        std::vector<Head> heads;
        tensor::Tensor<Real> o;
    };

    const std::vector<Layer>& block(NodeType type, std::size_t attr) const;

    ContentConfig cfg_;
    const FeatureStore* features_;
    std::array<std::vector<tensor::Tensor<Real>>, kNodeTypeCount> proj_;
    // Indexed [type][attr] when per_attribute_blocks, else [type][0].
    std::array<std::vector<std::vector<Layer>>, kNodeTypeCount> blocks_;
};

}  // namespace hetformer
