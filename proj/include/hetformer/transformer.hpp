#pragma once

#include <random>
#include <vector>

#include "hetformer/parameters.hpp"
#include "hetformer/rwr.hpp"
#include "hetformer/tensor.hpp"

namespace hetformer {

struct TransformerConfig {
    std::uint32_t layers = 1;  // encoder and decoder each
    std::uint32_t heads = 2;
    std::uint32_t ff_dim = 0;  // 0 means 4 * d
    double dropout = 0.1;
    std::uint32_t max_len = 256;
    bool no_decoder = false;
    bool no_positional = false;

    void validate(std::uint32_t dim) const;  // throws ModelError(InvalidConfig)
};

enum class TokenType : std::uint8_t { Target = 0, News = 1, Post = 2, User = 3 };
inline constexpr std::size_t kTokenTypeCount = 4;

TokenType token_type(NodeType t);

// A padded batch, flattened so that sample b occupies rows
// [b * len, (b + 1) * len) of `enc` / `dec`. Mask entries are 1 for real
// tokens and 0 for padding.
template <typename Real>
struct SequenceBatch {
    tensor::Tensor<Real> enc;
    tensor::Tensor<Real> dec;
    std::size_t batch = 0;
    std::size_t enc_len = 0;
    std::size_t dec_len = 0;
    std::vector<std::vector<char>> enc_mask;
    std::vector<std::vector<char>> dec_mask;
};

// Softmax weights of every attention call, in execution order, one tensor
// per (sample, head).
template <typename Real>
struct TransformerTrace {
    std::vector<tensor::Tensor<Real>> weights;
};

template <typename Real>
class HetTransformer {
public:
    HetTransformer(const TransformerConfig& cfg, std::uint32_t dim, ParameterStore<Real>& params);

    const TransformerConfig& config() const { return cfg_; }
    std::uint32_t dim() const { return dim_; }

    // Target token followed by the neighbors in RWR rank order; `neighbors`
    // rows are aligned with sample.ranked. Adds positional and type embeddings.
    tensor::Tensor<Real> build_enc_input(const tensor::Tensor<Real>& target, const tensor::Tensor<Real>& neighbors,
                                         const NeighborSample& sample) const;
    // Target token followed by the news-type neighbors in rank order.
    tensor::Tensor<Real> build_dec_input(const tensor::Tensor<Real>& target,
                                         const tensor::Tensor<Real>& news_neighbors) const;

    // Pads to the longest sequence of each side.
    SequenceBatch<Real> make_batch(const std::vector<tensor::Tensor<Real>>& enc,
                                   const std::vector<tensor::Tensor<Real>>& dec) const;

    // Rep: [batch x d], decoder position 0 (encoder position 0 without a decoder).
    tensor::Tensor<Real> forward(const SequenceBatch<Real>& batch, bool train, std::mt19937_64& rng,
                                 TransformerTrace<Real>* trace = nullptr) const;

private:
    struct Attention {
        tensor::Tensor<Real> wq, bq, wk, bk, wv, bv, wo, bo;
    };
    struct Norm {
        tensor::Tensor<Real> g, b;
    };
    struct FeedForward {
        tensor::Tensor<Real> w1, b1, w2, b2;
    };
    struct EncoderLayer {
        Attention attn;
        Norm ln1, ln2;
        FeedForward ff;
    };
    struct DecoderLayer {
        Attention self_attn, cross_attn;
        Norm ln1, ln2, ln3;
        FeedForward ff;
    };

    Attention make_attention(ParameterStore<Real>& params, const std::string& prefix) const;
    Norm make_norm(ParameterStore<Real>& params, const std::string& prefix) const;
    FeedForward make_ff(ParameterStore<Real>& params, const std::string& prefix) const;

    tensor::Tensor<Real> attention(const Attention& a, const tensor::Tensor<Real>& xq, std::size_t lq,
                                   const tensor::Tensor<Real>& xkv, std::size_t lk,
                                   const std::vector<std::vector<char>>& key_mask, std::size_t batch,
                                   TransformerTrace<Real>* trace) const;
    tensor::Tensor<Real> feed_forward(const FeedForward& f, const tensor::Tensor<Real>& x) const;
    tensor::Tensor<Real> norm(const Norm& n, const tensor::Tensor<Real>& x) const;
    tensor::Tensor<Real> embed(const tensor::Tensor<Real>& content, const std::vector<std::size_t>& type_ids) const;

    TransformerConfig cfg_;
    std::uint32_t dim_;
    tensor::Tensor<Real> pos_;   // undefined under no_positional
    tensor::Tensor<Real> type_;
    std::vector<EncoderLayer> enc_;
    Norm enc_norm_;
    std::vector<DecoderLayer> dec_;
    Norm dec_norm_;
};

}  // namespace hetformer
