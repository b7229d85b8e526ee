#include "hetformer/transformer.hpp"

#include <algorithm>
#include <cmath>

namespace hetformer {

using tensor::Tensor;

void TransformerConfig::validate(std::uint32_t dim) const {
    if (layers == 0) throw ModelError(ModelErrc::InvalidConfig, "transformer: at least one layer");
    if (heads == 0 || dim == 0 || dim % heads != 0) {
        throw ModelError(ModelErrc::InvalidConfig, "transformer: dim must be a positive multiple of heads");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ModelError(ModelErrc::InvalidConfig, "transformer: dropout in [0, 1)");
    if (max_len == 0) throw ModelError(ModelErrc::InvalidConfig, "transformer: max_len must be positive");
}

TokenType token_type(NodeType t) {
    switch (t) {
        case NodeType::News: return TokenType::News;
        case NodeType::Post: return TokenType::Post;
        case NodeType::User: return TokenType::User;
    }
    return TokenType::News;
}

template <typename Real>
HetTransformer<Real>::HetTransformer(const TransformerConfig& cfg, std::uint32_t dim, ParameterStore<Real>& params)
    : cfg_(cfg), dim_(dim) {
    cfg_.validate(dim);
    if (!cfg_.no_positional) pos_ = params.create("xf.pos", cfg_.max_len, dim, Init::Small);
    type_ = params.create("xf.type", kTokenTypeCount, dim, Init::Small);
    for (std::uint32_t j = 0; j < cfg_.layers; ++j) {
        const std::string p = "xf.enc.layer" + std::to_string(j) + ".";
        enc_.push_back({make_attention(params, p + "attn."), make_norm(params, p + "ln1."), make_norm(params, p + "ln2."),
                        make_ff(params, p + "ff.")});
    }
    enc_norm_ = make_norm(params, "xf.enc.norm.");
    if (cfg_.no_decoder) return;
    for (std::uint32_t j = 0; j < cfg_.layers; ++j) {
        const std::string p = "xf.dec.layer" + std::to_string(j) + ".";
        dec_.push_back({make_attention(params, p + "self."), make_attention(params, p + "cross."),
                        make_norm(params, p + "ln1."), make_norm(params, p + "ln2."), make_norm(params, p + "ln3."),
                        make_ff(params, p + "ff.")});
    }
    dec_norm_ = make_norm(params, "xf.dec.norm.");
}

template <typename Real>
typename HetTransformer<Real>::Attention HetTransformer<Real>::make_attention(ParameterStore<Real>& params,
                                                                              const std::string& prefix) const {
    const std::size_t d = dim_;
    return {params.create(prefix + "wq", d, d, Init::Xavier), params.create_vector(prefix + "bq", d, Init::Zeros),
            params.create(prefix + "wk", d, d, Init::Xavier), params.create_vector(prefix + "bk", d, Init::Zeros),
            params.create(prefix + "wv", d, d, Init::Xavier), params.create_vector(prefix + "bv", d, Init::Zeros),
            params.create(prefix + "wo", d, d, Init::Xavier), params.create_vector(prefix + "bo", d, Init::Zeros)};
}

template <typename Real>
typename HetTransformer<Real>::Norm HetTransformer<Real>::make_norm(ParameterStore<Real>& params,
                                                                    const std::string& prefix) const {
    return {params.create_vector(prefix + "g", dim_, Init::Ones), params.create_vector(prefix + "b", dim_, Init::Zeros)};
}

template <typename Real>
typename HetTransformer<Real>::FeedForward HetTransformer<Real>::make_ff(ParameterStore<Real>& params,
                                                                         const std::string& prefix) const {
    const std::size_t ff = cfg_.ff_dim ? cfg_.ff_dim : 4 * dim_;
    return {params.create(prefix + "w1", dim_, ff, Init::Xavier), params.create_vector(prefix + "b1", ff, Init::Zeros),
            params.create(prefix + "w2", ff, dim_, Init::Xavier), params.create_vector(prefix + "b2", dim_, Init::Zeros)};
}

template <typename Real>
Tensor<Real> HetTransformer<Real>::embed(const Tensor<Real>& content, const std::vector<std::size_t>& type_ids) const {
    const std::size_t len = content.rows();
    if (len > cfg_.max_len) {
        throw ModelError(ModelErrc::LengthOverflow,
                         "sequence length " + std::to_string(len) + " exceeds max_len " + std::to_string(cfg_.max_len),
                         len);
    }
    auto out = tensor::add(content, tensor::gather_rows(type_, std::span<const std::size_t>(type_ids)));
    if (pos_.defined()) out = tensor::add(out, tensor::slice_rows(pos_, 0, len));
    return out;
}

template <typename Real>
Tensor<Real> HetTransformer<Real>::build_enc_input(const Tensor<Real>& target, const Tensor<Real>& neighbors,
                                                   const NeighborSample& sample) const {
    if (target.rows() != 1 || target.cols() != dim_) throw ModelError(ModelErrc::DimMismatch, "target must be [1 x d]");
    if (neighbors.rows() != sample.size() || (neighbors.rows() > 0 && neighbors.cols() != dim_)) {
        throw ModelError(ModelErrc::DimMismatch, "neighbor rows must align with the ranked sample");
    }
    std::vector<std::size_t> type_ids{static_cast<std::size_t>(TokenType::Target)};
    for (const auto& n : sample.ranked) type_ids.push_back(static_cast<std::size_t>(token_type(n.type)));
    const auto content = neighbors.rows() == 0 ? target : tensor::concat_rows<Real>({target, neighbors});
    return embed(content, type_ids);
}

template <typename Real>
Tensor<Real> HetTransformer<Real>::build_dec_input(const Tensor<Real>& target, const Tensor<Real>& news_neighbors) const {
    if (target.rows() != 1 || target.cols() != dim_) throw ModelError(ModelErrc::DimMismatch, "target must be [1 x d]");
    if (news_neighbors.rows() > 0 && news_neighbors.cols() != dim_) {
        throw ModelError(ModelErrc::DimMismatch, "news neighbors must be [m_n x d]");
    }
    const auto content = news_neighbors.rows() == 0 ? target : tensor::concat_rows<Real>({target, news_neighbors});
    std::vector<std::size_t> type_ids(content.rows(), static_cast<std::size_t>(TokenType::News));
    return embed(content, type_ids);
}

namespace {

template <typename Real>
Tensor<Real> pad_and_stack(const std::vector<Tensor<Real>>& seqs, std::size_t len, std::size_t dim,
                           std::vector<std::vector<char>>& masks) {
    std::vector<Tensor<Real>> parts;
    masks.clear();
    for (const auto& s : seqs) {
        parts.push_back(s);
        if (s.rows() < len) parts.push_back(Tensor<Real>::zeros(len - s.rows(), dim));
        std::vector<char> mask(len, 0);
        std::fill_n(mask.begin(), s.rows(), 1);
        masks.push_back(std::move(mask));
    }
    return tensor::concat_rows(parts);
}

}  // namespace

template <typename Real>
SequenceBatch<Real> HetTransformer<Real>::make_batch(const std::vector<Tensor<Real>>& enc,
                                                     const std::vector<Tensor<Real>>& dec) const {
    if (enc.empty() || (!cfg_.no_decoder && dec.size() != enc.size())) {
        throw ModelError(ModelErrc::InvalidConfig, "batch needs one encoder and one decoder sequence per sample");
    }
    SequenceBatch<Real> b;
    b.batch = enc.size();
    for (const auto& s : enc) b.enc_len = std::max(b.enc_len, s.rows());
    b.enc = pad_and_stack(enc, b.enc_len, dim_, b.enc_mask);
    if (!cfg_.no_decoder) {
        for (const auto& s : dec) b.dec_len = std::max(b.dec_len, s.rows());
        b.dec = pad_and_stack(dec, b.dec_len, dim_, b.dec_mask);
    }
    return b;
}

template <typename Real>
Tensor<Real> HetTransformer<Real>::norm(const Norm& n, const Tensor<Real>& x) const {
    return tensor::layer_norm(x, n.g, n.b);
}

template <typename Real>
Tensor<Real> HetTransformer<Real>::feed_forward(const FeedForward& f, const Tensor<Real>& x) const {
    auto h = tensor::relu(tensor::add_row(tensor::matmul(x, f.w1), f.b1));
    return tensor::add_row(tensor::matmul(h, f.w2), f.b2);
}

template <typename Real>
Tensor<Real> HetTransformer<Real>::attention(const Attention& a, const Tensor<Real>& xq, std::size_t lq,
                                             const Tensor<Real>& xkv, std::size_t lk,
                                             const std::vector<std::vector<char>>& key_mask, std::size_t batch,
                                             TransformerTrace<Real>* trace) const {
    const std::size_t heads = cfg_.heads;
    const std::size_t dk = dim_ / heads;
    const Real inv_sqrt_dk = Real(1) / std::sqrt(static_cast<Real>(dk));
    const auto q = tensor::add_row(tensor::matmul(xq, a.wq), a.bq);
    const auto k = tensor::add_row(tensor::matmul(xkv, a.wk), a.bk);
    const auto v = tensor::add_row(tensor::matmul(xkv, a.wv), a.bv);
    std::vector<Tensor<Real>> samples;
    samples.reserve(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const auto qb = tensor::slice_rows(q, b * lq, lq);
        const auto kb = tensor::slice_rows(k, b * lk, lk);
        const auto vb = tensor::slice_rows(v, b * lk, lk);
        std::vector<Tensor<Real>> outs;
        outs.reserve(heads);
        for (std::size_t h = 0; h < heads; ++h) {
            const auto qh = heads == 1 ? qb : tensor::slice_cols(qb, h * dk, dk);
            const auto kh = heads == 1 ? kb : tensor::slice_cols(kb, h * dk, dk);
            const auto vh = heads == 1 ? vb : tensor::slice_cols(vb, h * dk, dk);
            const auto w = tensor::softmax_rows(tensor::scale(tensor::matmul_nt(qh, kh), inv_sqrt_dk),
                                                std::span<const char>(key_mask[b]));
            if (trace) trace->weights.push_back(w);
            outs.push_back(tensor::matmul(w, vh));
        }
        samples.push_back(tensor::concat_cols(outs));
    }
    return tensor::add_row(tensor::matmul(tensor::concat_rows(samples), a.wo), a.bo);
}

template <typename Real>
Tensor<Real> HetTransformer<Real>::forward(const SequenceBatch<Real>& batch, bool train, std::mt19937_64& rng,
                                           TransformerTrace<Real>* trace) const {
    const Real rate = static_cast<Real>(cfg_.dropout);
    auto x = batch.enc;
    for (const auto& layer : enc_) {
        const auto h = norm(layer.ln1, x);
        x = tensor::add(x, tensor::dropout(attention(layer.attn, h, batch.enc_len, h, batch.enc_len, batch.enc_mask,
                                                     batch.batch, trace),
                                           rate, train, rng));
        x = tensor::add(x, tensor::dropout(feed_forward(layer.ff, norm(layer.ln2, x)), rate, train, rng));
    }
    const auto memory = norm(enc_norm_, x);

    std::vector<std::size_t> first;
    if (cfg_.no_decoder) {
        for (std::size_t b = 0; b < batch.batch; ++b) first.push_back(b * batch.enc_len);
        return tensor::gather_rows(memory, std::span<const std::size_t>(first));
    }

    auto y = batch.dec;
    for (const auto& layer : dec_) {
        const auto h = norm(layer.ln1, y);
        y = tensor::add(y, tensor::dropout(attention(layer.self_attn, h, batch.dec_len, h, batch.dec_len,
                                                     batch.dec_mask, batch.batch, trace),
                                           rate, train, rng));
        y = tensor::add(y, tensor::dropout(attention(layer.cross_attn, norm(layer.ln2, y), batch.dec_len, memory,
                                                     batch.enc_len, batch.enc_mask, batch.batch, trace),
                                           rate, train, rng));
        y = tensor::add(y, tensor::dropout(feed_forward(layer.ff, norm(layer.ln3, y)), rate, train, rng));
    }
    const auto out = norm(dec_norm_, y);
    for (std::size_t b = 0; b < batch.batch; ++b) first.push_back(b * batch.dec_len);
    return tensor::gather_rows(out, std::span<const std::size_t>(first));
}

template struct SequenceBatch<float>;
template struct SequenceBatch<double>;
template class HetTransformer<float>;
template class HetTransformer<double>;

}  // namespace hetformer
