#include "hetformer/parameters.hpp"

#include <cmath>
#include <cstring>

#include "hetformer/binary_io.hpp"
#include "hetformer/random.hpp"

namespace hetformer {

namespace {

constexpr char kMagic[8] = {'H', 'E', 'T', 'C', 'K', 'P', 'T', '1'};

template <typename Real>
void fill(tensor::Tensor<Real>& t, Init init, std::uint64_t seed, std::size_t fan_in, std::size_t fan_out) {
    auto values = t.data();
    std::mt19937_64 rng(seed);
    switch (init) {
        case Init::Zeros:
            std::fill(values.begin(), values.end(), Real(0));
            break;
        case Init::Ones:
            std::fill(values.begin(), values.end(), Real(1));
            break;
        case Init::Xavier: {
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            for (auto& v : values) v = static_cast<Real>((2.0 * unit(rng) - 1.0) * bound);
            break;
        }
        case Init::Small:
            for (auto& v : values) v = static_cast<Real>(0.02 * normal(rng));
            break;
    }
}

[[noreturn]] void bad_checkpoint(const std::string& what) {
    throw TensorError(TensorErrc::BadCheckpoint, "checkpoint: " + what);
}

}  // namespace

template <typename Real>
tensor::Tensor<Real> ParameterStore<Real>::create(const std::string& name, std::size_t rows, std::size_t cols,
                                                   Init init) {
    if (contains(name)) throw ModelError(ModelErrc::InvalidConfig, "duplicate parameter name " + name);
    auto t = tensor::Tensor<Real>::zeros(rows, cols, true);
    fill(t, init, hash_name(seed_, name), rows, cols);
    params_.emplace(name, t);
    return t;
}

template <typename Real>
tensor::Tensor<Real> ParameterStore<Real>::create_vector(const std::string& name, std::size_t n, Init init) {
    if (contains(name)) throw ModelError(ModelErrc::InvalidConfig, "duplicate parameter name " + name);
    auto t = tensor::Tensor<Real>::vector(n, true);
    fill(t, init, hash_name(seed_, name), n, n);
    params_.emplace(name, t);
    return t;
}

template <typename Real>
const tensor::Tensor<Real>& ParameterStore<Real>::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ModelError(ModelErrc::InvalidConfig, "unknown parameter " + name);
    return it->second;
}

template <typename Real>
std::size_t ParameterStore<Real>::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : params_) n += t.size();
    return n;
}

template <typename Real>
std::vector<std::string> ParameterStore<Real>::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : params_) out.push_back(name);
    return out;
}

template <typename Real>
std::vector<tensor::Tensor<Real>> ParameterStore<Real>::tensors() const {
    std::vector<tensor::Tensor<Real>> out;
    for (const auto& [_, t] : params_) out.push_back(t);
    return out;
}

template <typename Real>
void ParameterStore<Real>::zero_grad() {
    for (auto& [_, t] : params_) t.zero_grad();
}

template <typename Real>
Checkpoint snapshot(const ParameterStore<Real>& store) {
    Checkpoint ckpt;
    for (const auto& name : store.names()) {
        const auto& t = store.at(name);
        CheckpointEntry e;
        for (auto d : t.shape()) e.dims.push_back(static_cast<std::uint32_t>(d));
        e.data.assign(t.data().begin(), t.data().end());
        ckpt.emplace(name, std::move(e));
    }
    return ckpt;
}

template <typename Real>
void restore(ParameterStore<Real>& store, const Checkpoint& ckpt) {
    if (ckpt.size() != store.size()) {
        bad_checkpoint("expected " + std::to_string(store.size()) + " parameters, found " + std::to_string(ckpt.size()));
    }
    for (const auto& name : store.names()) {
        auto it = ckpt.find(name);
        if (it == ckpt.end()) bad_checkpoint("missing parameter " + name);
        auto t = store.at(name);
        std::vector<std::uint32_t> dims;
        for (auto d : t.shape()) dims.push_back(static_cast<std::uint32_t>(d));
        if (dims != it->second.dims) bad_checkpoint("shape mismatch for " + name);
        std::copy(it->second.data.begin(), it->second.data.end(), t.data().begin());
    }
}

std::vector<char> encode_checkpoint(const Checkpoint& ckpt) {
    std::vector<char> out;
    binary::put_bytes(out, kMagic, sizeof kMagic);
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.size()));
    for (const auto& [name, e] : ckpt) {
        if (name.size() > 0xffff) bad_checkpoint("parameter name too long");
        binary::put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        binary::put_bytes(out, name.data(), name.size());
        binary::put<std::uint8_t>(out, static_cast<std::uint8_t>(e.dims.size()));
        for (auto d : e.dims) binary::put<std::uint32_t>(out, d);
        for (float v : e.data) binary::put<float>(out, v);
    }
    return out;
}

Checkpoint decode_checkpoint(const std::vector<char>& bytes) {
    binary::Reader r(bytes);
    char magic[8];
    if (!r.get_bytes(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) bad_checkpoint("bad magic");
    std::uint32_t count = 0;
    if (!r.get(count)) bad_checkpoint("truncated header");
    Checkpoint ckpt;
    std::string previous;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t len = 0;
        if (!r.get(len)) bad_checkpoint("truncated entry");
        std::string name(len, '\0');
        std::uint8_t rank = 0;
        if (!r.get_bytes(name.data(), len) || !r.get(rank)) bad_checkpoint("truncated entry");
        if (i > 0 && name <= previous) bad_checkpoint("names not in lexicographic order");
        if (rank == 0 || rank > 2) bad_checkpoint("unsupported rank for " + name);
        CheckpointEntry e;
        std::size_t total = 1;
        for (std::uint8_t k = 0; k < rank; ++k) {
            std::uint32_t d = 0;
            if (!r.get(d)) bad_checkpoint("truncated dims");
            e.dims.push_back(d);
            total *= d;
        }
        if (!r.can_read(total * sizeof(float))) bad_checkpoint("truncated data for " + name);
        e.data.resize(total);
        for (auto& v : e.data) {
            r.get(v);
            if (!std::isfinite(v)) bad_checkpoint("non-finite value in " + name);
        }
        previous = name;
        ckpt.emplace(std::move(name), std::move(e));
    }
    if (r.remaining() != 0) bad_checkpoint("trailing bytes");
    return ckpt;
}

void write_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    if (!binary::write_file(path, encode_checkpoint(ckpt))) {
        throw TensorError(TensorErrc::IoError, "cannot write checkpoint " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::vector<char> bytes;
    if (!binary::read_file(path, bytes)) throw TensorError(TensorErrc::IoError, "cannot read checkpoint " + path);
    return decode_checkpoint(bytes);
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template Checkpoint snapshot(const ParameterStore<float>&);
template Checkpoint snapshot(const ParameterStore<double>&);
template void restore(ParameterStore<float>&, const Checkpoint&);
template void restore(ParameterStore<double>&, const Checkpoint&);

}  // namespace hetformer
