#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hetformer/tensor.hpp"

namespace hetformer {

enum class Init {
    Zeros,
    Ones,
    Xavier,  // uniform in +-sqrt(6 / (fan_in + fan_out))
    Small,   // normal with std 0.02
};

// Named learnable tensors. Each parameter draws its initial values from a
// generator seeded by (store seed, name), so adding or removing one
// parameter never perturbs another.
template <typename Real>
class ParameterStore {
public:
    explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed) {}

    // Throws ModelError(InvalidConfig) when the name is already taken.
    tensor::Tensor<Real> create(const std::string& name, std::size_t rows, std::size_t cols, Init init);
    tensor::Tensor<Real> create_vector(const std::string& name, std::size_t n, Init init);

    bool contains(const std::string& name) const { return params_.count(name) != 0; }
    const tensor::Tensor<Real>& at(const std::string& name) const;
    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;

    // Lexicographic by name.
    std::vector<std::string> names() const;
    std::vector<tensor::Tensor<Real>> tensors() const;

    void zero_grad();
    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::map<std::string, tensor::Tensor<Real>> params_;
};

struct CheckpointEntry {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};
using Checkpoint = std::map<std::string, CheckpointEntry>;

template <typename Real>
Checkpoint snapshot(const ParameterStore<Real>& store);
// Copies values into the store. Names and shapes must match exactly;
// anything else throws TensorError(BadCheckpoint).
template <typename Real>
void restore(ParameterStore<Real>& store, const Checkpoint& ckpt);

std::vector<char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<char>& bytes);
void write_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hetformer
