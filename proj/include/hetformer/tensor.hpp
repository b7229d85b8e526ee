#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "hetformer/error.hpp"

namespace hetformer::tensor {

template <typename Real>
struct Node;

// Handle to a dense row-major matrix that may take part in reverse-mode
// differentiation. Copies share the underlying storage, like any
// autodiff handle; use `clone()` for an independent copy.
//
// Shapes are rank 1 ([n], treated as a 1 x n row) or rank 2 ([rows, cols]).
// A rank-2 tensor may have zero rows; everything else is positive.
template <typename Real>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
    static Tensor vector(std::size_t n, bool requires_grad = false);
    static Tensor from(std::size_t rows, std::size_t cols, std::vector<Real> values, bool requires_grad = false);
    static Tensor scalar(Real value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    std::size_t rows() const;
    std::size_t cols() const;
    std::size_t size() const;
    std::size_t rank() const;
    std::vector<std::size_t> shape() const;

    std::span<Real> data();
    std::span<const Real> data() const;
    Real at(std::size_t r, std::size_t c) const;
    Real item() const;  // throws NotScalar unless size() == 1

    bool requires_grad() const;
    void set_requires_grad(bool on);
    // Gradient buffer; empty span until a backward pass reaches this tensor.
    std::span<Real> grad();
    std::span<const Real> grad() const;
    bool has_grad() const;
    void zero_grad();

    Tensor clone() const;   // detached deep copy
    Tensor detach() const;  // shares nothing with the tape, copies values

    Node<Real>* node() const { return node_.get(); }
    const std::shared_ptr<Node<Real>>& ptr() const { return node_; }
    explicit Tensor(std::shared_ptr<Node<Real>> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<Node<Real>> node_;
};

template <typename Real>
struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::uint8_t rank = 2;
    std::vector<Real> value;
    std::vector<Real> grad;
    bool requires_grad = false;
    // Creation order; backward visits nodes in strictly decreasing order,
    // which is the exact reverse of execution.
    std::uint64_t seq = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), Real(0));
    }
};

// While alive, new ops on this thread record no tape.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};
bool grad_enabled();

// ---- primitives -----------------------------------------------------------

template <typename Real> Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b);
// a * b^T without materialising the transpose.
template <typename Real> Tensor<Real> matmul_nt(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real> Tensor<Real> transpose(const Tensor<Real>& a);

template <typename Real> Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real> Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real> Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b);
// Adds a length-cols vector to every row.
template <typename Real> Tensor<Real> add_row(const Tensor<Real>& a, const Tensor<Real>& bias);
template <typename Real> Tensor<Real> scale(const Tensor<Real>& a, Real s);

template <typename Real> Tensor<Real> relu(const Tensor<Real>& a);
template <typename Real> Tensor<Real> sigmoid(const Tensor<Real>& a);
// Inverted dropout; identity (same handle) when !train or rate == 0.
template <typename Real> Tensor<Real> dropout(const Tensor<Real>& a, Real rate, bool train, std::mt19937_64& rng);
// Normalises each row to zero mean / unit variance, then applies
// gamma * x + beta when both are defined.
template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gamma, const Tensor<Real>& beta, Real eps = Real(1e-5));

// Row-wise softmax with max subtraction. `key_mask`, when non-empty, has
// one entry per column; zero entries receive exactly zero probability.
template <typename Real>
Tensor<Real> softmax_rows(const Tensor<Real>& x, std::span<const char> key_mask = {});

template <typename Real> Tensor<Real> concat_rows(const std::vector<Tensor<Real>>& xs);
template <typename Real> Tensor<Real> concat_cols(const std::vector<Tensor<Real>>& xs);
template <typename Real> Tensor<Real> slice_rows(const Tensor<Real>& x, std::size_t start, std::size_t count);
template <typename Real> Tensor<Real> slice_cols(const Tensor<Real>& x, std::size_t start, std::size_t count);
// Row i of the result is row idx[i] of `table`; backward scatter-adds.
template <typename Real> Tensor<Real> gather_rows(const Tensor<Real>& table, std::span<const std::size_t> idx);
template <typename Real>
Tensor<Real> embedding_lookup(const Tensor<Real>& table, std::span<const std::size_t> idx) {
    return gather_rows(table, idx);
}
// Mean over rows: [m x n] -> [1 x n].
template <typename Real> Tensor<Real> mean_rows(const Tensor<Real>& x);
// Elementwise mean of same-shape tensors.
template <typename Real> Tensor<Real> mean_of(const std::vector<Tensor<Real>>& xs);
template <typename Real> Tensor<Real> sum(const Tensor<Real>& x);

// Mean binary cross-entropy over a batch of probabilities (any shape with
// size() == targets.size()). Probabilities are clamped to [eps, 1 - eps];
// `weights`, when non-empty, scales each sample's term.
template <typename Real>
Tensor<Real> bce_loss(const Tensor<Real>& probs, std::span<const Real> targets, Real eps = Real(1e-7),
                      std::span<const Real> weights = {});

// ---- differentiation --------------------------------------------------------

// Populates .grad on every tensor reachable from `loss` that requires it.
// Gradients add into existing buffers; call zero_grad between steps.
template <typename Real> void backward(const Tensor<Real>& loss);

struct GradCheckResult {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t param_index = 0;
    std::size_t entry = 0;
    std::size_t checked = 0;
};

// Relative error used by grad_check: |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradCheckFloor = 1e-6;

// Compares reverse-mode gradients of `f` with central differences
// (f(x + eps) - f(x - eps)) / 2eps for every entry of every parameter.
// `f` must be deterministic and return a scalar.
template <typename Real>
GradCheckResult grad_check(const std::function<Tensor<Real>()>& f, const std::vector<Tensor<Real>>& params,
                           double eps = 1e-5);

}  // namespace hetformer::tensor
