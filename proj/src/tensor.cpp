#include "hetformer/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <unordered_set>

namespace hetformer::tensor {

namespace {

std::atomic<std::uint64_t> g_seq{1};
thread_local bool t_grad_enabled = true;

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
    throw TensorError(TensorErrc::ShapeMismatch, op + ": " + detail);
}

template <typename Real>
std::shared_ptr<Node<Real>> make_node(std::size_t rows, std::size_t cols, std::uint8_t rank = 2) {
    auto n = std::make_shared<Node<Real>>();
    n->rows = rows;
    n->cols = cols;
    n->rank = rank;
    n->value.assign(rows * cols, Real(0));
    n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
    return n;
}

template <typename Real>
void check_finite(const Node<Real>& n, const char* op) {
    for (Real v : n.value) {
        if (!std::isfinite(v)) throw TensorError(TensorErrc::NonFiniteValue, std::string(op) + ": non-finite output");
    }
}

// Attaches the backward rule when any input needs a gradient.
template <typename Real>
Tensor<Real> finish(std::shared_ptr<Node<Real>> out, std::vector<std::shared_ptr<Node<Real>>> inputs,
                    std::function<void(Node<Real>&)> rule, const char* op) {
    check_finite(*out, op);
    if (t_grad_enabled) {
        bool need = false;
        for (const auto& in : inputs) need = need || in->requires_grad;
        if (need) {
            out->requires_grad = true;
            out->parents = std::move(inputs);
            out->backward = std::move(rule);
        }
    }
    return Tensor<Real>(std::move(out));
}

template <typename Real>
const Node<Real>& node_of(const Tensor<Real>& t, const char* op) {
    if (!t.defined()) shape_error(op, "undefined tensor");
    return *t.node();
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

// ---- Tensor ---------------------------------------------------------------

template <typename Real>
Tensor<Real> Tensor<Real>::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    if (cols == 0) shape_error("zeros", "cols must be positive");
    auto n = make_node<Real>(rows, cols);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

template <typename Real>
Tensor<Real> Tensor<Real>::vector(std::size_t n, bool requires_grad) {
    if (n == 0) shape_error("vector", "length must be positive");
    auto node = make_node<Real>(1, n, 1);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

template <typename Real>
Tensor<Real> Tensor<Real>::from(std::size_t rows, std::size_t cols, std::vector<Real> values, bool requires_grad) {
    if (cols == 0) shape_error("from", "cols must be positive");
    if (values.size() != rows * cols) shape_error("from", "value count does not match shape");
    auto n = make_node<Real>(rows, cols);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    check_finite(*n, "from");
    return Tensor(std::move(n));
}

template <typename Real>
Tensor<Real> Tensor<Real>::scalar(Real value, bool requires_grad) {
    auto n = make_node<Real>(1, 1, 1);
    n->value[0] = value;
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

template <typename Real> std::size_t Tensor<Real>::rows() const { return node_->rows; }
template <typename Real> std::size_t Tensor<Real>::cols() const { return node_->cols; }
template <typename Real> std::size_t Tensor<Real>::size() const { return node_->value.size(); }
template <typename Real> std::size_t Tensor<Real>::rank() const { return node_->rank; }

template <typename Real>
std::vector<std::size_t> Tensor<Real>::shape() const {
    if (node_->rank == 1) return {node_->cols};
    return {node_->rows, node_->cols};
}

template <typename Real> std::span<Real> Tensor<Real>::data() { return node_->value; }
template <typename Real> std::span<const Real> Tensor<Real>::data() const { return node_->value; }

template <typename Real>
Real Tensor<Real>::at(std::size_t r, std::size_t c) const {
    if (r >= node_->rows || c >= node_->cols) throw TensorError(TensorErrc::IndexOutOfRange, "at: index out of range");
    return node_->value[r * node_->cols + c];
}

template <typename Real>
Real Tensor<Real>::item() const {
    if (size() != 1) throw TensorError(TensorErrc::NotScalar, "item: tensor is not a scalar");
    return node_->value[0];
}

template <typename Real> bool Tensor<Real>::requires_grad() const { return node_->requires_grad; }
template <typename Real> void Tensor<Real>::set_requires_grad(bool on) { node_->requires_grad = on; }
template <typename Real> std::span<Real> Tensor<Real>::grad() { return node_->grad; }
template <typename Real> std::span<const Real> Tensor<Real>::grad() const { return node_->grad; }
template <typename Real> bool Tensor<Real>::has_grad() const { return !node_->grad.empty(); }

template <typename Real>
void Tensor<Real>::zero_grad() {
    std::fill(node_->grad.begin(), node_->grad.end(), Real(0));
}

template <typename Real>
Tensor<Real> Tensor<Real>::clone() const {
    auto n = make_node<Real>(node_->rows, node_->cols, node_->rank);
    n->value = node_->value;
    n->requires_grad = node_->requires_grad;
    return Tensor(std::move(n));
}

template <typename Real>
Tensor<Real> Tensor<Real>::detach() const {
    auto n = make_node<Real>(node_->rows, node_->cols, node_->rank);
    n->value = node_->value;
    return Tensor(std::move(n));
}

// ---- linear algebra ---------------------------------------------------------

template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
    const auto& A = node_of(a, "matmul");
    const auto& B = node_of(b, "matmul");
    if (A.cols != B.rows) {
        shape_error("matmul", std::to_string(A.rows) + "x" + std::to_string(A.cols) + " * " + std::to_string(B.rows) +
                                  "x" + std::to_string(B.cols));
    }
    const std::size_t m = A.rows, k = A.cols, n = B.cols;
    auto out = make_node<Real>(m, n);
    Real* C = out->value.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const Real aip = A.value[i * k + p];
            if (aip == Real(0)) continue;
            const Real* brow = &B.value[p * n];
            Real* crow = C + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
    return finish<Real>(std::move(out), {a.ptr(), b.ptr()}, [m, k, n](Node<Real>& self) {
        auto& A = *self.parents[0];
        auto& B = *self.parents[1];
        const Real* G = self.grad.data();
        if (A.requires_grad) {
            A.ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const Real* brow = &B.value[p * n];
                    const Real* grow = G + i * n;
                    Real acc = 0;
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    A.grad[i * k + p] += acc;
                }
            }
        }
        if (B.requires_grad) {
            B.ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const Real aip = A.value[i * k + p];
                    if (aip == Real(0)) continue;
                    const Real* grow = G + i * n;
                    Real* bg = &B.grad[p * n];
                    for (std::size_t j = 0; j < n; ++j) bg[j] += aip * grow[j];
                }
            }
        }
    }, "matmul");
}

template <typename Real>
Tensor<Real> matmul_nt(const Tensor<Real>& a, const Tensor<Real>& b) {
    const auto& A = node_of(a, "matmul_nt");
    const auto& B = node_of(b, "matmul_nt");
    if (A.cols != B.cols) shape_error("matmul_nt", "inner dimensions differ");
    const std::size_t m = A.rows, k = A.cols, n = B.rows;
    auto out = make_node<Real>(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        const Real* arow = &A.value[i * k];
        for (std::size_t j = 0; j < n; ++j) {
            const Real* brow = &B.value[j * k];
            Real acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            out->value[i * n + j] = acc;
        }
    }
    return finish<Real>(std::move(out), {a.ptr(), b.ptr()}, [m, k, n](Node<Real>& self) {
        auto& A = *self.parents[0];
        auto& B = *self.parents[1];
        const Real* G = self.grad.data();
        if (A.requires_grad) {
            A.ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                Real* ag = &A.grad[i * k];
                for (std::size_t j = 0; j < n; ++j) {
                    const Real g = G[i * n + j];
                    if (g == Real(0)) continue;
                    const Real* brow = &B.value[j * k];
                    for (std::size_t p = 0; p < k; ++p) ag[p] += g * brow[p];
                }
            }
        }
        if (B.requires_grad) {
            B.ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                const Real* arow = &A.value[i * k];
                for (std::size_t j = 0; j < n; ++j) {
                    const Real g = G[i * n + j];
                    if (g == Real(0)) continue;
                    Real* bg = &B.grad[j * k];
                    for (std::size_t p = 0; p < k; ++p) bg[p] += g * arow[p];
                }
            }
        }
    }, "matmul_nt");
}

template <typename Real>
Tensor<Real> transpose(const Tensor<Real>& a) {
    const auto& A = node_of(a, "transpose");
    const std::size_t m = A.rows, n = A.cols;
    if (m == 0) shape_error("transpose", "empty tensor");
    auto out = make_node<Real>(n, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out->value[j * m + i] = A.value[i * n + j];
    return finish<Real>(std::move(out), {a.ptr()}, [m, n](Node<Real>& self) {
        auto& A = *self.parents[0];
        A.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) A.grad[i * n + j] += self.grad[j * m + i];
    }, "transpose");
}

// ---- elementwise ------------------------------------------------------------

namespace {

template <typename Real>
void require_same_shape(const Node<Real>& A, const Node<Real>& B, const char* op) {
    if (A.rows != B.rows || A.cols != B.cols) {
        shape_error(op, std::to_string(A.rows) + "x" + std::to_string(A.cols) + " vs " + std::to_string(B.rows) + "x" +
                            std::to_string(B.cols));
    }
}

}  // namespace

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
    const auto& A = node_of(a, "add");
    const auto& B = node_of(b, "add");
    require_same_shape(A, B, "add");
    auto out = make_node<Real>(A.rows, A.cols, A.rank);
    for (std::size_t i = 0; i < A.value.size(); ++i) out->value[i] = A.value[i] + B.value[i];
    return finish<Real>(std::move(out), {a.ptr(), b.ptr()}, [](Node<Real>& self) {
        for (int s = 0; s < 2; ++s) {
            auto& P = *self.parents[s];
            if (!P.requires_grad) continue;
            P.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) P.grad[i] += self.grad[i];
        }
    }, "add");
}

template <typename Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b) {
    const auto& A = node_of(a, "sub");
    const auto& B = node_of(b, "sub");
    require_same_shape(A, B, "sub");
    auto out = make_node<Real>(A.rows, A.cols, A.rank);
    for (std::size_t i = 0; i < A.value.size(); ++i) out->value[i] = A.value[i] - B.value[i];
    return finish<Real>(std::move(out), {a.ptr(), b.ptr()}, [](Node<Real>& self) {
        for (int s = 0; s < 2; ++s) {
            auto& P = *self.parents[s];
            if (!P.requires_grad) continue;
            P.ensure_grad();
            const Real sign = s == 0 ? Real(1) : Real(-1);
            for (std::size_t i = 0; i < self.grad.size(); ++i) P.grad[i] += sign * self.grad[i];
        }
    }, "sub");
}

template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
    const auto& A = node_of(a, "mul");
    const auto& B = node_of(b, "mul");
    require_same_shape(A, B, "mul");
    auto out = make_node<Real>(A.rows, A.cols, A.rank);
    for (std::size_t i = 0; i < A.value.size(); ++i) out->value[i] = A.value[i] * B.value[i];
    return finish<Real>(std::move(out), {a.ptr(), b.ptr()}, [](Node<Real>& self) {
        auto& A = *self.parents[0];
        auto& B = *self.parents[1];
        if (A.requires_grad) {
            A.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += self.grad[i] * B.value[i];
        }
        if (B.requires_grad) {
            B.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) B.grad[i] += self.grad[i] * A.value[i];
        }
    }, "mul");
}

template <typename Real>
Tensor<Real> add_row(const Tensor<Real>& a, const Tensor<Real>& bias) {
    const auto& A = node_of(a, "add_row");
    const auto& B = node_of(bias, "add_row");
    if (B.value.size() != A.cols) shape_error("add_row", "bias length != cols");
    const std::size_t m = A.rows, n = A.cols;
    auto out = make_node<Real>(m, n, A.rank);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out->value[i * n + j] = A.value[i * n + j] + B.value[j];
    return finish<Real>(std::move(out), {a.ptr(), bias.ptr()}, [m, n](Node<Real>& self) {
        auto& A = *self.parents[0];
        auto& B = *self.parents[1];
        if (A.requires_grad) {
            A.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += self.grad[i];
        }
        if (B.requires_grad) {
            B.ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) B.grad[j] += self.grad[i * n + j];
        }
    }, "add_row");
}

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& a, Real s) {
    const auto& A = node_of(a, "scale");
    auto out = make_node<Real>(A.rows, A.cols, A.rank);
    for (std::size_t i = 0; i < A.value.size(); ++i) out->value[i] = A.value[i] * s;
    return finish<Real>(std::move(out), {a.ptr()}, [s](Node<Real>& self) {
        auto& A = *self.parents[0];
        A.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += self.grad[i] * s;
    }, "scale");
}

template <typename Real>
Tensor<Real> relu(const Tensor<Real>& a) {
    const auto& A = node_of(a, "relu");
    auto out = make_node<Real>(A.rows, A.cols, A.rank);
    for (std::size_t i = 0; i < A.value.size(); ++i) out->value[i] = A.value[i] > Real(0) ? A.value[i] : Real(0);
    return finish<Real>(std::move(out), {a.ptr()}, [](Node<Real>& self) {
        auto& A = *self.parents[0];
        A.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (A.value[i] > Real(0)) A.grad[i] += self.grad[i];
        }
    }, "relu");
}

template <typename Real>
Tensor<Real> sigmoid(const Tensor<Real>& a) {
    const auto& A = node_of(a, "sigmoid");
    auto out = make_node<Real>(A.rows, A.cols, A.rank);
    for (std::size_t i = 0; i < A.value.size(); ++i) {
        const Real x = A.value[i];
        // Branches keep exp() from overflowing for large |x|.
        out->value[i] = x >= Real(0) ? Real(1) / (Real(1) + std::exp(-x)) : std::exp(x) / (Real(1) + std::exp(x));
    }
    return finish<Real>(std::move(out), {a.ptr()}, [](Node<Real>& self) {
        auto& A = *self.parents[0];
        A.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const Real y = self.value[i];
            A.grad[i] += self.grad[i] * y * (Real(1) - y);
        }
    }, "sigmoid");
}

template <typename Real>
Tensor<Real> dropout(const Tensor<Real>& a, Real rate, bool train, std::mt19937_64& rng) {
    if (!(rate >= Real(0) && rate < Real(1))) shape_error("dropout", "rate must lie in [0, 1)");
    if (!train || rate == Real(0)) return a;
    const auto& A = node_of(a, "dropout");
    auto out = make_node<Real>(A.rows, A.cols, A.rank);
    std::vector<Real> mask(A.value.size());
    const Real keep_scale = Real(1) / (Real(1) - rate);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        mask[i] = u < static_cast<double>(rate) ? Real(0) : keep_scale;
        out->value[i] = A.value[i] * mask[i];
    }
    return finish<Real>(std::move(out), {a.ptr()}, [mask = std::move(mask)](Node<Real>& self) {
        auto& A = *self.parents[0];
        A.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += self.grad[i] * mask[i];
    }, "dropout");
}

template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gamma, const Tensor<Real>& beta, Real eps) {
    const auto& X = node_of(x, "layer_norm");
    const bool affine = gamma.defined() && beta.defined();
    const std::size_t m = X.rows, n = X.cols;
    if (affine && (gamma.size() != n || beta.size() != n)) shape_error("layer_norm", "affine length != cols");
    auto out = make_node<Real>(m, n, X.rank);
    std::vector<Real> xhat(m * n);
    std::vector<Real> rstd(m);
    for (std::size_t i = 0; i < m; ++i) {
        const Real* row = &X.value[i * n];
        Real mean = 0;
        for (std::size_t j = 0; j < n; ++j) mean += row[j];
        mean /= static_cast<Real>(n);
        Real var = 0;
        for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<Real>(n);
        rstd[i] = Real(1) / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            xhat[i * n + j] = (row[j] - mean) * rstd[i];
            out->value[i * n + j] =
                affine ? xhat[i * n + j] * gamma.data()[j] + beta.data()[j] : xhat[i * n + j];
        }
    }
    std::vector<std::shared_ptr<Node<Real>>> inputs{x.ptr()};
    if (affine) {
        inputs.push_back(gamma.ptr());
        inputs.push_back(beta.ptr());
    }
    return finish<Real>(std::move(out), std::move(inputs),
                        [m, n, affine, xhat = std::move(xhat), rstd = std::move(rstd)](Node<Real>& self) {
        auto& X = *self.parents[0];
        Node<Real>* G = affine ? self.parents[1].get() : nullptr;
        Node<Real>* B = affine ? self.parents[2].get() : nullptr;
        if (affine && G->requires_grad) G->ensure_grad();
        if (affine && B->requires_grad) B->ensure_grad();
        if (X.requires_grad) X.ensure_grad();
        std::vector<Real> dxhat(n);
        for (std::size_t i = 0; i < m; ++i) {
            Real mean_d = 0, mean_dx = 0;
            for (std::size_t j = 0; j < n; ++j) {
                const Real g = self.grad[i * n + j];
                const Real xh = xhat[i * n + j];
                if (affine) {
                    if (G->requires_grad) G->grad[j] += g * xh;
                    if (B->requires_grad) B->grad[j] += g;
                }
                dxhat[j] = affine ? g * G->value[j] : g;
                mean_d += dxhat[j];
                mean_dx += dxhat[j] * xh;
            }
            if (!X.requires_grad) continue;
            mean_d /= static_cast<Real>(n);
            mean_dx /= static_cast<Real>(n);
            for (std::size_t j = 0; j < n; ++j) {
                X.grad[i * n + j] += rstd[i] * (dxhat[j] - mean_d - xhat[i * n + j] * mean_dx);
            }
        }
    }, "layer_norm");
}

template <typename Real>
Tensor<Real> softmax_rows(const Tensor<Real>& x, std::span<const char> key_mask) {
    const auto& X = node_of(x, "softmax_rows");
    const std::size_t m = X.rows, n = X.cols;
    if (!key_mask.empty() && key_mask.size() != n) shape_error("softmax_rows", "mask length != cols");
    auto out = make_node<Real>(m, n, X.rank);
    for (std::size_t i = 0; i < m; ++i) {
        const Real* row = &X.value[i * n];
        Real* y = &out->value[i * n];
        Real mx = -std::numeric_limits<Real>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (key_mask.empty() || key_mask[j]) mx = std::max(mx, row[j]);
        }
        if (!std::isfinite(mx)) continue;  // fully masked row stays zero
        Real total = 0;
        for (std::size_t j = 0; j < n; ++j) {
            y[j] = (key_mask.empty() || key_mask[j]) ? std::exp(row[j] - mx) : Real(0);
            total += y[j];
        }
        for (std::size_t j = 0; j < n; ++j) y[j] /= total;
    }
    return finish<Real>(std::move(out), {x.ptr()}, [m, n](Node<Real>& self) {
        auto& X = *self.parents[0];
        X.ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
            const Real* y = &self.value[i * n];
            const Real* g = &self.grad[i * n];
            Real dot = 0;
            for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
            for (std::size_t j = 0; j < n; ++j) X.grad[i * n + j] += y[j] * (g[j] - dot);
        }
    }, "softmax_rows");
}

// ---- structural -------------------------------------------------------------

template <typename Real>
Tensor<Real> concat_rows(const std::vector<Tensor<Real>>& xs) {
    if (xs.empty()) shape_error("concat_rows", "no inputs");
    const std::size_t n = node_of(xs.front(), "concat_rows").cols;
    std::size_t total = 0;
    std::vector<std::shared_ptr<Node<Real>>> inputs;
    for (const auto& x : xs) {
        const auto& X = node_of(x, "concat_rows");
        if (X.cols != n) shape_error("concat_rows", "column counts differ");
        total += X.rows;
        inputs.push_back(x.ptr());
    }
    if (xs.size() == 1) return xs.front();
    auto out = make_node<Real>(total, n);
    std::size_t offset = 0;
    for (const auto& x : xs) {
        std::copy(x.data().begin(), x.data().end(), out->value.begin() + static_cast<std::ptrdiff_t>(offset));
        offset += x.size();
    }
    return finish<Real>(std::move(out), std::move(inputs), [](Node<Real>& self) {
        std::size_t offset = 0;
        for (auto& p : self.parents) {
            const std::size_t len = p->value.size();
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t i = 0; i < len; ++i) p->grad[i] += self.grad[offset + i];
            }
            offset += len;
        }
    }, "concat_rows");
}

template <typename Real>
Tensor<Real> concat_cols(const std::vector<Tensor<Real>>& xs) {
    if (xs.empty()) shape_error("concat_cols", "no inputs");
    const std::size_t m = node_of(xs.front(), "concat_cols").rows;
    std::size_t total = 0;
    std::vector<std::shared_ptr<Node<Real>>> inputs;
    for (const auto& x : xs) {
        const auto& X = node_of(x, "concat_cols");
        if (X.rows != m) shape_error("concat_cols", "row counts differ");
        total += X.cols;
        inputs.push_back(x.ptr());
    }
    if (xs.size() == 1) return xs.front();
    auto out = make_node<Real>(m, total);
    std::size_t col = 0;
    for (const auto& x : xs) {
        const std::size_t c = x.cols();
        for (std::size_t i = 0; i < m; ++i)
            std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(i * c), c,
                        out->value.begin() + static_cast<std::ptrdiff_t>(i * total + col));
        col += c;
    }
    return finish<Real>(std::move(out), std::move(inputs), [m, total](Node<Real>& self) {
        std::size_t col = 0;
        for (auto& p : self.parents) {
            const std::size_t c = p->cols;
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < c; ++j) p->grad[i * c + j] += self.grad[i * total + col + j];
            }
            col += c;
        }
    }, "concat_cols");
}

template <typename Real>
Tensor<Real> slice_rows(const Tensor<Real>& x, std::size_t start, std::size_t count) {
    const auto& X = node_of(x, "slice_rows");
    if (start + count > X.rows) throw TensorError(TensorErrc::IndexOutOfRange, "slice_rows: range exceeds rows");
    const std::size_t n = X.cols;
    auto out = make_node<Real>(count, n);
    std::copy_n(X.value.begin() + static_cast<std::ptrdiff_t>(start * n), count * n, out->value.begin());
    return finish<Real>(std::move(out), {x.ptr()}, [start, n](Node<Real>& self) {
        auto& X = *self.parents[0];
        X.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) X.grad[start * n + i] += self.grad[i];
    }, "slice_rows");
}

template <typename Real>
Tensor<Real> slice_cols(const Tensor<Real>& x, std::size_t start, std::size_t count) {
    const auto& X = node_of(x, "slice_cols");
    if (count == 0 || start + count > X.cols) throw TensorError(TensorErrc::IndexOutOfRange, "slice_cols: range exceeds cols");
    const std::size_t m = X.rows, n = X.cols;
    auto out = make_node<Real>(m, count);
    for (std::size_t i = 0; i < m; ++i)
        std::copy_n(X.value.begin() + static_cast<std::ptrdiff_t>(i * n + start), count,
                    out->value.begin() + static_cast<std::ptrdiff_t>(i * count));
    return finish<Real>(std::move(out), {x.ptr()}, [m, n, start, count](Node<Real>& self) {
        auto& X = *self.parents[0];
        X.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < count; ++j) X.grad[i * n + start + j] += self.grad[i * count + j];
    }, "slice_cols");
}

template <typename Real>
Tensor<Real> gather_rows(const Tensor<Real>& table, std::span<const std::size_t> idx) {
    const auto& T = node_of(table, "gather_rows");
    const std::size_t n = T.cols;
    std::vector<std::size_t> rows(idx.begin(), idx.end());
    for (auto r : rows) {
        if (r >= T.rows) {
            throw TensorError(TensorErrc::IndexOutOfRange,
                              "gather_rows: index " + std::to_string(r) + " >= " + std::to_string(T.rows), r);
        }
    }
    auto out = make_node<Real>(rows.size(), n);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(T.value.begin() + static_cast<std::ptrdiff_t>(rows[i] * n), n,
                    out->value.begin() + static_cast<std::ptrdiff_t>(i * n));
    return finish<Real>(std::move(out), {table.ptr()}, [n, rows = std::move(rows)](Node<Real>& self) {
        auto& T = *self.parents[0];
        T.ensure_grad();
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < n; ++j) T.grad[rows[i] * n + j] += self.grad[i * n + j];
    }, "gather_rows");
}

template <typename Real>
Tensor<Real> mean_rows(const Tensor<Real>& x) {
    const auto& X = node_of(x, "mean_rows");
    const std::size_t m = X.rows, n = X.cols;
    if (m == 0) shape_error("mean_rows", "no rows");
    auto out = make_node<Real>(1, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out->value[j] += X.value[i * n + j];
    for (auto& v : out->value) v /= static_cast<Real>(m);
    return finish<Real>(std::move(out), {x.ptr()}, [m, n](Node<Real>& self) {
        auto& X = *self.parents[0];
        X.ensure_grad();
        const Real inv = Real(1) / static_cast<Real>(m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) X.grad[i * n + j] += self.grad[j] * inv;
    }, "mean_rows");
}

template <typename Real>
Tensor<Real> mean_of(const std::vector<Tensor<Real>>& xs) {
    if (xs.empty()) shape_error("mean_of", "no inputs");
    const auto& F = node_of(xs.front(), "mean_of");
    std::vector<std::shared_ptr<Node<Real>>> inputs;
    for (const auto& x : xs) {
        require_same_shape(F, node_of(x, "mean_of"), "mean_of");
        inputs.push_back(x.ptr());
    }
    if (xs.size() == 1) return xs.front();
    auto out = make_node<Real>(F.rows, F.cols, F.rank);
    const Real inv = Real(1) / static_cast<Real>(xs.size());
    for (const auto& x : xs)
        for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] += x.data()[i];
    for (auto& v : out->value) v *= inv;
    return finish<Real>(std::move(out), std::move(inputs), [inv](Node<Real>& self) {
        for (auto& p : self.parents) {
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] * inv;
        }
    }, "mean_of");
}

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& x) {
    const auto& X = node_of(x, "sum");
    auto out = make_node<Real>(1, 1, 1);
    for (Real v : X.value) out->value[0] += v;
    return finish<Real>(std::move(out), {x.ptr()}, [](Node<Real>& self) {
        auto& X = *self.parents[0];
        X.ensure_grad();
        for (auto& g : X.grad) g += self.grad[0];
    }, "sum");
}

template <typename Real>
Tensor<Real> bce_loss(const Tensor<Real>& probs, std::span<const Real> targets, Real eps, std::span<const Real> weights) {
    const auto& P = node_of(probs, "bce_loss");
    const std::size_t b = P.value.size();
    if (targets.size() != b) shape_error("bce_loss", "target count != prediction count");
    if (!weights.empty() && weights.size() != b) shape_error("bce_loss", "weight count != prediction count");
    std::vector<Real> y(targets.begin(), targets.end());
    std::vector<Real> w(b, Real(1));
    if (!weights.empty()) w.assign(weights.begin(), weights.end());
    auto out = make_node<Real>(1, 1, 1);
    Real total = 0;
    for (std::size_t i = 0; i < b; ++i) {
        const Real c = std::clamp(P.value[i], eps, Real(1) - eps);
        total -= w[i] * (y[i] * std::log(c) + (Real(1) - y[i]) * std::log(Real(1) - c));
    }
    out->value[0] = total / static_cast<Real>(b);
    return finish<Real>(std::move(out), {probs.ptr()}, [b, eps, y = std::move(y), w = std::move(w)](Node<Real>& self) {
        auto& P = *self.parents[0];
        P.ensure_grad();
        for (std::size_t i = 0; i < b; ++i) {
            const Real p = P.value[i];
            if (p < eps || p > Real(1) - eps) continue;  // clamp is flat outside
            P.grad[i] += self.grad[0] * w[i] * (p - y[i]) / (p * (Real(1) - p)) / static_cast<Real>(b);
        }
    }, "bce_loss");
}

// ---- differentiation --------------------------------------------------------

template <typename Real>
void backward(const Tensor<Real>& loss) {
    if (!loss.defined() || loss.size() != 1) throw TensorError(TensorErrc::NotScalar, "backward: loss must be a scalar");
    if (!loss.requires_grad()) return;

    std::vector<Node<Real>*> order;
    std::unordered_set<Node<Real>*> seen;
    std::vector<Node<Real>*> stack{loss.node()};
    seen.insert(loss.node());
    while (!stack.empty()) {
        Node<Real>* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
        }
    }
    std::sort(order.begin(), order.end(), [](const Node<Real>* a, const Node<Real>* b) { return a->seq > b->seq; });

    loss.node()->ensure_grad();
    loss.node()->grad[0] += Real(1);
    for (Node<Real>* n : order) {
        if (!n->backward) continue;
        if (!n->grad.empty()) n->backward(*n);
        // Interior buffers are consumed; a second backward over the same
        // graph must not see stale gradients.
        std::vector<Real>().swap(n->grad);
    }
    for (Node<Real>* n : order) {
        if (n->backward) continue;
        for (Real g : n->grad) {
            if (!std::isfinite(g)) throw TensorError(TensorErrc::NonFiniteGradient, "backward: non-finite gradient");
        }
    }
}

template <typename Real>
GradCheckResult grad_check(const std::function<Tensor<Real>()>& f, const std::vector<Tensor<Real>>& params, double eps) {
    std::vector<Tensor<Real>> ps = params;
    for (auto& p : ps) p.zero_grad();
    {
        auto loss = f();
        if (loss.size() != 1) throw TensorError(TensorErrc::NotScalar, "grad_check: f must return a scalar");
        backward(loss);
    }
    GradCheckResult result;
    for (std::size_t pi = 0; pi < ps.size(); ++pi) {
        auto& p = ps[pi];
        std::vector<Real> analytic(p.size(), Real(0));
        if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
        auto values = p.data();
        for (std::size_t e = 0; e < values.size(); ++e) {
            const Real orig = values[e];
            double plus = 0, minus = 0;
            {
                NoGradGuard guard;
                values[e] = static_cast<Real>(orig + eps);
                plus = static_cast<double>(f().item());
                values[e] = static_cast<Real>(orig - eps);
                minus = static_cast<double>(f().item());
            }
            values[e] = orig;
            const double numeric = (plus - minus) / (2.0 * eps);
            const double a = static_cast<double>(analytic[e]);
            const double abs_err = std::abs(a - numeric);
            const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
            result.max_abs_error = std::max(result.max_abs_error, abs_err);
            if (rel > result.max_rel_error || result.checked == 0) {
                result.max_rel_error = std::max(result.max_rel_error, rel);
                result.param_index = pi;
                result.entry = e;
            }
            ++result.checked;
        }
    }
    return result;
}

// ---- instantiation ------------------------------------------------------------

#define HETFORMER_INSTANTIATE(R)                                                                              \
    template class Tensor<R>;                                                                                 \
    template Tensor<R> matmul(const Tensor<R>&, const Tensor<R>&);                                            \
    template Tensor<R> matmul_nt(const Tensor<R>&, const Tensor<R>&);                                         \
    template Tensor<R> transpose(const Tensor<R>&);                                                           \
    template Tensor<R> add(const Tensor<R>&, const Tensor<R>&);                                               \
    template Tensor<R> sub(const Tensor<R>&, const Tensor<R>&);                                               \
    template Tensor<R> mul(const Tensor<R>&, const Tensor<R>&);                                               \
    template Tensor<R> add_row(const Tensor<R>&, const Tensor<R>&);                                           \
    template Tensor<R> scale(const Tensor<R>&, R);                                                            \
    template Tensor<R> relu(const Tensor<R>&);                                                                \
    template Tensor<R> sigmoid(const Tensor<R>&);                                                             \
    template Tensor<R> dropout(const Tensor<R>&, R, bool, std::mt19937_64&);                                  \
    template Tensor<R> layer_norm(const Tensor<R>&, const Tensor<R>&, const Tensor<R>&, R);                   \
    template Tensor<R> softmax_rows(const Tensor<R>&, std::span<const char>);                                 \
    template Tensor<R> concat_rows(const std::vector<Tensor<R>>&);                                            \
    template Tensor<R> concat_cols(const std::vector<Tensor<R>>&);                                            \
    template Tensor<R> slice_rows(const Tensor<R>&, std::size_t, std::size_t);                                \
    template Tensor<R> slice_cols(const Tensor<R>&, std::size_t, std::size_t);                                \
    template Tensor<R> gather_rows(const Tensor<R>&, std::span<const std::size_t>);                           \
    template Tensor<R> mean_rows(const Tensor<R>&);                                                           \
    template Tensor<R> mean_of(const std::vector<Tensor<R>>&);                                                \
    template Tensor<R> sum(const Tensor<R>&);                                                                 \
    template Tensor<R> bce_loss(const Tensor<R>&, std::span<const R>, R, std::span<const R>);                 \
    template void backward(const Tensor<R>&);                                                                 \
    template GradCheckResult grad_check(const std::function<Tensor<R>()>&, const std::vector<Tensor<R>>&, double);

HETFORMER_INSTANTIATE(float)
HETFORMER_INSTANTIATE(double)

#undef HETFORMER_INSTANTIATE

}  // namespace hetformer::tensor
