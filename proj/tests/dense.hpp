#pragma once

#include <cmath>
#include <vector>

#include "hetformer/tensor.hpp"

// Plain nested-loop linear algebra, independent of the tensor library, used
// as a reference implementation in the model tests.
namespace hetformer::testing {

struct Mat {
    std::size_t r = 0, c = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(std::size_t rows, std::size_t cols) : r(rows), c(cols), v(rows * cols, 0.0) {}
    double& operator()(std::size_t i, std::size_t j) { return v[i * c + j]; }
    double operator()(std::size_t i, std::size_t j) const { return v[i * c + j]; }
};

inline Mat from_tensor(const tensor::Tensor<double>& t) {
    Mat m(t.rows(), t.cols());
    for (std::size_t i = 0; i < t.size(); ++i) m.v[i] = t.data()[i];
    return m;
}

inline Mat mm(const Mat& a, const Mat& b) {
    Mat out(a.r, b.c);
    for (std::size_t i = 0; i < a.r; ++i)
        for (std::size_t j = 0; j < b.c; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.c; ++k) s += a(i, k) * b(k, j);
            out(i, j) = s;
        }
    return out;
}

inline Mat tr(const Mat& a) {
    Mat out(a.c, a.r);
    for (std::size_t i = 0; i < a.r; ++i)
        for (std::size_t j = 0; j < a.c; ++j) out(j, i) = a(i, j);
    return out;
}

inline Mat plus(const Mat& a, const Mat& b) {
    Mat out = a;
    for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] += b.v[i];
    return out;
}

// Adds a 1 x c row to every row.
inline Mat plus_row(const Mat& a, const Mat& row) {
    Mat out = a;
    for (std::size_t i = 0; i < a.r; ++i)
        for (std::size_t j = 0; j < a.c; ++j) out(i, j) += row.v[j];
    return out;
}

inline Mat rows(const Mat& a, std::size_t start, std::size_t n) {
    Mat out(n, a.c);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < a.c; ++j) out(i, j) = a(start + i, j);
    return out;
}

inline Mat cols(const Mat& a, std::size_t start, std::size_t n) {
    Mat out(a.r, n);
    for (std::size_t i = 0; i < a.r; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = a(i, start + j);
    return out;
}

inline Mat softmax(const Mat& a) {
    Mat out = a;
    for (std::size_t i = 0; i < a.r; ++i) {
        double mx = a(i, 0);
        for (std::size_t j = 1; j < a.c; ++j) mx = std::max(mx, a(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < a.c; ++j) z += out(i, j) = std::exp(a(i, j) - mx);
        for (std::size_t j = 0; j < a.c; ++j) out(i, j) /= z;
    }
    return out;
}

inline Mat layer_norm(const Mat& a, const Mat& g, const Mat& b, double eps = 1e-5) {
    Mat out = a;
    for (std::size_t i = 0; i < a.r; ++i) {
        double mean = 0.0, var = 0.0;
        for (std::size_t j = 0; j < a.c; ++j) mean += a(i, j);
        mean /= static_cast<double>(a.c);
        for (std::size_t j = 0; j < a.c; ++j) var += (a(i, j) - mean) * (a(i, j) - mean);
        var /= static_cast<double>(a.c);
        for (std::size_t j = 0; j < a.c; ++j) out(i, j) = (a(i, j) - mean) / std::sqrt(var + eps) * g.v[j] + b.v[j];
    }
    return out;
}

inline Mat relu(const Mat& a) {
    Mat out = a;
    for (auto& x : out.v) x = x > 0.0 ? x : 0.0;
    return out;
}

inline Mat scaled(const Mat& a, double s) {
    Mat out = a;
    for (auto& x : out.v) x *= s;
    return out;
}

inline double max_abs_diff(const Mat& a, const tensor::Tensor<double>& t) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::fabs(a.v[i] - t.data()[i]));
    return m;
}

}  // namespace hetformer::testing
