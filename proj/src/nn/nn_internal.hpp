#pragma once

#include <cmath>

#include "tablab/kernels.hpp"
#include "tablab/nn.hpp"

// shared pieces of the two architectures

namespace tablab::nn::detail {

// Y(BxO) = X(BxI) * W(IxO) + b; pass b = nullptr for a bias-free projection
inline void linear_forward(const double* x, const Param& w, const Param* b, double* y,
                           std::size_t rows, std::size_t in, std::size_t out) {
    std::fill(y, y + rows * out, 0.0);
    kern::gemm_nn(x, w.value.data(), y, rows, in, out);
    if (b)
        for (std::size_t r = 0; r < rows; ++r) kern::vadd(b->value.data(), y + r * out, out);
}

inline void linear_forward(const double* x, const Param& w, const Param& b, double* y,
                           std::size_t rows, std::size_t in, std::size_t out) {
    linear_forward(x, w, &b, y, rows, in, out);
}

// accumulates dW, db; writes dX when given
inline void linear_backward(const double* x, const double* dy, Param& w, Param* b, double* dx,
                            std::size_t rows, std::size_t in, std::size_t out) {
    kern::gemm_tn(x, dy, w.grad.data(), in, rows, out);
    if (b)
        for (std::size_t r = 0; r < rows; ++r) kern::vadd(dy + r * out, b->grad.data(), out);
    if (dx) {
        std::fill(dx, dx + rows * in, 0.0);
        kern::gemm_nt(dy, w.value.data(), dx, rows, out, in);
    }
}

inline void linear_backward(const double* x, const double* dy, Param& w, Param& b, double* dx,
                            std::size_t rows, std::size_t in, std::size_t out) {
    linear_backward(x, dy, w, &b, dx, rows, in, out);
}

// mean cross-entropy; logits are replaced by softmax probabilities and dlogits
// gets (p - onehot)/rows
inline double softmax_xent(double* logits, double* dlogits, const int* labels, std::size_t rows,
                           std::size_t classes, std::size_t* correct) {
    softmax_rows(logits, rows, classes);
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* p = logits + r * classes;
        const auto y = static_cast<std::size_t>(labels[r]);
        loss -= std::log(std::max(p[y], 1e-300));
        if (correct) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < classes; ++c)
                if (p[c] > p[best]) best = c;
            if (best == y) ++*correct;
        }
        if (dlogits) {
            double* g = dlogits + r * classes;
            for (std::size_t c = 0; c < classes; ++c) g[c] = p[c] * inv;
            g[y] -= inv;
        }
    }
    return loss * inv;
}

inline void check_batch(const Batch& b, std::size_t n_num, std::size_t n_cat) {
    if (b.n_num != n_num || b.n_cat != n_cat) throw ConfigError("batch width does not match model input");
    if (b.rows == 0) throw ConfigError("empty batch");
    for (std::size_t i = 0; i < b.rows * b.n_num; ++i)
        if (!std::isfinite(b.numeric[i])) throw StageError("non-finite input to forward");
}

}  // namespace tablab::nn::detail
