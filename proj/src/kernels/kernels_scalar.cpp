#include "tablab/kernels.hpp"

#include <cmath>

// Reference backend. The 4-lane accumulation mirrors one SIMD register of
// doubles; the vector backends must match these results bit for bit.

namespace tablab::kern::detail {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        l0 += x[i] * y[i];
        l1 += x[i + 1] * y[i + 1];
        l2 += x[i + 2] * y[i + 2];
        l3 += x[i + 3] * y[i + 3];
    }
    double acc = (l0 + l2) + (l1 + l3);
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sum_scalar(const double* x, std::size_t n) {
    double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        l0 += x[i];
        l1 += x[i + 1];
        l2 += x[i + 2];
        l3 += x[i + 3];
    }
    double acc = (l0 + l2) + (l1 + l3);
    for (; i < n; ++i) acc += x[i];
    return acc;
}

double sum_abs_scalar(const double* x, std::size_t n) {
    double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        l0 += std::fabs(x[i]);
        l1 += std::fabs(x[i + 1]);
        l2 += std::fabs(x[i + 2]);
        l3 += std::fabs(x[i + 3]);
    }
    double acc = (l0 + l2) + (l1 + l3);
    for (; i < n; ++i) acc += std::fabs(x[i]);
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void vadd_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void vmul_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] *= x[i];
}

// C[i][j] += sum_l A[i][l]*B[l][j], l ascending per element
void gemm_nn_scalar(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        const double* ai = a + i * k;
        for (std::size_t l = 0; l < k; ++l) {
            const double av = ai[l];
            const double* bl = b + l * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bl[j];
        }
    }
}

void gemm_nt_scalar(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += dot_scalar(ai, b + j * k, k);
    }
}

void gemm_tn_scalar(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t l = 0; l < k; ++l) {
        const double* al = a + l * m;
        const double* bl = b + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = al[i];
            double* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bl[j];
        }
    }
}

void matvec_scalar(const double* a, const double* x, double* y,
                   std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) y[i] = dot_scalar(a + i * n, x, n);
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops = {
        dot_scalar, sum_scalar, sum_abs_scalar,
        axpy_scalar, scale_scalar, vadd_scalar, vmul_scalar,
        gemm_nn_scalar, gemm_nt_scalar, gemm_tn_scalar,
        matvec_scalar,
    };
    return ops;
}

}  // namespace tablab::kern::detail
