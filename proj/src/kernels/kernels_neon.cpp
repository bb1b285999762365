#include "tablab/kernels.hpp"

// NEON backend (aarch64, 2 doubles per register). Two registers model the
// 4 accumulation lanes: acc01 holds lanes {0,1}, acc23 holds {2,3}.
// acc01+acc23 = {l0+l2, l1+l3}, then the pairwise add gives the reference
// combine (l0+l2)+(l1+l3). vmulq/vaddq are used instead of vfmaq so every
// operation rounds like the scalar backend.

#if defined(__aarch64__) && defined(__ARM_NEON)

#include <arm_neon.h>

#include <cmath>

namespace tablab::kern::detail {
namespace {

inline double reduce4(float64x2_t acc01, float64x2_t acc23) {
    return vpaddd_f64(vaddq_f64(acc01, acc23));
}

double dot_neon(const double* x, const double* y, std::size_t n) {
    float64x2_t acc01 = vdupq_n_f64(0.0), acc23 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
        acc23 = vaddq_f64(acc23, vmulq_f64(vld1q_f64(x + i + 2), vld1q_f64(y + i + 2)));
    }
    double r = reduce4(acc01, acc23);
    for (; i < n; ++i) r += x[i] * y[i];
    return r;
}

double sum_neon(const double* x, std::size_t n) {
    float64x2_t acc01 = vdupq_n_f64(0.0), acc23 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc01 = vaddq_f64(acc01, vld1q_f64(x + i));
        acc23 = vaddq_f64(acc23, vld1q_f64(x + i + 2));
    }
    double r = reduce4(acc01, acc23);
    for (; i < n; ++i) r += x[i];
    return r;
}

double sum_abs_neon(const double* x, std::size_t n) {
    float64x2_t acc01 = vdupq_n_f64(0.0), acc23 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc01 = vaddq_f64(acc01, vabsq_f64(vld1q_f64(x + i)));
        acc23 = vaddq_f64(acc23, vabsq_f64(vld1q_f64(x + i + 2)));
    }
    double r = reduce4(acc01, acc23);
    for (; i < n; ++i) r += std::fabs(x[i]);
    return r;
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t av = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(av, vld1q_f64(x + i))));
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale_neon(double a, double* x, std::size_t n) {
    const float64x2_t av = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(av, vld1q_f64(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void vadd_neon(const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

void vmul_neon(const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vmulq_f64(vld1q_f64(y + i), vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] *= x[i];
}

void gemm_nn_neon(const double* a, const double* b, double* c,
                  std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        const double* ai = a + i * k;
        for (std::size_t l = 0; l < k; ++l) {
            const float64x2_t av = vdupq_n_f64(ai[l]);
            const double* bl = b + l * n;
            std::size_t j = 0;
            for (; j + 2 <= n; j += 2) {
                const float64x2_t cv = vld1q_f64(ci + j);
                vst1q_f64(ci + j, vaddq_f64(cv, vmulq_f64(av, vld1q_f64(bl + j))));
            }
            for (; j < n; ++j) ci[j] += ai[l] * bl[j];
        }
    }
}

void gemm_nt_neon(const double* a, const double* b, double* c,
                  std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += dot_neon(ai, b + j * k, k);
    }
}

void gemm_tn_neon(const double* a, const double* b, double* c,
                  std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t l = 0; l < k; ++l) {
        const double* al = a + l * m;
        const double* bl = b + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            const float64x2_t av = vdupq_n_f64(al[i]);
            double* ci = c + i * n;
            std::size_t j = 0;
            for (; j + 2 <= n; j += 2) {
                const float64x2_t cv = vld1q_f64(ci + j);
                vst1q_f64(ci + j, vaddq_f64(cv, vmulq_f64(av, vld1q_f64(bl + j))));
            }
            for (; j < n; ++j) ci[j] += al[i] * bl[j];
        }
    }
}

void matvec_neon(const double* a, const double* x, double* y,
                 std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) y[i] = dot_neon(a + i * n, x, n);
}

}  // namespace

const Ops* neon_ops() {
    static const Ops ops = {
        dot_neon, sum_neon, sum_abs_neon,
        axpy_neon, scale_neon, vadd_neon, vmul_neon,
        gemm_nn_neon, gemm_nt_neon, gemm_tn_neon,
        matvec_neon,
    };
    return &ops;
}

}  // namespace tablab::kern::detail

#else

namespace tablab::kern::detail {
const Ops* neon_ops() { return nullptr; }
}  // namespace tablab::kern::detail

#endif
