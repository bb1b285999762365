#include "tablab/kernels.hpp"

// AVX2 backend. One __m256d holds the 4 accumulation lanes of the reference
// kernels; reductions combine lanes as (l0+l2)+(l1+l3) which is exactly the
// scalar combine order. Multiplies and adds are kept separate (no FMA).

#if defined(__AVX2__)

#include <immintrin.h>

#include <cmath>

namespace tablab::kern::detail {
namespace {

inline double reduce4(__m256d acc) {
    const __m128d lo = _mm256_castpd256_pd128(acc);    // {l0, l1}
    const __m128d hi = _mm256_extractf128_pd(acc, 1);  // {l2, l3}
    const __m128d s = _mm_add_pd(lo, hi);              // {l0+l2, l1+l3}
    const __m128d h = _mm_hadd_pd(s, s);
    return _mm_cvtsd_f64(h);
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d xv = _mm256_loadu_pd(x + i);
        const __m256d yv = _mm256_loadu_pd(y + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(xv, yv));
    }
    double r = reduce4(acc);
    for (; i < n; ++i) r += x[i] * y[i];
    return r;
}

double sum_avx2(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double r = reduce4(acc);
    for (; i < n; ++i) r += x[i];
    return r;
}

double sum_abs_avx2(const double* x, std::size_t n) {
    const __m256d sign = _mm256_set1_pd(-0.0);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, _mm256_andnot_pd(sign, _mm256_loadu_pd(x + i)));
    double r = reduce4(acc);
    for (; i < n; ++i) r += std::fabs(x[i]);
    return r;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d yv = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(yv, _mm256_mul_pd(av, _mm256_loadu_pd(x + i))));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double a, double* x, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void vadd_avx2(const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

void vmul_avx2(const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] *= x[i];
}

// j-vectorized; each C[i][j] still accumulates in ascending-l order
void gemm_nn_avx2(const double* a, const double* b, double* c,
                  std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        const double* ai = a + i * k;
        for (std::size_t l = 0; l < k; ++l) {
            const __m256d av = _mm256_set1_pd(ai[l]);
            const double* bl = b + l * n;
            std::size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                const __m256d cv = _mm256_loadu_pd(ci + j);
                _mm256_storeu_pd(ci + j, _mm256_add_pd(cv, _mm256_mul_pd(av, _mm256_loadu_pd(bl + j))));
            }
            const double as = ai[l];
            for (; j < n; ++j) ci[j] += as * bl[j];
        }
    }
}

void gemm_nt_avx2(const double* a, const double* b, double* c,
                  std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += dot_avx2(ai, b + j * k, k);
    }
}

void gemm_tn_avx2(const double* a, const double* b, double* c,
                  std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t l = 0; l < k; ++l) {
        const double* al = a + l * m;
        const double* bl = b + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            const __m256d av = _mm256_set1_pd(al[i]);
            double* ci = c + i * n;
            std::size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                const __m256d cv = _mm256_loadu_pd(ci + j);
                _mm256_storeu_pd(ci + j, _mm256_add_pd(cv, _mm256_mul_pd(av, _mm256_loadu_pd(bl + j))));
            }
            const double as = al[i];
            for (; j < n; ++j) ci[j] += as * bl[j];
        }
    }
}

void matvec_avx2(const double* a, const double* x, double* y,
                 std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) y[i] = dot_avx2(a + i * n, x, n);
}

}  // namespace

const Ops* avx2_ops() {
#if defined(__GNUC__) || defined(__clang__)
    if (!__builtin_cpu_supports("avx2")) return nullptr;
#endif
    static const Ops ops = {
        dot_avx2, sum_avx2, sum_abs_avx2,
        axpy_avx2, scale_avx2, vadd_avx2, vmul_avx2,
        gemm_nn_avx2, gemm_nt_avx2, gemm_tn_avx2,
        matvec_avx2,
    };
    return &ops;
}

}  // namespace tablab::kern::detail

#else

namespace tablab::kern::detail {
const Ops* avx2_ops() { return nullptr; }
}  // namespace tablab::kern::detail

#endif
