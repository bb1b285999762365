#pragma once

#include <cstddef>

// Dense f64 kernels with runtime backend selection (scalar / AVX2 / NEON).
//
// Every kernel has a pinned accumulation order so all backends produce
// bit-identical results:
//   * reductions (dot, sum, sum_abs) accumulate into 4 independent lanes,
//     lane j takes elements j, j+4, j+8, ...; lanes combine as
//     (l0+l2)+(l1+l3); the tail (< 4 elements) is added sequentially last.
//   * gemm_nn / gemm_tn accumulate each output element in ascending-k order.
//   * no FMA anywhere: each multiply and add rounds separately.
// The equivalence test suite asserts bitwise equality across backends.

namespace tablab::kern {

enum class Backend { Auto, Scalar, Avx2, Neon };

Backend active_backend();
void set_backend(Backend b);  // Auto re-probes the CPU
const char* backend_name(Backend b);
bool backend_available(Backend b);

double dot(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double sum_abs(const double* x, std::size_t n);

void axpy(double a, const double* x, double* y, std::size_t n);      // y += a*x
void scale(double a, double* x, std::size_t n);                      // x *= a
void vadd(const double* x, double* y, std::size_t n);                // y += x
void vmul(const double* x, double* y, std::size_t n);                // y *= x

// row-major, all accumulate into C
void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);           // C(m,n) += A(m,k)*B(k,n)
void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);           // C(m,n) += A(m,k)*B(n,k)^T
void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);           // C(m,n) += A(k,m)^T*B(k,n)

void matvec(const double* a, const double* x, double* y,
            std::size_t m, std::size_t n);                           // y = A(m,n)*x

struct Ops {
    double (*dot)(const double*, const double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    double (*sum_abs)(const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale)(double, double*, std::size_t);
    void (*vadd)(const double*, double*, std::size_t);
    void (*vmul)(const double*, double*, std::size_t);
    void (*gemm_nn)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);
    void (*gemm_nt)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);
    void (*gemm_tn)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);
    void (*matvec)(const double*, const double*, double*, std::size_t, std::size_t);
};

namespace detail {
const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when not compiled in or CPU lacks AVX2
const Ops* neon_ops();  // nullptr off aarch64
}  // namespace detail

}  // namespace tablab::kern
