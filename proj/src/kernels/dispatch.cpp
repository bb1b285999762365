#include "tablab/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace tablab::kern {

namespace {

Backend g_backend = Backend::Auto;
const Ops* g_ops = nullptr;

const Ops* probe(Backend b) {
    switch (b) {
        case Backend::Scalar: return &detail::scalar_ops();
        case Backend::Avx2: return detail::avx2_ops();
        case Backend::Neon: return detail::neon_ops();
        case Backend::Auto:
            if (const Ops* o = detail::avx2_ops()) return o;
            if (const Ops* o = detail::neon_ops()) return o;
            return &detail::scalar_ops();
    }
    return &detail::scalar_ops();
}

Backend env_backend() {
    const char* e = std::getenv("TABLAB_KERNELS");
    if (!e) return Backend::Auto;
    if (std::strcmp(e, "scalar") == 0) return Backend::Scalar;
    if (std::strcmp(e, "avx2") == 0) return Backend::Avx2;
    if (std::strcmp(e, "neon") == 0) return Backend::Neon;
    return Backend::Auto;
}

const Ops& ops() {
    if (!g_ops) {
        g_backend = env_backend();
        g_ops = probe(g_backend);
        if (!g_ops) {
            g_backend = Backend::Scalar;
            g_ops = &detail::scalar_ops();
        }
    }
    return *g_ops;
}

}  // namespace

Backend active_backend() {
    ops();
    if (g_backend != Backend::Auto) return g_backend;
    if (g_ops == detail::avx2_ops()) return Backend::Avx2;
    if (g_ops == detail::neon_ops()) return Backend::Neon;
    return Backend::Scalar;
}

void set_backend(Backend b) {
    const Ops* o = probe(b);
    if (!o) throw std::runtime_error("kernel backend not available on this machine");
    g_backend = b;
    g_ops = o;
}

bool backend_available(Backend b) { return probe(b) != nullptr; }

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::Auto: return "auto";
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
        case Backend::Neon: return "neon";
    }
    return "?";
}

double dot(const double* x, const double* y, std::size_t n) { return ops().dot(x, y, n); }
double sum(const double* x, std::size_t n) { return ops().sum(x, n); }
double sum_abs(const double* x, std::size_t n) { return ops().sum_abs(x, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { ops().axpy(a, x, y, n); }
void scale(double a, double* x, std::size_t n) { ops().scale(a, x, n); }
void vadd(const double* x, double* y, std::size_t n) { ops().vadd(x, y, n); }
void vmul(const double* x, double* y, std::size_t n) { ops().vmul(x, y, n); }

void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    ops().gemm_nn(a, b, c, m, k, n);
}
void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    ops().gemm_nt(a, b, c, m, k, n);
}
void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    ops().gemm_tn(a, b, c, m, k, n);
}
void matvec(const double* a, const double* x, double* y,
            std::size_t m, std::size_t n) {
    ops().matvec(a, x, y, m, n);
}

}  // namespace tablab::kern
