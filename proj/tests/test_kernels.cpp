#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <vector>

#include "oracles.hpp"
#include "tablab/kernels.hpp"
#include "tablab/rng.hpp"

using namespace tablab;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t stream) {
    rng::Stream s(42, stream);
    std::vector<double> v(n);
    for (auto& x : v) x = s.next_normal() * (1.0 + 10.0 * s.next_uniform());
    return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct BackendGuard {
    ~BackendGuard() { kern::set_backend(kern::Backend::Auto); }
};

}  // namespace

TEST_CASE("dot accumulation order matches the documented 4-lane combine") {
    const std::vector<double> x = {1e16, 1.0, -1e16, 2.0, 5.0};
    const std::vector<double> y = {1.0, 1.0, 1.0, 1.0, 1.0};
    // lanes: l0=1e16, l1=1, l2=-1e16, l3=2 -> (l0+l2)+(l1+l3)=3, tail adds 5
    CHECK(kern::dot(x.data(), y.data(), 5) == 8.0);
}

TEST_CASE("scalar and simd backends produce bit-identical results") {
    BackendGuard guard;
    const bool has_avx2 = kern::backend_available(kern::Backend::Avx2);
    const bool has_neon = kern::backend_available(kern::Backend::Neon);
    if (!has_avx2 && !has_neon) {
        MESSAGE("no SIMD backend on this machine; scalar-only");
        return;
    }
    const kern::Backend simd = has_avx2 ? kern::Backend::Avx2 : kern::Backend::Neon;

    for (std::size_t n : {0, 1, 2, 3, 4, 5, 7, 8, 15, 16, 17, 33, 64, 67, 129}) {
        const auto x = random_vec(n, 1000 + n);
        const auto y = random_vec(n, 2000 + n);

        kern::set_backend(kern::Backend::Scalar);
        const double dot_s = kern::dot(x.data(), y.data(), n);
        const double sum_s = kern::sum(x.data(), n);
        const double abs_s = kern::sum_abs(x.data(), n);
        auto axpy_s = y;
        kern::axpy(1.7, x.data(), axpy_s.data(), n);
        auto scale_s = x;
        kern::scale(-0.3, scale_s.data(), n);
        auto vmul_s = y;
        kern::vmul(x.data(), vmul_s.data(), n);

        kern::set_backend(simd);
        CHECK(kern::dot(x.data(), y.data(), n) == dot_s);
        CHECK(kern::sum(x.data(), n) == sum_s);
        CHECK(kern::sum_abs(x.data(), n) == abs_s);
        auto axpy_v = y;
        kern::axpy(1.7, x.data(), axpy_v.data(), n);
        CHECK(bitwise_equal(axpy_s, axpy_v));
        auto scale_v = x;
        kern::scale(-0.3, scale_v.data(), n);
        CHECK(bitwise_equal(scale_s, scale_v));
        auto vmul_v = y;
        kern::vmul(x.data(), vmul_v.data(), n);
        CHECK(bitwise_equal(vmul_s, vmul_v));
    }
}

TEST_CASE("gemm variants are bit-identical across backends") {
    BackendGuard guard;
    if (!kern::backend_available(kern::Backend::Avx2) &&
        !kern::backend_available(kern::Backend::Neon)) {
        return;
    }
    const kern::Backend simd = kern::backend_available(kern::Backend::Avx2) ? kern::Backend::Avx2
                                                                            : kern::Backend::Neon;
    for (const auto [m, k, n] :
         std::vector<std::array<std::size_t, 3>>{{1, 1, 1}, {3, 5, 7}, {8, 16, 4}, {13, 31, 17}}) {
        const auto a = random_vec(m * k, 31 * m + k);
        const auto b = random_vec(k * n, 17 * k + n);
        const auto bt = random_vec(n * k, 11 * n + k);
        const auto at = random_vec(k * m, 7 * k + m);
        const auto x = random_vec(k, 5 * k + 1);

        kern::set_backend(kern::Backend::Scalar);
        std::vector<double> c_nn(m * n, 0.5), c_nt(m * n, 0.5), c_tn(m * n, 0.5), mv(m);
        kern::gemm_nn(a.data(), b.data(), c_nn.data(), m, k, n);
        kern::gemm_nt(a.data(), bt.data(), c_nt.data(), m, k, n);
        kern::gemm_tn(at.data(), b.data(), c_tn.data(), m, k, n);
        kern::matvec(a.data(), x.data(), mv.data(), m, k);

        kern::set_backend(simd);
        std::vector<double> v_nn(m * n, 0.5), v_nt(m * n, 0.5), v_tn(m * n, 0.5), vv(m);
        kern::gemm_nn(a.data(), b.data(), v_nn.data(), m, k, n);
        kern::gemm_nt(a.data(), bt.data(), v_nt.data(), m, k, n);
        kern::gemm_tn(at.data(), b.data(), v_tn.data(), m, k, n);
        kern::matvec(a.data(), x.data(), vv.data(), m, k);

        CHECK(bitwise_equal(c_nn, v_nn));
        CHECK(bitwise_equal(c_nt, v_nt));
        CHECK(bitwise_equal(c_tn, v_tn));
        CHECK(bitwise_equal(mv, vv));
    }
}

TEST_CASE("gemm_nn agrees with the naive triple loop") {
    const std::size_t m = 9, k = 14, n = 6;
    const auto a = random_vec(m * k, 71);
    const auto b = random_vec(k * n, 72);
    std::vector<double> c(m * n, 0.0);
    kern::gemm_nn(a.data(), b.data(), c.data(), m, k, n);
    const auto ref = oracles::naive_matmul(a, b, m, k, n);
    for (std::size_t i = 0; i < c.size(); ++i)
        CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("matvec matches per-row dot") {
    const std::size_t m = 7, n = 23;
    const auto a = random_vec(m * n, 81);
    const auto x = random_vec(n, 82);
    std::vector<double> y(m);
    kern::matvec(a.data(), x.data(), y.data(), m, n);
    for (std::size_t i = 0; i < m; ++i) CHECK(y[i] == kern::dot(a.data() + i * n, x.data(), n));
}
