#pragma once

#include <cstddef>
#include <vector>

#include "tablab/data.hpp"
#include "tablab/nn.hpp"

// Independent test oracles. Everything here recomputes results by a route
// the library does not share: plain sequential loops, dense eigensolve,
// brute-force counting.

namespace oracles {

// sequential-order matmul, no blocking: C = A(m,k) * B(k,n)
std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                 std::size_t m, std::size_t k, std::size_t n);

// cyclic Jacobi eigensolver for a symmetric matrix; returns the eigenvector
// of the largest eigenvalue
std::vector<double> jacobi_top_eigenvector(std::vector<double> sym, std::size_t n);

// straight-line recomputation of a model forward pass from its parameter
// tensors (plain loops); returns latents at the tap
std::vector<double> recompute_latents(const tablab::nn::Model& model,
                                      const tablab::nn::Batch& batch);

// central finite differences of the mean cross-entropy loss
struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t checked = 0;
};
GradCheckResult finite_difference_check(tablab::nn::Model& model, const tablab::nn::Batch& batch,
                                        const std::vector<int>& labels, double h = 1e-5,
                                        std::size_t stride = 1);

// two-sample Kolmogorov-Smirnov statistic
double ks_statistic(std::vector<double> a, std::vector<double> b);

// exact frequency count mode at fixed rounding precision
double brute_force_mode(const std::vector<double>& col, double precision);

}  // namespace oracles
