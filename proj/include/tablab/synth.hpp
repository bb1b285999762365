#pragma once

#include <cstdint>
#include <vector>

#include "tablab/data.hpp"

namespace tablab::synth {

// Synthetic binary-classification table: d i.i.d. standard-normal features
// with identical marginals, labels from a logistic teacher whose weights fix
// an unambiguous importance order. Generation is counter-RNG per row, so the
// output is independent of any parallel chunking.
struct SynthConfig {
    std::size_t n = 100000;
    std::size_t d = 10;
    std::vector<double> importance_weights;  // strictly descending positive; default 0.8^j
    double noise_scale = 0.1;                // scale of the gaussian noise inside the sigmoid
    std::uint64_t seed = 1;

    void validate() const;
    std::vector<double> effective_weights() const;
};

data::Dataset generate(const SynthConfig& cfg);

// P(y=1|x) of the generating teacher, marginalized over the label noise
// (quadrature); used by tests to bound achievable accuracy.
double teacher_posterior(const SynthConfig& cfg, const double* row);
double bayes_accuracy(const SynthConfig& cfg, const data::Dataset& ds);

}  // namespace tablab::synth
