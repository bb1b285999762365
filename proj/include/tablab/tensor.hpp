#pragma once

#include <cstddef>
#include <vector>

#include "tablab/errors.hpp"

namespace tablab::nn {

// row-major, 64-bit floats
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) { reset(std::move(s)); }

    static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

    void reset(std::vector<std::size_t> s) {
        shape = std::move(s);
        v.assign(count(shape), 0.0);
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t c = 1;
        for (const auto d : s) c *= d;
        return c;
    }

    std::size_t size() const { return v.size(); }
    double* data() { return v.data(); }
    const double* data() const { return v.data(); }
    void fill(double x) { std::fill(v.begin(), v.end(), x); }

    std::size_t dim(std::size_t i) const { return shape.at(i); }
};

}  // namespace tablab::nn
