#include <cmath>

#include "tablab/nn.hpp"

namespace tablab::nn {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779399461;  // 1/sqrt(2*pi)
    return cdf + x * pdf;
}

void softmax_rows(double* x, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = x + r * cols;
        double mx = row[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            s += row[c];
        }
        const double inv = 1.0 / s;
        for (std::size_t c = 0; c < cols; ++c) row[c] *= inv;
    }
}

ModelInput make_input(const data::Dataset& ds) {
    ModelInput in;
    in.rows = ds.n;
    const std::size_t d = ds.schema.d();
    for (std::size_t j = 0; j < d; ++j)
        ds.schema.features[j].kind.is_numeric() ? ++in.n_num : ++in.n_cat;
    in.numeric.resize(ds.n * in.n_num);
    in.categorical.resize(ds.n * in.n_cat);
    in.labels = ds.labels;
    for (std::size_t i = 0; i < ds.n; ++i) {
        std::size_t jn = 0, jc = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const double v = ds.at(i, j);
            if (ds.schema.features[j].kind.is_numeric())
                in.numeric[i * in.n_num + jn++] = v;
            else
                in.categorical[i * in.n_cat + jc++] = static_cast<std::int32_t>(v);
        }
    }
    return in;
}

Batch full_batch(const ModelInput& in) {
    return {in.numeric.data(), in.categorical.data(), in.rows, in.n_num, in.n_cat};
}

}  // namespace tablab::nn
