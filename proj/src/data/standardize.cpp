#include <cmath>

#include "tablab/data.hpp"
#include "tablab/kernels.hpp"

namespace tablab::data {

double Standardizer::apply_cell(std::size_t j, double v) const {
    const auto& a = per_feature[j];
    if (!a) return v;
    return (v - a->mean) / a->std;
}

double Standardizer::invert_cell(std::size_t j, double v) const {
    const auto& a = per_feature[j];
    if (!a) return v;
    return v * a->std + a->mean;
}

Standardizer fit_standardizer(const Dataset& ds) {
    if (ds.n == 0) throw StageError("fit_standardizer: empty dataset");
    Standardizer st;
    st.per_feature.resize(ds.schema.d());
    for (std::size_t j = 0; j < ds.schema.d(); ++j) {
        if (!ds.schema.features[j].kind.is_numeric()) continue;
        std::vector<double> col = ds.column(j);
        const double mean = kern::sum(col.data(), col.size()) / static_cast<double>(col.size());
        for (double& v : col) v -= mean;
        const double var = kern::dot(col.data(), col.data(), col.size()) / static_cast<double>(col.size());
        Affine a;
        a.mean = mean;
        a.std = std::max(std::sqrt(var), 1e-12);  // population std
        st.per_feature[j] = a;
    }
    return st;
}

Dataset apply_standardizer(const Dataset& ds, const Standardizer& st) {
    if (st.per_feature.size() != ds.schema.d()) throw ConfigError("standardizer/schema width mismatch");
    Dataset out = ds;
    const std::size_t d = ds.schema.d();
    for (std::size_t j = 0; j < d; ++j) {
        if (!st.per_feature[j]) continue;
        for (std::size_t i = 0; i < ds.n; ++i) out.cells[i * d + j] = st.apply_cell(j, ds.cells[i * d + j]);
    }
    return out;
}

Dataset invert_standardizer(const Dataset& ds, const Standardizer& st) {
    if (st.per_feature.size() != ds.schema.d()) throw ConfigError("standardizer/schema width mismatch");
    Dataset out = ds;
    const std::size_t d = ds.schema.d();
    for (std::size_t j = 0; j < d; ++j) {
        if (!st.per_feature[j]) continue;
        for (std::size_t i = 0; i < ds.n; ++i) out.cells[i * d + j] = st.invert_cell(j, ds.cells[i * d + j]);
    }
    return out;
}

std::pair<Dataset, Standardizer> standardize(const Dataset& ds) {
    Standardizer st = fit_standardizer(ds);
    return {apply_standardizer(ds, st), std::move(st)};
}

}  // namespace tablab::data
