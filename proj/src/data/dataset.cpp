#include "tablab/data.hpp"

#include <cmath>
#include <unordered_set>

namespace tablab::data {

FeatureKind FeatureKind::categorical(std::size_t card) {
    if (card < 2) throw ConfigError("categorical cardinality must be >= 2");
    return {FeatureType::Categorical, card};
}

std::size_t Schema::num_numeric() const {
    std::size_t c = 0;
    for (const auto& f : features)
        if (f.kind.is_numeric()) ++c;
    return c;
}

void Schema::validate() const {
    std::unordered_set<std::string> names;
    for (const auto& f : features) {
        if (!names.insert(f.name).second)
            throw ConfigError("duplicate feature name: " + f.name);
        if (!f.kind.is_numeric()) {
            if (f.kind.cardinality < 2)
                throw ConfigError("categorical cardinality must be >= 2: " + f.name);
            if (!f.categories.empty() && f.categories.size() > f.kind.cardinality)
                throw ConfigError("more category names than cardinality: " + f.name);
        }
    }
    if (label_classes < 1) throw ConfigError("label_classes must be positive");
}

std::vector<double> Dataset::column(std::size_t j) const {
    std::vector<double> out(n);
    const std::size_t d = schema.d();
    for (std::size_t i = 0; i < n; ++i) out[i] = cells[i * d + j];
    return out;
}

void Dataset::validate() const {
    schema.validate();
    const std::size_t d = schema.d();
    if (cells.size() != n * d) throw ConfigError("cell count mismatch");
    if (labels.size() != n) throw ConfigError("label count mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= schema.label_classes)
            throw ConfigError("label out of range at row " + std::to_string(i));
        for (std::size_t j = 0; j < d; ++j) {
            const double v = cells[i * d + j];
            const auto& kind = schema.features[j].kind;
            if (!std::isfinite(v)) throw ConfigError("non-finite cell at row " + std::to_string(i));
            if (!kind.is_numeric()) {
                if (v != std::floor(v) || v < 0 || v >= static_cast<double>(kind.cardinality))
                    throw ConfigError("categorical index out of range at row " + std::to_string(i) +
                                      ", feature " + schema.features[j].name);
            }
        }
    }
}

Dataset Dataset::select(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.schema = schema;
    out.n = rows.size();
    const std::size_t d = schema.d();
    out.cells.resize(rows.size() * d);
    out.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t r = rows[i];
        std::copy(cells.begin() + r * d, cells.begin() + (r + 1) * d, out.cells.begin() + i * d);
        out.labels[i] = labels[r];
    }
    return out;
}

std::vector<std::size_t> category_counts(const Dataset& ds, std::size_t j) {
    const auto& kind = ds.schema.features[j].kind;
    if (kind.is_numeric()) throw ConfigError("category_counts on numeric feature");
    std::vector<std::size_t> counts(kind.cardinality, 0);
    const std::size_t d = ds.schema.d();
    for (std::size_t i = 0; i < ds.n; ++i)
        counts[static_cast<std::size_t>(ds.cells[i * d + j])]++;
    return counts;
}

std::vector<double> one_hot_expand(const Dataset& ds, std::size_t j) {
    const auto& kind = ds.schema.features[j].kind;
    if (kind.is_numeric()) throw ConfigError("one_hot_expand on numeric feature");
    std::vector<double> out(ds.n * kind.cardinality, 0.0);
    const std::size_t d = ds.schema.d();
    for (std::size_t i = 0; i < ds.n; ++i)
        out[i * kind.cardinality + static_cast<std::size_t>(ds.cells[i * d + j])] = 1.0;
    return out;
}

}  // namespace tablab::data
