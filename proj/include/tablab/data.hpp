#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tablab/errors.hpp"

namespace tablab::data {

enum class FeatureType { Numeric, Categorical };

struct FeatureKind {
    FeatureType type = FeatureType::Numeric;
    std::size_t cardinality = 0;  // categorical only, >= 2

    static FeatureKind numeric() { return {FeatureType::Numeric, 0}; }
    static FeatureKind categorical(std::size_t card);

    bool is_numeric() const { return type == FeatureType::Numeric; }
    bool operator==(const FeatureKind&) const = default;
};

struct Schema {
    struct Feature {
        std::string name;
        FeatureKind kind;
        // categorical value names in index order; populated by the loader
        // or generator so a dataset round-trips through CSV
        std::vector<std::string> categories;
        bool operator==(const Feature&) const = default;
    };

    std::vector<Feature> features;
    std::size_t label_classes = 2;

    std::size_t d() const { return features.size(); }
    std::size_t num_numeric() const;
    void validate() const;  // throws ConfigError
    bool operator==(const Schema&) const = default;
};

// Rows are stored column-major is tempting for stats, but row-major keeps
// poisoning/replacement semantics simple; cells are double (numeric value or
// categorical index).
struct Dataset {
    Schema schema;
    std::vector<double> cells;   // n * d, row-major
    std::vector<int> labels;     // n

    std::size_t n = 0;

    double at(std::size_t row, std::size_t col) const { return cells[row * schema.d() + col]; }
    double& at(std::size_t row, std::size_t col) { return cells[row * schema.d() + col]; }

    std::vector<double> column(std::size_t j) const;
    void validate() const;  // checks every invariant, throws ConfigError

    // row-subset copy, preserving order of `rows`
    Dataset select(const std::vector<std::size_t>& rows) const;

    bool operator==(const Dataset&) const = default;
};

struct FeatureSupport {
    std::size_t feature = 0;
    double min = 0, max = 0, mean = 0, median = 0, mode = 0;
    std::size_t distinct_count = 0;
    std::vector<double> hist_edges;   // 101 edges for 100 bins (histogram path only)
    std::vector<std::size_t> hist_counts;
};

struct SplitIndices {
    std::vector<std::size_t> train, validation, test;
};

struct CsvOptions {
    char delimiter = ',';
    bool has_header = true;
    std::string label_column = "label";
};

// --- ingestion ---------------------------------------------------------

Dataset load_csv(const std::string& path, const Schema& schema, const CsvOptions& opt = {});
void save_csv(const Dataset& ds, const std::string& path, const CsvOptions& opt = {});

Schema load_schema(const std::string& path);         // JSON sidecar
void save_schema(const Schema& schema, const std::string& path);
std::string schema_to_json(const Schema& schema);
Schema schema_from_json(const std::string& text);

// --- statistics --------------------------------------------------------

// Numeric features only. Median is the lower-middle element for even n.
// Mode: exact most-frequent value (smallest wins ties) when
// distinct_count <= max(50, 0.01*n); otherwise the median of the samples in
// the most populated of 100 equal-width bins over [min, max].
FeatureSupport compute_support(const Dataset& ds, std::size_t j);
FeatureSupport compute_support(const std::vector<double>& column, std::size_t j);

// frequency table of a categorical column
std::vector<std::size_t> category_counts(const Dataset& ds, std::size_t j);

// --- preprocessing -----------------------------------------------------

struct Affine {
    double mean = 0.0;
    double std = 1.0;  // population std, clamped to >= 1e-12
};

struct Standardizer {
    std::vector<std::optional<Affine>> per_feature;  // nullopt for categorical

    double apply_cell(std::size_t j, double v) const;
    double invert_cell(std::size_t j, double v) const;
};

// fit on ds, return transformed copy + parameters
std::pair<Dataset, Standardizer> standardize(const Dataset& ds);
Standardizer fit_standardizer(const Dataset& ds);
Dataset apply_standardizer(const Dataset& ds, const Standardizer& st);
Dataset invert_standardizer(const Dataset& ds, const Standardizer& st);

// one-hot expansion of a single categorical feature (utility for the
// exclusivity invariant); row-major n x cardinality
std::vector<double> one_hot_expand(const Dataset& ds, std::size_t j);

// --- splitting ---------------------------------------------------------

// stratified by label, deterministic per seed; fractions must sum to 1
SplitIndices split(const Dataset& ds, double train_frac, double val_frac, double test_frac,
                   std::uint64_t seed);

}  // namespace tablab::data
