#include <algorithm>
#include <cmath>

#include "tablab/data.hpp"
#include "tablab/kernels.hpp"

namespace tablab::data {

namespace {

constexpr std::size_t kHistBins = 100;

// lower-middle convention for even n
double median_of_sorted(const std::vector<double>& v) {
    return v[(v.size() - 1) / 2];
}

}  // namespace

FeatureSupport compute_support(const std::vector<double>& column, std::size_t j) {
    if (column.empty()) throw StageError("compute_support: empty column");
    FeatureSupport s;
    s.feature = j;

    std::vector<double> sorted = column;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();

    s.min = sorted.front();
    s.max = sorted.back();
    s.mean = kern::sum(sorted.data(), n) / static_cast<double>(n);
    s.median = median_of_sorted(sorted);

    // run-length pass: distinct count + exact mode candidate
    std::size_t distinct = 0, best_count = 0;
    double best_value = sorted[0];
    std::size_t i = 0;
    while (i < n) {
        std::size_t run = 1;
        while (i + run < n && sorted[i + run] == sorted[i]) ++run;
        ++distinct;
        if (run > best_count) {  // ties keep the smallest value (first seen in sorted order)
            best_count = run;
            best_value = sorted[i];
        }
        i += run;
    }
    s.distinct_count = distinct;

    // histogram always reported; it is also the mode source for
    // near-continuous columns
    const double range = s.max - s.min;
    s.hist_edges.resize(kHistBins + 1);
    s.hist_counts.assign(kHistBins, 0);
    for (std::size_t b = 0; b <= kHistBins; ++b)
        s.hist_edges[b] = s.min + range * static_cast<double>(b) / static_cast<double>(kHistBins);
    std::vector<std::vector<double>> bin_members;
    const bool continuous_mode =
        distinct > std::max<std::size_t>(50, static_cast<std::size_t>(0.01 * static_cast<double>(n)));
    if (continuous_mode) bin_members.resize(kHistBins);
    if (range > 0) {
        for (double v : sorted) {
            auto b = static_cast<std::size_t>((v - s.min) / range * kHistBins);
            if (b >= kHistBins) b = kHistBins - 1;
            s.hist_counts[b]++;
            if (continuous_mode) bin_members[b].push_back(v);
        }
    } else {
        s.hist_counts[0] = n;
    }

    if (!continuous_mode || range == 0) {
        s.mode = best_value;
    } else {
        std::size_t top_bin = 0;
        for (std::size_t b = 1; b < kHistBins; ++b)
            if (s.hist_counts[b] > s.hist_counts[top_bin]) top_bin = b;
        s.mode = median_of_sorted(bin_members[top_bin]);  // members are already sorted
    }
    return s;
}

FeatureSupport compute_support(const Dataset& ds, std::size_t j) {
    if (j >= ds.schema.d()) throw ConfigError("feature index out of range");
    if (!ds.schema.features[j].kind.is_numeric())
        throw ConfigError("numeric statistics requested for categorical feature " + ds.schema.features[j].name);
    return compute_support(ds.column(j), j);
}

}  // namespace tablab::data
