#include <algorithm>
#include <array>
#include <cmath>

#include "tablab/data.hpp"
#include "tablab/rng.hpp"

namespace tablab::data {

namespace {

// largest-remainder apportionment of n into 3 parts
std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& frac) {
    std::array<std::size_t, 3> out{};
    std::array<double, 3> rem{};
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
        const double t = frac[s] * static_cast<double>(n);
        out[s] = static_cast<std::size_t>(std::floor(t));
        rem[s] = t - std::floor(t);
        assigned += out[s];
    }
    while (assigned < n) {
        int best = 0;
        for (int s = 1; s < 3; ++s)
            if (rem[s] > rem[best]) best = s;
        out[best]++;
        rem[best] = -1.0;
        ++assigned;
    }
    return out;
}

}  // namespace

SplitIndices split(const Dataset& ds, double train_frac, double val_frac, double test_frac,
                   std::uint64_t seed) {
    if (train_frac <= 0 || val_frac <= 0 || test_frac <= 0)
        throw ConfigError("split fractions must be positive");
    if (std::fabs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
        throw ConfigError("split fractions must sum to 1");
    const std::array<double, 3> frac{train_frac, val_frac, test_frac};

    std::vector<std::vector<std::size_t>> by_class(ds.schema.label_classes);
    for (std::size_t i = 0; i < ds.n; ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

    const auto targets = apportion(ds.n, frac);
    for (int s = 0; s < 3; ++s)
        if (targets[s] == 0) throw StageError("split produces an empty partition");

    // per-class proportional floors, then leftovers fill global deficits
    std::vector<std::array<std::size_t, 3>> counts(by_class.size());
    std::array<std::size_t, 3> totals{};
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const std::size_t nc = by_class[c].size();
        if (nc == 0) continue;
        if (nc < 3)
            throw StageError("class " + std::to_string(c) + " has fewer samples than split slots");
        for (int s = 0; s < 3; ++s) {
            counts[c][s] = static_cast<std::size_t>(std::floor(frac[s] * static_cast<double>(nc)));
            totals[s] += counts[c][s];
        }
    }
    std::array<std::size_t, 3> deficit{};
    for (int s = 0; s < 3; ++s) deficit[s] = targets[s] - std::min(targets[s], totals[s]);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const std::size_t nc = by_class[c].size();
        if (nc == 0) continue;
        std::size_t leftover = nc - (counts[c][0] + counts[c][1] + counts[c][2]);
        while (leftover > 0) {
            int best = 0;
            for (int s = 1; s < 3; ++s)
                if (deficit[s] > deficit[best]) best = s;
            counts[c][best]++;
            if (deficit[best] > 0) deficit[best]--;
            --leftover;
        }
    }

    SplitIndices out;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;
        rng::Stream stream(seed, c);
        stream.shuffle(idx.data(), idx.size());
        std::size_t pos = 0;
        for (std::size_t k = 0; k < counts[c][0]; ++k) out.train.push_back(idx[pos++]);
        for (std::size_t k = 0; k < counts[c][1]; ++k) out.validation.push_back(idx[pos++]);
        for (std::size_t k = 0; k < counts[c][2]; ++k) out.test.push_back(idx[pos++]);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    std::sort(out.test.begin(), out.test.end());
    if (out.train.empty() || out.validation.empty() || out.test.empty())
        throw StageError("split produces an empty partition");
    return out;
}

}  // namespace tablab::data
