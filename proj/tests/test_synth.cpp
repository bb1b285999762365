#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tablab/kernels.hpp"
#include "tablab/synth.hpp"

using namespace tablab;

TEST_CASE("generated shape matches the configured table") {
    synth::SynthConfig cfg;
    cfg.n = 100000;
    cfg.d = 10;
    cfg.seed = 11;
    const auto ds = synth::generate(cfg);
    CHECK(ds.n == 100000);
    CHECK(ds.schema.d() == 10);
    CHECK(ds.schema.label_classes == 2);
    CHECK(ds.schema.num_numeric() == 10);
}

TEST_CASE("pure-noise second feature loses to the informative one on stumps") {
    synth::SynthConfig cfg;
    cfg.n = 4000;
    cfg.d = 2;
    cfg.importance_weights = {1.0, 1e-9};  // feature 1 is effectively noise
    cfg.seed = 13;
    const auto ds = synth::generate(cfg);

    // depth-1 stump accuracy by brute force over thresholds
    auto stump_acc = [&](std::size_t j) {
        std::vector<std::pair<double, int>> v(ds.n);
        for (std::size_t i = 0; i < ds.n; ++i) v[i] = {ds.at(i, j), ds.labels[i]};
        std::sort(v.begin(), v.end());
        std::size_t total1 = 0;
        for (const auto& [x, y] : v) total1 += y;
        std::size_t left1 = 0, best = 0;
        for (std::size_t i = 0; i < ds.n; ++i) {
            left1 += v[i].second;
            // predict 0 left, 1 right (and the mirror)
            const std::size_t correct0 = (i + 1 - left1) + (total1 - left1);
            const std::size_t correct1 = left1 + ((ds.n - i - 1) - (total1 - left1));
            best = std::max({best, correct0, correct1});
        }
        return static_cast<double>(best) / static_cast<double>(ds.n);
    };
    CHECK(stump_acc(0) > stump_acc(1) + 0.05);
}

TEST_CASE("per-feature moments are near standard normal at n=100k") {
    synth::SynthConfig cfg;
    cfg.n = 100000;
    cfg.d = 4;
    cfg.seed = 17;
    const auto ds = synth::generate(cfg);
    for (std::size_t j = 0; j < cfg.d; ++j) {
        const auto col = ds.column(j);
        const double mean = kern::sum(col.data(), col.size()) / static_cast<double>(col.size());
        double var = 0.0;
        for (const auto v : col) var += (v - mean) * (v - mean);
        var /= static_cast<double>(col.size());
        CHECK(std::fabs(mean) < 0.05);
        CHECK(std::fabs(std::sqrt(var) - 1.0) < 0.05);
    }
}

TEST_CASE("marginals are permutation-identical in law: pairwise KS < 0.02") {
    synth::SynthConfig cfg;
    cfg.n = 100000;
    cfg.d = 5;
    cfg.seed = 19;
    const auto ds = synth::generate(cfg);
    for (std::size_t a = 0; a < cfg.d; ++a)
        for (std::size_t b = a + 1; b < cfg.d; ++b)
            CHECK(oracles::ks_statistic(ds.column(a), ds.column(b)) < 0.02);
}

TEST_CASE("generation is deterministic per seed and differs across seeds") {
    synth::SynthConfig cfg;
    cfg.n = 500;
    cfg.d = 3;
    cfg.seed = 23;
    const auto a = synth::generate(cfg);
    const auto b = synth::generate(cfg);
    CHECK(a.cells == b.cells);
    CHECK(a.labels == b.labels);
    cfg.seed = 24;
    const auto c = synth::generate(cfg);
    CHECK(a.cells != c.cells);
}

TEST_CASE("teacher posterior integrates to a sane bayes accuracy") {
    synth::SynthConfig cfg;
    cfg.n = 2000;
    cfg.d = 10;
    cfg.seed = 29;
    const auto ds = synth::generate(cfg);
    const double bayes = synth::bayes_accuracy(cfg, ds);
    CHECK(bayes > 0.75);
    CHECK(bayes < 0.99);
    // labels actually drawn from the teacher: empirical agreement with the
    // bayes rule should be near the bayes accuracy
    std::size_t hit = 0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        const double p = synth::teacher_posterior(cfg, ds.cells.data() + i * cfg.d);
        if ((p > 0.5 ? 1 : 0) == ds.labels[i]) ++hit;
    }
    const double agree = static_cast<double>(hit) / static_cast<double>(ds.n);
    CHECK(std::fabs(agree - bayes) < 0.03);
}

TEST_CASE("invalid configs are rejected") {
    synth::SynthConfig cfg;
    cfg.d = 1;
    CHECK_THROWS_AS(synth::generate(cfg), ConfigError);
    cfg.d = 3;
    cfg.n = 10;
    CHECK_THROWS_AS(synth::generate(cfg), ConfigError);
    cfg.n = 1000;
    cfg.importance_weights = {1.0, 1.0, 0.5};  // not strictly descending
    CHECK_THROWS_AS(synth::generate(cfg), ConfigError);
}
