#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tablab/rng.hpp"
#include "tablab/synth.hpp"
#include "tablab/trees.hpp"

using namespace tablab;

namespace {

std::vector<std::size_t> all_rows(const data::Dataset& ds) {
    std::vector<std::size_t> r(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) r[i] = i;
    return r;
}

data::Dataset planted_signal(std::uint64_t seed, std::size_t n) {
    synth::SynthConfig cfg;
    cfg.n = n;
    cfg.d = 2;
    cfg.importance_weights = {2.0, 1e-9};
    cfg.seed = seed;
    cfg.noise_scale = 0.05;
    return synth::generate(cfg);
}

// four XOR combinations replicated with two pure-noise companions
data::Dataset xor_table(std::uint64_t seed, std::size_t reps) {
    data::Schema s;
    for (int j = 0; j < 4; ++j)
        s.features.push_back({"f" + std::to_string(j), data::FeatureKind::numeric(), {}});
    s.label_classes = 2;
    data::Dataset ds;
    ds.schema = s;
    rng::Stream st(seed, 0);
    for (std::size_t r = 0; r < reps; ++r)
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                ds.cells.push_back(a);
                ds.cells.push_back(b);
                ds.cells.push_back(st.next_normal());
                ds.cells.push_back(st.next_normal());
                ds.labels.push_back(a ^ b);
                ds.n++;
            }
    return ds;
}

}  // namespace

TEST_CASE("planted signal dominates the importance for both ensembles") {
    const auto ds = planted_signal(31, 1500);
    for (const auto kind : {trees::EnsembleKind::RandomForest, trees::EnsembleKind::GradientBoosted}) {
        trees::TreeEnsembleConfig cfg;
        cfg.kind = kind;
        cfg.tree_count = 20;
        cfg.max_depth = 5;
        cfg.seed = 1;
        const auto ens = trees::train_ensemble(ds, all_rows(ds), cfg);
        const auto imp = ens.normalized_importance();
        CHECK(imp[0] > imp[1]);
        CHECK(imp[0] + imp[1] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(ens.accuracy(ds, all_rows(ds)) > 0.7);
    }
}

TEST_CASE("pure-noise labels spread importance: no feature above 3x uniform") {
    // d=10, labels independent of features; averaged over 10 seeds
    std::vector<double> max_share;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        synth::SynthConfig sc;
        sc.n = 1200;
        sc.d = 10;
        sc.seed = 100 + seed;
        auto ds = synth::generate(sc);
        rng::Stream st(seed, 77);
        for (auto& l : ds.labels) l = static_cast<int>(st.next_below(2));  // sever the teacher

        trees::TreeEnsembleConfig cfg;
        cfg.kind = trees::EnsembleKind::RandomForest;
        cfg.tree_count = 100;
        cfg.max_depth = 6;
        cfg.subsample = 0.8;
        cfg.seed = seed;
        const auto imp = trees::train_ensemble(ds, all_rows(ds), cfg).normalized_importance();
        max_share.push_back(*std::max_element(imp.begin(), imp.end()));
    }
    double mean = 0.0;
    for (const auto m : max_share) mean += m;
    mean /= static_cast<double>(max_share.size());
    CHECK(mean < 3.0 / 10.0);
}

TEST_CASE("xor needs depth: depth-1 near chance, depth-3 above 90 percent") {
    const auto ds = xor_table(41, 100);
    trees::TreeEnsembleConfig shallow;
    shallow.kind = trees::EnsembleKind::RandomForest;
    shallow.tree_count = 20;
    shallow.max_depth = 1;
    shallow.seed = 2;
    const auto acc1 = trees::train_ensemble(ds, all_rows(ds), shallow).accuracy(ds, all_rows(ds));
    CHECK(acc1 < 0.62);

    trees::TreeEnsembleConfig deep = shallow;
    deep.max_depth = 3;
    const auto acc3 = trees::train_ensemble(ds, all_rows(ds), deep).accuracy(ds, all_rows(ds));
    CHECK(acc3 > 0.9);
}

TEST_CASE("single-class training data is a stage error") {
    auto ds = planted_signal(43, 300);
    for (auto& l : ds.labels) l = 0;
    trees::TreeEnsembleConfig cfg;
    CHECK_THROWS_AS(trees::train_ensemble(ds, all_rows(ds), cfg), StageError);
}

TEST_CASE("gbdt handles multiclass one-vs-rest") {
    // three well-separated gaussian blobs on feature 0
    data::Schema s;
    s.features = {{"x", data::FeatureKind::numeric(), {}}, {"y", data::FeatureKind::numeric(), {}}};
    s.label_classes = 3;
    data::Dataset ds;
    ds.schema = s;
    rng::Stream st(47, 0);
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < 200; ++i) {
            ds.cells.push_back(3.0 * c + 0.3 * st.next_normal());
            ds.cells.push_back(st.next_normal());
            ds.labels.push_back(c);
            ds.n++;
        }
    trees::TreeEnsembleConfig cfg;
    cfg.kind = trees::EnsembleKind::GradientBoosted;
    cfg.tree_count = 20;
    cfg.max_depth = 3;
    cfg.learning_rate = 0.3;
    cfg.seed = 3;
    const auto ens = trees::train_ensemble(ds, all_rows(ds), cfg);
    CHECK(ens.accuracy(ds, all_rows(ds)) > 0.97);
    CHECK(ens.trees.size() == 20 * 3);
}

TEST_CASE("importance ranking is invariant to positive rescaling of a column") {
    const auto base = planted_signal(51, 800);
    for (const auto kind : {trees::EnsembleKind::RandomForest, trees::EnsembleKind::GradientBoosted}) {
        trees::TreeEnsembleConfig cfg;
        cfg.kind = kind;
        cfg.tree_count = 10;
        cfg.max_depth = 4;
        cfg.seed = 4;
        const auto imp_a = trees::train_ensemble(base, all_rows(base), cfg).normalized_importance();

        auto scaled = base;
        for (std::size_t i = 0; i < scaled.n; ++i) scaled.at(i, 0) *= 1000.0;
        const auto imp_b = trees::train_ensemble(scaled, all_rows(scaled), cfg).normalized_importance();
        // split geometry rescales; the gains are identical
        CHECK(imp_a[0] == doctest::Approx(imp_b[0]).epsilon(1e-12));
        CHECK(imp_a[1] == doctest::Approx(imp_b[1]).epsilon(1e-12));
    }
}

TEST_CASE("training is deterministic per seed") {
    const auto ds = planted_signal(53, 500);
    trees::TreeEnsembleConfig cfg;
    cfg.kind = trees::EnsembleKind::RandomForest;
    cfg.tree_count = 8;
    cfg.max_depth = 5;
    cfg.subsample = 0.7;
    cfg.seed = 5;
    const auto a = trees::train_ensemble(ds, all_rows(ds), cfg);
    const auto b = trees::train_ensemble(ds, all_rows(ds), cfg);
    CHECK(a.gain == b.gain);
    REQUIRE(a.trees.size() == b.trees.size());
    for (std::size_t t = 0; t < a.trees.size(); ++t) {
        REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
        for (std::size_t n = 0; n < a.trees[t].nodes.size(); ++n) {
            CHECK(a.trees[t].nodes[n].feature == b.trees[t].nodes[n].feature);
            CHECK(a.trees[t].nodes[n].threshold == b.trees[t].nodes[n].threshold);
        }
    }
}

TEST_CASE("config validation") {
    trees::TreeEnsembleConfig cfg;
    cfg.tree_count = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.kind = trees::EnsembleKind::GradientBoosted;
    cfg.learning_rate = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.subsample = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
