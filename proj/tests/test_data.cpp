#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "tablab/data.hpp"
#include "tablab/rng.hpp"

using namespace tablab;
namespace fs = std::filesystem;

namespace {

fs::path tmp_file(const std::string& name) { return fs::temp_directory_path() / name; }

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

data::Schema two_numeric() {
    data::Schema s;
    s.features = {{"a", data::FeatureKind::numeric(), {}}, {"b", data::FeatureKind::numeric(), {}}};
    s.label_classes = 2;
    return s;
}

data::Dataset random_table(std::uint64_t seed, std::size_t n) {
    data::Schema s;
    s.features = {{"x0", data::FeatureKind::numeric(), {}},
                  {"cat", data::FeatureKind::categorical(3), {"red", "green", "blue"}},
                  {"x1", data::FeatureKind::numeric(), {}}};
    s.label_classes = 3;
    data::Dataset ds;
    ds.schema = s;
    ds.n = n;
    rng::Stream st(seed, 0);
    for (std::size_t i = 0; i < n; ++i) {
        ds.cells.push_back(st.next_normal() * 3.7);
        ds.cells.push_back(static_cast<double>(st.next_below(3)));
        ds.cells.push_back(st.next_uniform() * 100.0 - 50.0);
        ds.labels.push_back(static_cast<int>(st.next_below(3)));
    }
    return ds;
}

}  // namespace

TEST_CASE("3-row csv with 2 numeric columns parses") {
    const auto p = tmp_file("tl_basic.csv");
    write_text(p, "a,b,label\n1.5,2,0\n-3,4.25,1\n0,0,0\n");
    const auto ds = data::load_csv(p.string(), two_numeric());
    CHECK(ds.n == 3);
    CHECK(ds.schema.d() == 2);
    CHECK(ds.at(0, 0) == 1.5);
    CHECK(ds.at(1, 1) == 4.25);
    CHECK(ds.labels[1] == 1);
    fs::remove(p);
}

TEST_CASE("label out of range is a parse error with the row location") {
    const auto p = tmp_file("tl_badlabel.csv");
    write_text(p, "a,b,label\n1,2,0\n3,4,5\n");
    try {
        data::load_csv(p.string(), two_numeric());
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.row() == 3);  // 1-based file row
    }
    fs::remove(p);
}

TEST_CASE("non-numeric cell in a numeric column is rejected") {
    const auto p = tmp_file("tl_badcell.csv");
    write_text(p, "a,b,label\n1,oops,0\n");
    CHECK_THROWS_AS(data::load_csv(p.string(), two_numeric()), ParseError);
    fs::remove(p);
}

TEST_CASE("categorical cardinality overflow is rejected") {
    data::Schema s;
    s.features = {{"c", data::FeatureKind::categorical(2), {}}};
    s.label_classes = 2;
    const auto p = tmp_file("tl_card.csv");
    write_text(p, "c,label\nx,0\ny,0\nz,1\n");
    CHECK_THROWS_AS(data::load_csv(p.string(), s), ParseError);
    fs::remove(p);
}

TEST_CASE("quoted fields with embedded delimiters and quotes") {
    data::Schema s;
    s.features = {{"c", data::FeatureKind::categorical(2), {}}};
    s.label_classes = 2;
    const auto p = tmp_file("tl_quoted.csv");
    write_text(p, "c,label\n\"a,b\",0\n\"say \"\"hi\"\"\",1\n");
    const auto ds = data::load_csv(p.string(), s);
    CHECK(ds.schema.features[0].categories[0] == "a,b");
    CHECK(ds.schema.features[0].categories[1] == "say \"hi\"");
    fs::remove(p);
}

TEST_CASE("save/load round-trip preserves the dataset") {
    const auto ds = random_table(17, 64);
    const auto p = tmp_file("tl_roundtrip.csv");
    data::save_csv(ds, p.string());
    const auto back = data::load_csv(p.string(), ds.schema);
    CHECK(back.n == ds.n);
    CHECK(back.labels == ds.labels);
    CHECK(back.cells == ds.cells);  // exact: shortest-round-trip float formatting
    // and a second bounce is byte-stable
    const auto p2 = tmp_file("tl_roundtrip2.csv");
    data::save_csv(back, p2.string());
    std::ifstream f1(p), f2(p2);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());
    fs::remove(p);
    fs::remove(p2);
}

TEST_CASE("schema sidecar round-trips") {
    const auto ds = random_table(3, 8);
    const auto p = tmp_file("tl_schema.json");
    data::save_schema(ds.schema, p.string());
    const auto back = data::load_schema(p.string());
    CHECK(back == ds.schema);
    fs::remove(p);
}

TEST_CASE("support statistics on a hand-countable column") {
    const auto sup = data::compute_support({1, 2, 2, 3}, 0);
    CHECK(sup.min == 1);
    CHECK(sup.max == 3);
    CHECK(sup.mean == doctest::Approx(2.0));
    CHECK(sup.median == 2);
    CHECK(sup.mode == 2);
    CHECK(sup.distinct_count == 3);
}

TEST_CASE("singleton column support") {
    const auto sup = data::compute_support({5}, 0);
    CHECK(sup.min == 5);
    CHECK(sup.max == 5);
    CHECK(sup.mean == 5);
    CHECK(sup.median == 5);
    CHECK(sup.mode == 5);
}

TEST_CASE("even-length median takes the lower-middle element") {
    const auto sup = data::compute_support({4, 1, 3, 2}, 0);
    CHECK(sup.median == 2);
}

TEST_CASE("categorical feature rejects numeric statistics") {
    const auto ds = random_table(5, 10);
    CHECK_THROWS_AS(data::compute_support(ds, 1), ConfigError);
    const auto counts = data::category_counts(ds, 1);
    CHECK(counts.size() == 3);
    std::size_t total = 0;
    for (const auto c : counts) total += c;
    CHECK(total == ds.n);
}

TEST_CASE("near-continuous mode matches the histogram rule and a frequency oracle") {
    rng::Stream s(99, 0);
    std::vector<double> col(10000);
    for (auto& v : col) v = s.next_normal();
    const auto sup = data::compute_support(col, 0);
    // in-support and within the most populated bin
    CHECK(sup.mode >= sup.min);
    CHECK(sup.mode <= sup.max);
    std::size_t top = 0;
    for (std::size_t b = 1; b < sup.hist_counts.size(); ++b)
        if (sup.hist_counts[b] > sup.hist_counts[top]) top = b;
    CHECK(sup.mode >= sup.hist_edges[top]);
    CHECK(sup.mode <= sup.hist_edges[top + 1]);
    // cross-check against a brute-force frequency count at rounding precision:
    // both land near the density peak of N(0,1)
    const double brute = oracles::brute_force_mode(col, 0.1);
    CHECK(std::fabs(sup.mode - brute) < 0.25);
    // invariant: min <= mode, median <= max
    CHECK(sup.min <= sup.median);
    CHECK(sup.median <= sup.max);
    CHECK(sup.min <= sup.mean);
    CHECK(sup.mean <= sup.max);
}

TEST_CASE("standardize: two-point column and constant column") {
    data::Dataset ds;
    ds.schema = two_numeric();
    ds.n = 2;
    ds.cells = {0, 7, 2, 7};
    ds.labels = {0, 1};
    const auto [out, st] = data::standardize(ds);
    CHECK(out.at(0, 0) == doctest::Approx(-1.0));
    CHECK(out.at(1, 0) == doctest::Approx(1.0));
    CHECK(st.per_feature[0]->mean == doctest::Approx(1.0));
    CHECK(st.per_feature[0]->std == doctest::Approx(1.0));  // population std
    // constant column maps to zeros
    CHECK(out.at(0, 1) == 0.0);
    CHECK(out.at(1, 1) == 0.0);
}

TEST_CASE("standardize then invert recovers the original within 1e-9") {
    const auto ds = random_table(23, 128);
    const auto [out, st] = data::standardize(ds);
    const auto back = data::invert_standardizer(out, st);
    for (std::size_t i = 0; i < ds.cells.size(); ++i)
        CHECK(back.cells[i] == doctest::Approx(ds.cells[i]).epsilon(1e-9));
    // categorical column untouched by the forward transform
    for (std::size_t i = 0; i < ds.n; ++i) CHECK(out.at(i, 1) == ds.at(i, 1));
}

TEST_CASE("one-hot expansion has exactly one 1 per row") {
    const auto ds = random_table(31, 40);
    const auto oh = data::one_hot_expand(ds, 1);
    for (std::size_t i = 0; i < ds.n; ++i) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = oh[i * 3 + c];
            CHECK((v == 0.0 || v == 1.0));
            sum += v;
        }
        CHECK(sum == 1.0);
    }
}

TEST_CASE("split: 8/1/1 on balanced binary n=10 with both classes in train") {
    data::Dataset ds;
    ds.schema = two_numeric();
    ds.n = 10;
    for (std::size_t i = 0; i < 10; ++i) {
        ds.cells.push_back(static_cast<double>(i));
        ds.cells.push_back(0.0);
        ds.labels.push_back(i % 2 == 0 ? 0 : 1);
    }
    const auto sp = data::split(ds, 0.8, 0.1, 0.1, 5);
    CHECK(sp.train.size() == 8);
    CHECK(sp.validation.size() == 1);
    CHECK(sp.test.size() == 1);
    bool has0 = false, has1 = false;
    for (const auto i : sp.train) (ds.labels[i] == 0 ? has0 : has1) = true;
    CHECK(has0);
    CHECK(has1);
}

TEST_CASE("split is deterministic and a partition") {
    const auto ds = random_table(47, 200);
    const auto a = data::split(ds, 0.7, 0.15, 0.15, 9);
    const auto b = data::split(ds, 0.7, 0.15, 0.15, 9);
    CHECK(a.train == b.train);
    CHECK(a.validation == b.validation);
    CHECK(a.test == b.test);

    std::vector<char> seen(ds.n, 0);
    for (const auto* part : {&a.train, &a.validation, &a.test})
        for (const auto i : *part) {
            CHECK(seen[i] == 0);
            seen[i] = 1;
        }
    std::size_t covered = 0;
    for (const auto c : seen) covered += c;
    CHECK(covered == ds.n);
}

TEST_CASE("split keeps class proportions within one sample of the global share") {
    const auto ds = random_table(53, 500);
    const auto sp = data::split(ds, 0.6, 0.2, 0.2, 4);
    std::vector<std::size_t> global(3, 0);
    for (const auto l : ds.labels) global[static_cast<std::size_t>(l)]++;
    for (const auto* part : {&sp.train, &sp.validation, &sp.test}) {
        std::vector<std::size_t> counts(3, 0);
        for (const auto i : *part) counts[static_cast<std::size_t>(ds.labels[i])]++;
        for (std::size_t c = 0; c < 3; ++c) {
            const double expected = static_cast<double>(global[c]) *
                                    static_cast<double>(part->size()) / static_cast<double>(ds.n);
            CHECK(std::fabs(static_cast<double>(counts[c]) - expected) <= 1.0 + 1e-9);
        }
    }
}

TEST_CASE("split rejects bad fractions and starving classes") {
    const auto ds = random_table(61, 50);
    CHECK_THROWS_AS(data::split(ds, 0.5, 0.2, 0.2, 1), ConfigError);
    data::Dataset tiny = ds.select({0, 1, 2, 3});
    tiny.labels = {0, 0, 0, 1};  // class 1 has a single sample
    CHECK_THROWS_AS(data::split(tiny, 0.8, 0.1, 0.1, 1), StageError);
}

TEST_CASE("dataset validation catches bad cells") {
    auto ds = random_table(71, 10);
    ds.labels[3] = 7;
    CHECK_THROWS_AS(ds.validate(), ConfigError);
    ds = random_table(71, 10);
    ds.at(2, 1) = 9.0;  // categorical index beyond cardinality
    CHECK_THROWS_AS(ds.validate(), ConfigError);
}
