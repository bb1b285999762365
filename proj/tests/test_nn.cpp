#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "tablab/nn.hpp"
#include "tablab/rng.hpp"
#include "tablab/synth.hpp"

using namespace tablab;

namespace {

data::Schema numeric_schema(std::size_t d, std::size_t classes = 2) {
    data::Schema s;
    for (std::size_t j = 0; j < d; ++j)
        s.features.push_back({"f" + std::to_string(j), data::FeatureKind::numeric(), {}});
    s.label_classes = classes;
    return s;
}

data::Schema mixed_schema() {
    data::Schema s = numeric_schema(3, 3);
    s.features.push_back({"c0", data::FeatureKind::categorical(4), {}});
    s.features.push_back({"c1", data::FeatureKind::categorical(3), {}});
    return s;
}

nn::ModelInput random_input(std::size_t rows, std::size_t n_num, std::size_t n_cat,
                            const std::vector<std::size_t>& cards, std::size_t classes,
                            std::uint64_t seed) {
    nn::ModelInput in;
    in.rows = rows;
    in.n_num = n_num;
    in.n_cat = n_cat;
    rng::Stream s(seed, 7);
    in.numeric.resize(rows * n_num);
    for (auto& v : in.numeric) v = s.next_normal();
    in.categorical.resize(rows * n_cat);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < n_cat; ++c)
            in.categorical[r * n_cat + c] = static_cast<std::int32_t>(s.next_below(cards[c]));
    in.labels.resize(rows);
    for (auto& l : in.labels) l = static_cast<int>(s.next_below(classes));
    return in;
}

nn::ModelConfig small_mlp(std::size_t classes = 2) {
    nn::ModelConfig cfg;
    cfg.arch = nn::Arch::Mlp;
    cfg.hidden_widths = {16, 12};
    cfg.num_classes = classes;
    cfg.seed = 3;
    return cfg;
}

nn::ModelConfig small_transformer(std::size_t classes = 3) {
    nn::ModelConfig cfg;
    cfg.arch = nn::Arch::TabTransformer;
    cfg.d_model = 16;
    cfg.heads = 4;
    cfg.blocks = 2;
    cfg.ffn_hidden = 24;
    cfg.latent_width = 10;
    cfg.num_classes = classes;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("zero-initialized head gives the uniform softmax") {
    const auto schema = numeric_schema(4, 5);
    auto model = nn::make_model(small_mlp(5), schema);
    model->params().at("head.w").value.fill(0.0);
    model->params().at("head.b").value.fill(0.0);
    const auto in = random_input(6, 4, 0, {}, 5, 11);
    nn::Tensor logits;
    model->forward(nn::full_batch(in), logits);
    for (std::size_t i = 0; i < logits.size(); ++i) CHECK(logits.v[i] == 0.0);
    // softmax normalization: probabilities sum to 1
    std::vector<double> row(logits.data(), logits.data() + 5);
    nn::softmax_rows(row.data(), 1, 5);
    double s = 0.0;
    for (const auto p : row) {
        CHECK(p == doctest::Approx(0.2));
        s += p;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("batch of 1 equals row 0 of a batch of 8") {
    for (const bool transformer : {false, true}) {
        const auto schema = transformer ? mixed_schema() : numeric_schema(4, 2);
        const auto cfg = transformer ? small_transformer(3) : small_mlp(2);
        auto model = nn::make_model(cfg, schema);
        const auto in = random_input(8, transformer ? 3 : 4, transformer ? 2 : 0,
                                     {4, 3}, cfg.num_classes, 21);
        nn::Tensor logits8, lat8, logits1, lat1;
        model->forward(nn::full_batch(in), logits8, &lat8);
        const nn::Batch one = {in.numeric.data(), in.categorical.data(), 1, in.n_num, in.n_cat};
        model->forward(one, logits1, &lat1);
        for (std::size_t c = 0; c < cfg.num_classes; ++c)
            CHECK(logits1.v[c] == doctest::Approx(logits8.v[c]).epsilon(1e-12));
        for (std::size_t c = 0; c < lat1.size(); ++c)
            CHECK(lat1.v[c] == doctest::Approx(lat8.v[c]).epsilon(1e-12));
    }
}

TEST_CASE("latent tap matches a straight-line recomputation") {
    SUBCASE("mlp") {
        const auto schema = numeric_schema(5, 2);
        auto model = nn::make_model(small_mlp(), schema);
        const auto in = random_input(7, 5, 0, {}, 2, 31);
        nn::Tensor logits, lat;
        model->forward(nn::full_batch(in), logits, &lat);
        const auto ref = oracles::recompute_latents(*model, nn::full_batch(in));
        REQUIRE(ref.size() == lat.size());
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(lat.v[i] == doctest::Approx(ref[i]).epsilon(1e-10));
    }
    SUBCASE("transformer") {
        const auto schema = mixed_schema();
        auto model = nn::make_model(small_transformer(), schema);
        const auto in = random_input(5, 3, 2, {4, 3}, 3, 33);
        nn::Tensor logits, lat;
        model->forward(nn::full_batch(in), logits, &lat);
        const auto ref = oracles::recompute_latents(*model, nn::full_batch(in));
        REQUIRE(ref.size() == lat.size());
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(lat.v[i] == doctest::Approx(ref[i]).epsilon(1e-10));
    }
}

TEST_CASE("gradients match central finite differences") {
    SUBCASE("mlp") {
        const auto schema = numeric_schema(5, 3);
        auto model = nn::make_model(small_mlp(3), schema);
        const auto in = random_input(32, 5, 0, {}, 3, 41);
        const auto res =
            oracles::finite_difference_check(*model, nn::full_batch(in), in.labels, 1e-5, 1);
        CAPTURE(res.worst_param);
        CHECK(res.max_rel_error <= 1e-4);
    }
    SUBCASE("transformer") {
        const auto schema = mixed_schema();
        auto model = nn::make_model(small_transformer(), schema);
        const auto in = random_input(8, 3, 2, {4, 3}, 3, 43);
        const auto res =
            oracles::finite_difference_check(*model, nn::full_batch(in), in.labels, 1e-5, 3);
        CAPTURE(res.worst_param);
        CHECK(res.max_rel_error <= 1e-4);
    }
}

TEST_CASE("duplicated batch leaves mean-loss gradients unchanged") {
    const auto schema = numeric_schema(4, 2);
    auto model = nn::make_model(small_mlp(), schema);
    auto in = random_input(6, 4, 0, {}, 2, 51);

    model->params().zero_grad();
    model->forward_backward(nn::full_batch(in), in.labels.data());
    std::vector<double> g1;
    for (const auto& p : model->params().items())
        g1.insert(g1.end(), p.grad.v.begin(), p.grad.v.end());

    nn::ModelInput doubled = in;
    doubled.rows = 12;
    doubled.numeric.insert(doubled.numeric.end(), in.numeric.begin(), in.numeric.end());
    doubled.labels.insert(doubled.labels.end(), in.labels.begin(), in.labels.end());
    model->params().zero_grad();
    model->forward_backward(nn::full_batch(doubled), doubled.labels.data());
    std::size_t i = 0;
    for (const auto& p : model->params().items())
        for (const auto g : p.grad.v) CHECK(g == doctest::Approx(g1[i++]).epsilon(1e-12));
}

TEST_CASE("masked units are exactly zero and their outgoing grads vanish") {
    const auto schema = numeric_schema(4, 2);
    auto model = nn::make_model(small_mlp(), schema);
    auto mask = model->prune_mask();
    mask[3] = 0;   // layer 0, unit 3
    mask[16 + 5] = 0;  // layer 1 (latent), unit 5
    model->set_prune_mask(mask);

    const auto in = random_input(9, 4, 0, {}, 2, 61);
    nn::Tensor logits, lat;
    model->forward(nn::full_batch(in), logits, &lat);
    for (std::size_t r = 0; r < 9; ++r) CHECK(lat.v[r * 12 + 5] == 0.0);

    model->params().zero_grad();
    model->forward_backward(nn::full_batch(in), in.labels.data());
    // outgoing weights of the masked latent unit sit in row 5 of head.w
    const auto& hw = model->params().at("head.w");
    for (std::size_t c = 0; c < 2; ++c) CHECK(hw.grad.v[5 * 2 + c] == 0.0);
    // outgoing weights of layer-0 unit 3 sit in row 3 of l1.w
    const auto& w1 = model->params().at("l1.w");
    for (std::size_t c = 0; c < 12; ++c) CHECK(w1.grad.v[3 * 12 + c] == 0.0);
}

TEST_CASE("training learns a linearly separable toy set") {
    const auto schema = numeric_schema(2, 2);
    nn::ModelInput in;
    in.rows = 200;
    in.n_num = 2;
    rng::Stream s(9, 1);
    for (std::size_t i = 0; i < in.rows; ++i) {
        const double x = s.next_normal(), y = s.next_normal();
        in.numeric.push_back(x);
        in.numeric.push_back(y);
        in.labels.push_back(x + y > 0 ? 1 : 0);
    }
    nn::ModelInput val = in;  // same distribution suffices for the toy check

    nn::TrainConfig tc;
    tc.max_epochs = 50;
    tc.patience = 50;
    tc.seed = 2;
    tc.batch_size = 32;
    tc.lr = 5e-3;
    auto trained = nn::train(nn::make_model(small_mlp(), schema), in, val, tc);
    std::size_t hits = 0;
    const auto preds = nn::predict(*trained.model, in);
    for (std::size_t i = 0; i < in.rows; ++i)
        if (preds[i] == in.labels[i]) ++hits;
    CHECK(static_cast<double>(hits) / 200.0 >= 0.99);
    CHECK_FALSE(trained.history.empty());
}

TEST_CASE("patience 1 with lr frozen at the minimum stops after one epoch past best") {
    const auto schema = numeric_schema(2, 2);
    auto in = random_input(40, 2, 0, {}, 2, 71);
    nn::TrainConfig tc;
    tc.lr = 1e-300;  // effectively frozen updates
    tc.patience = 1;
    tc.max_epochs = 50;
    auto trained = nn::train(nn::make_model(small_mlp(), schema), in, in, tc);
    CHECK(trained.history.size() == 2);  // epoch 1 best, epoch 2 no improvement
    CHECK(trained.best_epoch == 1);
}

TEST_CASE("training is deterministic per seed") {
    const auto schema = numeric_schema(3, 2);
    const auto in = random_input(100, 3, 0, {}, 2, 81);
    const auto val = random_input(30, 3, 0, {}, 2, 82);
    nn::TrainConfig tc;
    tc.max_epochs = 5;
    tc.patience = 5;
    tc.seed = 4;
    auto a = nn::train(nn::make_model(small_mlp(), schema), in, val, tc);
    auto b = nn::train(nn::make_model(small_mlp(), schema), in, val, tc);
    const auto& pa = a.model->params().items();
    const auto& pb = b.model->params().items();
    for (std::size_t p = 0; p < pa.size(); ++p)
        for (std::size_t i = 0; i < pa[p].value.size(); ++i)
            CHECK(pa[p].value.v[i] == pb[p].value.v[i]);
}

TEST_CASE("finetune with zero epochs returns the identical model") {
    const auto schema = numeric_schema(3, 2);
    auto model = nn::make_model(small_mlp(), schema);
    const auto snapshot = model->params().items();
    const auto in = random_input(20, 3, 0, {}, 2, 91);
    nn::TrainConfig tc;
    tc.max_epochs = 0;
    auto out = nn::finetune(std::move(model), in, in, tc);
    const auto& now = out.model->params().items();
    for (std::size_t p = 0; p < now.size(); ++p)
        for (std::size_t i = 0; i < now[p].value.size(); ++i)
            CHECK(now[p].value.v[i] == snapshot[p].value.v[i]);
}

TEST_CASE("finetune keeps masked units at exactly zero") {
    const auto schema = numeric_schema(3, 2);
    auto model = nn::make_model(small_mlp(), schema);
    auto mask = model->prune_mask();
    for (std::size_t u = 0; u < 8; ++u) mask[u] = 0;
    model->set_prune_mask(mask);
    const auto in = random_input(60, 3, 0, {}, 2, 95);
    nn::TrainConfig tc;
    tc.max_epochs = 3;
    tc.patience = 3;
    auto out = nn::finetune(std::move(model), in, in, tc);
    nn::Tensor logits, lat;
    out.model->forward(nn::full_batch(in), logits, &lat);
    CHECK(out.model->prune_mask()[0] == 0);
    // layer-0 masked units: rerun activation accumulation and check zeros
    std::vector<double> acc(out.model->prunable_units(), 0.0);
    out.model->accumulate_unit_activation(nn::full_batch(in), acc.data());
    for (std::size_t u = 0; u < 8; ++u) CHECK(acc[u] == 0.0);
}

TEST_CASE("prune order equals a brute-force sort of mean activations") {
    const auto schema = numeric_schema(4, 2);
    auto model = nn::make_model(small_mlp(), schema);
    const auto in = random_input(50, 4, 0, {}, 2, 101);
    const auto order = nn::prune_order(*model, in);

    std::vector<double> acc(model->prunable_units(), 0.0);
    model->accumulate_unit_activation(nn::full_batch(in), acc.data());
    for (std::size_t i = 1; i < order.size(); ++i) CHECK(acc[order[i - 1]] <= acc[order[i]]);
    // fraction masks are nested
    const auto m20 = nn::prune_mask_for_fraction(*model, in, 0.2);
    const auto m50 = nn::prune_mask_for_fraction(*model, in, 0.5);
    for (std::size_t u = 0; u < m20.size(); ++u)
        if (m20[u] == 0) CHECK(m50[u] == 0);
}

TEST_CASE("checkpoint round-trips parameters, mask and standardizer") {
    const auto schema = mixed_schema();
    auto model = nn::make_model(small_transformer(), schema);
    auto mask = model->prune_mask();
    mask[7] = 0;
    model->set_prune_mask(mask);

    data::Standardizer st;
    st.per_feature.resize(5);
    st.per_feature[0] = data::Affine{1.5, 2.0};
    st.per_feature[1] = data::Affine{-0.5, 0.1};
    st.per_feature[2] = data::Affine{0.0, 1.0};

    const auto path = std::filesystem::temp_directory_path() / "tablab_ckpt_test.bin";
    nn::save_checkpoint(*model, schema, path.string(), &st);
    data::Schema schema2;
    data::Standardizer st2;
    auto loaded = nn::load_checkpoint(path.string(), &schema2, &st2);

    CHECK(schema2 == schema);
    CHECK(loaded->prune_mask()[7] == 0);
    CHECK(st2.per_feature[0]->mean == 1.5);
    CHECK(st2.per_feature[3].has_value() == false);
    const auto in = random_input(4, 3, 2, {4, 3}, 3, 111);
    nn::Tensor la, lb;
    nn::Tensor loga, logb;
    model->forward(nn::full_batch(in), loga, &la);
    loaded->forward(nn::full_batch(in), logb, &lb);
    for (std::size_t i = 0; i < loga.size(); ++i) CHECK(loga.v[i] == logb.v[i]);
    std::filesystem::remove(path);
}

TEST_CASE("activation dump round-trips") {
    nn::Tensor lat({3, 4});
    for (std::size_t i = 0; i < lat.size(); ++i) lat.v[i] = 0.25 * static_cast<double>(i);
    const std::vector<int> labels = {0, 1, 0};
    const std::vector<std::size_t> mask = {2};
    const auto stem = (std::filesystem::temp_directory_path() / "tablab_acts_test").string();
    nn::save_activation_dump(lat, labels, &mask, stem);
    const auto dump = nn::load_activation_dump(stem);
    CHECK(dump.n == 3);
    CHECK(dump.latent_width == 4);
    CHECK(dump.labels == labels);
    REQUIRE(dump.poison_mask.has_value());
    CHECK((*dump.poison_mask)[0] == 2);
    for (std::size_t i = 0; i < lat.size(); ++i) CHECK(dump.latents.v[i] == lat.v[i]);
    std::filesystem::remove(stem + ".bin");
    std::filesystem::remove(stem + ".json");
}

TEST_CASE("logit translation leaves softmax probabilities unchanged") {
    std::vector<double> a = {1.0, -2.0, 0.5, 3.0};
    std::vector<double> b = a;
    for (auto& x : b) x += 123.456;
    nn::softmax_rows(a.data(), 1, 4);
    nn::softmax_rows(b.data(), 1, 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("non-finite input is rejected") {
    const auto schema = numeric_schema(2, 2);
    auto model = nn::make_model(small_mlp(), schema);
    auto in = random_input(3, 2, 0, {}, 2, 121);
    in.numeric[2] = std::numeric_limits<double>::quiet_NaN();
    nn::Tensor logits;
    CHECK_THROWS_AS(model->forward(nn::full_batch(in), logits), StageError);
}
