#include <algorithm>
#include <cmath>
#include <numeric>

#include "tablab/kernels.hpp"
#include "tablab/nn.hpp"
#include "tablab/rng.hpp"

namespace tablab::nn {

namespace {

struct BatchBuffer {
    std::vector<double> numeric;
    std::vector<std::int32_t> categorical;
    std::vector<int> labels;

    Batch gather(const ModelInput& in, const std::size_t* idx, std::size_t rows) {
        numeric.resize(rows * in.n_num);
        categorical.resize(rows * in.n_cat);
        labels.resize(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t src = idx[r];
            std::copy(in.numeric.begin() + src * in.n_num, in.numeric.begin() + (src + 1) * in.n_num,
                      numeric.begin() + r * in.n_num);
            std::copy(in.categorical.begin() + src * in.n_cat,
                      in.categorical.begin() + (src + 1) * in.n_cat,
                      categorical.begin() + r * in.n_cat);
            labels[r] = in.labels[src];
        }
        return {numeric.data(), categorical.data(), rows, in.n_num, in.n_cat};
    }
};

std::vector<Tensor> snapshot(const ParamStore& ps) {
    std::vector<Tensor> out;
    for (const auto& p : ps.items()) out.push_back(p.value);
    return out;
}

void restore(ParamStore& ps, const std::vector<Tensor>& snap) {
    for (std::size_t i = 0; i < snap.size(); ++i) ps.items()[i].value = snap[i];
}

void adam_step(ParamStore& ps, const TrainConfig& cfg, std::size_t t) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (auto& p : ps.items()) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad.v[i];
            p.m.v[i] = cfg.beta1 * p.m.v[i] + (1.0 - cfg.beta1) * g;
            p.v.v[i] = cfg.beta2 * p.v.v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = p.m.v[i] / bc1;
            const double vhat = p.v.v[i] / bc2;
            p.value.v[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

void reset_optimizer(ParamStore& ps) {
    for (auto& p : ps.items()) {
        p.m.fill(0.0);
        p.v.fill(0.0);
    }
}

TrainedModel run_training(std::unique_ptr<Model> model, const ModelInput& train_in,
                          const ModelInput& val_in, const TrainConfig& cfg) {
    cfg.validate();
    if (train_in.rows == 0) throw ConfigError("train: empty training set");
    if (val_in.rows == 0) throw ConfigError("train: empty validation set");

    TrainedModel out;
    reset_optimizer(model->params());

    std::vector<std::size_t> order(train_in.rows);
    std::iota(order.begin(), order.end(), 0);
    BatchBuffer buf;

    double best_val = -1.0;
    std::vector<Tensor> best_params = snapshot(model->params());
    std::vector<Tensor> last_finite = best_params;
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;
    std::size_t adam_t = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng::Stream shuffle_stream(cfg.seed, 0x45504f43ULL + epoch);
        shuffle_stream.shuffle(order.data(), order.size());

        double loss_sum = 0.0;
        std::size_t correct = 0;
        bool finite = true;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t rows = std::min(cfg.batch_size, order.size() - start);
            const Batch b = buf.gather(train_in, order.data() + start, rows);
            model->params().zero_grad();
            const double loss = model->forward_backward(b, buf.labels.data(), &correct);
            if (!std::isfinite(loss)) {
                finite = false;
                break;
            }
            loss_sum += loss * static_cast<double>(rows);
            adam_step(model->params(), cfg, ++adam_t);
        }
        if (!finite) {
            restore(model->params(), last_finite);
            out.diverged = true;
            break;
        }
        last_finite = snapshot(model->params());

        const double val_acc = accuracy(*model, val_in, cfg.batch_size);
        EpochStats st;
        st.epoch = epoch;
        st.train_loss = loss_sum / static_cast<double>(train_in.rows);
        st.train_acc = static_cast<double>(correct) / static_cast<double>(train_in.rows);
        st.val_acc = val_acc;
        out.history.push_back(st);

        if (val_acc > best_val) {
            best_val = val_acc;
            best_params = last_finite;
            best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    if (!out.diverged && best_epoch > 0) restore(model->params(), best_params);
    out.best_epoch = best_epoch;
    out.model = std::move(model);
    return out;
}

}  // namespace

TrainedModel train(std::unique_ptr<Model> model, const ModelInput& train_in,
                   const ModelInput& val_in, const TrainConfig& cfg) {
    return run_training(std::move(model), train_in, val_in, cfg);
}

TrainedModel finetune(std::unique_ptr<Model> model, const ModelInput& train_in,
                      const ModelInput& val_in, const TrainConfig& cfg) {
    if (cfg.max_epochs == 0) {  // explicit no-op, model returned unchanged
        TrainedModel out;
        out.model = std::move(model);
        return out;
    }
    return run_training(std::move(model), train_in, val_in, cfg);
}

std::vector<int> predict(Model& model, const ModelInput& in, std::size_t batch_size) {
    std::vector<int> out(in.rows);
    Tensor logits;
    for (std::size_t start = 0; start < in.rows; start += batch_size) {
        const std::size_t rows = std::min(batch_size, in.rows - start);
        const Batch b = {in.numeric.data() + start * in.n_num,
                         in.categorical.data() + start * in.n_cat, rows, in.n_num, in.n_cat};
        model.forward(b, logits);
        const std::size_t classes = logits.dim(1);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* row = logits.data() + r * classes;
            std::size_t best = 0;
            for (std::size_t c = 1; c < classes; ++c)
                if (row[c] > row[best]) best = c;
            out[start + r] = static_cast<int>(best);
        }
    }
    return out;
}

Tensor latents(Model& model, const ModelInput& in, std::size_t batch_size) {
    const std::size_t L = model.config().latent();
    Tensor out({in.rows, L});
    Tensor logits, lat;
    for (std::size_t start = 0; start < in.rows; start += batch_size) {
        const std::size_t rows = std::min(batch_size, in.rows - start);
        const Batch b = {in.numeric.data() + start * in.n_num,
                         in.categorical.data() + start * in.n_cat, rows, in.n_num, in.n_cat};
        model.forward(b, logits, &lat);
        std::copy(lat.v.begin(), lat.v.begin() + rows * L, out.v.begin() + start * L);
    }
    return out;
}

double accuracy(Model& model, const ModelInput& in, std::size_t batch_size) {
    if (in.rows == 0) throw ConfigError("accuracy over empty input");
    const auto preds = predict(model, in, batch_size);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < in.rows; ++i)
        if (preds[i] == in.labels[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(in.rows);
}

std::vector<std::size_t> prune_order(Model& model, const ModelInput& clean_eval) {
    const std::size_t units = model.prunable_units();
    std::vector<double> acc(units, 0.0);
    const std::size_t batch_size = 256;
    for (std::size_t start = 0; start < clean_eval.rows; start += batch_size) {
        const std::size_t rows = std::min(batch_size, clean_eval.rows - start);
        const Batch b = {clean_eval.numeric.data() + start * clean_eval.n_num,
                         clean_eval.categorical.data() + start * clean_eval.n_cat, rows,
                         clean_eval.n_num, clean_eval.n_cat};
        model.accumulate_unit_activation(b, acc.data());
    }
    std::vector<std::size_t> order(units);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return acc[a] < acc[b]; });
    return order;
}

std::vector<std::uint8_t> prune_mask_for_fraction(Model& model, const ModelInput& clean_eval,
                                                  double fraction) {
    if (fraction < 0.0 || fraction > 1.0) throw ConfigError("prune fraction must be in [0,1]");
    const auto order = prune_order(model, clean_eval);
    const auto kill = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(order.size())));
    std::vector<std::uint8_t> mask(order.size(), 1);
    for (std::size_t i = 0; i < kill; ++i) mask[order[i]] = 0;
    return mask;
}

}  // namespace tablab::nn
