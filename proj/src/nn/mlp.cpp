#include "nn_internal.hpp"

namespace tablab::nn {

namespace {

// hidden stack of gelu layers over [standardized numerics | one-hot cats],
// latent tap = last hidden activation
class MlpModel final : public Model {
public:
    MlpModel(const ModelConfig& cfg, const data::Schema& schema) : cfg_(cfg) {
        cfg_.validate();
        for (const auto& f : schema.features) {
            if (f.kind.is_numeric())
                ++n_num_;
            else
                cards_.push_back(f.kind.cardinality);
        }
        d_in_ = n_num_;
        for (const auto c : cards_) d_in_ += c;

        std::size_t in = d_in_;
        for (std::size_t i = 0; i < cfg_.hidden_widths.size(); ++i) {
            const std::size_t out = cfg_.hidden_widths[i];
            auto& w = params_.add(layer_name(i) + ".w", {in, out});
            init_glorot(w, in, out, cfg_.seed);
            params_.add(layer_name(i) + ".b", {out});
            in = out;
        }
        auto& hw = params_.add("head.w", {in, cfg_.num_classes});
        init_glorot(hw, in, cfg_.num_classes, cfg_.seed);
        params_.add("head.b", {cfg_.num_classes});

        prune_mask_.assign(prunable_units(), 1);
    }

    const ModelConfig& config() const override { return cfg_; }
    ParamStore& params() override { return params_; }
    const ParamStore& params() const override { return params_; }

    std::size_t prunable_units() const override {
        std::size_t t = 0;
        for (const auto w : cfg_.hidden_widths) t += w;
        return t;
    }

    std::unique_ptr<Model> clone() const override { return std::make_unique<MlpModel>(*this); }

    void forward(const Batch& b, Tensor& logits, Tensor* latents) override {
        run_forward(b);
        logits = logits_;
        if (latents) *latents = act_.back();
    }

    double forward_backward(const Batch& b, const int* labels, std::size_t* correct) override {
        run_forward(b);
        const std::size_t rows = b.rows;
        const std::size_t classes = cfg_.num_classes;
        Tensor dlogits({rows, classes});
        const double loss =
            detail::softmax_xent(logits_.data(), dlogits.data(), labels, rows, classes, correct);

        const std::size_t nl = cfg_.hidden_widths.size();
        Tensor dact({rows, cfg_.hidden_widths.back()});
        detail::linear_backward(act_.back().data(), dlogits.data(), params_.at("head.w"),
                                params_.at("head.b"), dact.data(), rows,
                                cfg_.hidden_widths.back(), classes);

        for (std::size_t i = nl; i-- > 0;) {
            const std::size_t out = cfg_.hidden_widths[i];
            const std::size_t in = i == 0 ? d_in_ : cfg_.hidden_widths[i - 1];
            const double* z = pre_[i].data();
            const std::size_t off = layer_offset(i);
            Tensor dz({rows, out});
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t u = 0; u < out; ++u) {
                    const std::size_t k = r * out + u;
                    dz.v[k] = dact.v[k] * (prune_mask_[off + u] ? gelu_grad(z[k]) : 0.0);
                }
            const double* input = i == 0 ? x_.data() : act_[i - 1].data();
            Tensor dx;
            double* dx_ptr = nullptr;
            if (i > 0) {
                dx.reset({rows, in});
                dx_ptr = dx.data();
            }
            detail::linear_backward(input, dz.data(), params_.at(layer_name(i) + ".w"),
                                    params_.at(layer_name(i) + ".b"), dx_ptr, rows, in, out);
            if (i > 0) dact = std::move(dx);
        }
        return loss;
    }

    std::size_t accumulate_unit_activation(const Batch& b, double* acc) override {
        run_forward(b);
        for (std::size_t i = 0; i < cfg_.hidden_widths.size(); ++i) {
            const std::size_t out = cfg_.hidden_widths[i];
            const std::size_t off = layer_offset(i);
            const double* a = act_[i].data();
            for (std::size_t r = 0; r < b.rows; ++r)
                for (std::size_t u = 0; u < out; ++u) acc[off + u] += std::fabs(a[r * out + u]);
        }
        return b.rows;
    }

private:
    static std::string layer_name(std::size_t i) { return "l" + std::to_string(i); }

    std::size_t layer_offset(std::size_t i) const {
        std::size_t off = 0;
        for (std::size_t k = 0; k < i; ++k) off += cfg_.hidden_widths[k];
        return off;
    }

    void run_forward(const Batch& b) {
        detail::check_batch(b, n_num_, cards_.size());
        const std::size_t rows = b.rows;
        x_.reset({rows, d_in_});
        for (std::size_t r = 0; r < rows; ++r) {
            double* row = x_.data() + r * d_in_;
            std::copy(b.numeric + r * n_num_, b.numeric + (r + 1) * n_num_, row);
            std::size_t off = n_num_;
            for (std::size_t c = 0; c < cards_.size(); ++c) {
                const auto idx = static_cast<std::size_t>(b.categorical[r * cards_.size() + c]);
                if (idx >= cards_[c]) throw ConfigError("categorical index out of range in batch");
                row[off + idx] = 1.0;
                off += cards_[c];
            }
        }

        const std::size_t nl = cfg_.hidden_widths.size();
        pre_.resize(nl);
        act_.resize(nl);
        const double* cur = x_.data();
        std::size_t in = d_in_;
        for (std::size_t i = 0; i < nl; ++i) {
            const std::size_t out = cfg_.hidden_widths[i];
            pre_[i].reset({rows, out});
            act_[i].reset({rows, out});
            detail::linear_forward(cur, params_.at(layer_name(i) + ".w"),
                                   params_.at(layer_name(i) + ".b"), pre_[i].data(), rows, in, out);
            const std::size_t off = layer_offset(i);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t u = 0; u < out; ++u) {
                    const std::size_t k = r * out + u;
                    act_[i].v[k] = prune_mask_[off + u] ? gelu(pre_[i].v[k]) : 0.0;
                }
            cur = act_[i].data();
            in = out;
        }
        logits_.reset({rows, cfg_.num_classes});
        detail::linear_forward(cur, params_.at("head.w"), params_.at("head.b"), logits_.data(),
                               rows, in, cfg_.num_classes);
    }

    ModelConfig cfg_;
    std::size_t n_num_ = 0;
    std::vector<std::size_t> cards_;
    std::size_t d_in_ = 0;
    ParamStore params_;

    Tensor x_;
    std::vector<Tensor> pre_, act_;
    Tensor logits_;
};

}  // namespace

std::unique_ptr<Model> make_mlp(const ModelConfig& cfg, const data::Schema& schema) {
    return std::make_unique<MlpModel>(cfg, schema);
}

}  // namespace tablab::nn
