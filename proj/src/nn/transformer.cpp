#include "nn_internal.hpp"

// Feature-tokenizing transformer stand-in: per-numeric-feature affine tokens,
// categorical embedding tables, a learned cls token, pre-norm blocks of
// multi-head self-attention + gelu FFN with residuals, and a
// linear->gelu->linear head whose gelu output is the latent tap. The prune
// mask covers the FFN hidden units of all blocks.

namespace tablab::nn {

namespace {

constexpr double kLnEps = 1e-5;

void ln_forward(const double* x, const double* g, const double* b, double* y, double* mu,
                double* rstd, std::size_t rows, std::size_t w) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * w;
        double* yr = y + r * w;
        const double m = kern::sum(xr, w) / static_cast<double>(w);
        double var = 0.0;
        for (std::size_t i = 0; i < w; ++i) {
            const double c = xr[i] - m;
            var += c * c;
        }
        var /= static_cast<double>(w);
        const double r_ = 1.0 / std::sqrt(var + kLnEps);
        mu[r] = m;
        rstd[r] = r_;
        for (std::size_t i = 0; i < w; ++i) yr[i] = (xr[i] - m) * r_ * g[i] + b[i];
    }
}

// adds into dx, dg, db
void ln_backward(const double* x, const double* g, const double* mu, const double* rstd,
                 const double* dy, double* dx, double* dg, double* db, std::size_t rows,
                 std::size_t w) {
    std::vector<double> xhat(w), dxhat(w);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * w;
        const double* dyr = dy + r * w;
        double* dxr = dx + r * w;
        const double rs = rstd[r];
        for (std::size_t i = 0; i < w; ++i) {
            xhat[i] = (xr[i] - mu[r]) * rs;
            dxhat[i] = dyr[i] * g[i];
            dg[i] += dyr[i] * xhat[i];
            db[i] += dyr[i];
        }
        const double m1 = kern::sum(dxhat.data(), w) / static_cast<double>(w);
        const double m2 = kern::dot(dxhat.data(), xhat.data(), w) / static_cast<double>(w);
        for (std::size_t i = 0; i < w; ++i) dxr[i] += rs * (dxhat[i] - m1 - xhat[i] * m2);
    }
}

struct BlockCache {
    Tensor x_in, n1, mu1, r1;
    Tensor q, k, v;      // (B*T, D)
    Tensor qh, kh, vh;   // (B*H*T, Dh)
    Tensor p;            // (B*H, T, T)
    Tensor z;            // (B*T, D) merged heads
    Tensor x_mid, n2, mu2, r2;
    Tensor h1, g;        // (B*T, F)
    Tensor x_out;
};

class TransformerModel final : public Model {
public:
    TransformerModel(const ModelConfig& cfg, const data::Schema& schema) : cfg_(cfg) {
        cfg_.validate();
        for (const auto& f : schema.features) {
            if (f.kind.is_numeric())
                ++n_num_;
            else
                cards_.push_back(f.kind.cardinality);
        }
        tokens_ = 1 + n_num_ + cards_.size();

        const std::size_t d = cfg_.d_model;
        if (n_num_ > 0) {
            init_glorot(params_.add("tok.num.w", {n_num_, d}), 1, d, cfg_.seed);
            params_.add("tok.num.b", {n_num_, d});
        }
        for (std::size_t c = 0; c < cards_.size(); ++c)
            init_glorot(params_.add("tok.cat" + std::to_string(c) + ".emb", {cards_[c], d}),
                        cards_[c], d, cfg_.seed);
        init_glorot(params_.add("tok.cls", {d}), 1, d, cfg_.seed);

        for (std::size_t bl = 0; bl < cfg_.blocks; ++bl) {
            const std::string p = "b" + std::to_string(bl) + ".";
            params_.add(p + "ln1.g", {d}).value.fill(1.0);
            params_.add(p + "ln1.b", {d});
            for (const char* nm : {"wq", "wk", "wv", "wo"})
                init_glorot(params_.add(p + "attn." + nm, {d, d}), d, d, cfg_.seed);
            // no key bias: softmax rows are invariant to it, so it would be
            // permanently gradient-free
            for (const char* nm : {"bq", "bv", "bo"}) params_.add(p + "attn." + nm, {d});
            params_.add(p + "ln2.g", {d}).value.fill(1.0);
            params_.add(p + "ln2.b", {d});
            init_glorot(params_.add(p + "ffn.w1", {d, cfg_.ffn_hidden}), d, cfg_.ffn_hidden, cfg_.seed);
            params_.add(p + "ffn.b1", {cfg_.ffn_hidden});
            init_glorot(params_.add(p + "ffn.w2", {cfg_.ffn_hidden, d}), cfg_.ffn_hidden, d, cfg_.seed);
            params_.add(p + "ffn.b2", {d});
        }
        params_.add("lnf.g", {d}).value.fill(1.0);
        params_.add("lnf.b", {d});
        init_glorot(params_.add("head1.w", {d, cfg_.latent_width}), d, cfg_.latent_width, cfg_.seed);
        params_.add("head1.b", {cfg_.latent_width});
        init_glorot(params_.add("head2.w", {cfg_.latent_width, cfg_.num_classes}), cfg_.latent_width,
                    cfg_.num_classes, cfg_.seed);
        params_.add("head2.b", {cfg_.num_classes});

        prune_mask_.assign(prunable_units(), 1);
    }

    const ModelConfig& config() const override { return cfg_; }
    ParamStore& params() override { return params_; }
    const ParamStore& params() const override { return params_; }
    std::size_t prunable_units() const override { return cfg_.blocks * cfg_.ffn_hidden; }
    std::unique_ptr<Model> clone() const override { return std::make_unique<TransformerModel>(*this); }

    void forward(const Batch& b, Tensor& logits, Tensor* latents) override {
        run_forward(b);
        logits = logits_;
        if (latents) *latents = lat_;
    }

    double forward_backward(const Batch& b, const int* labels, std::size_t* correct) override {
        run_forward(b);
        const std::size_t rows = b.rows;
        const std::size_t d = cfg_.d_model;
        const std::size_t L = cfg_.latent_width;
        const std::size_t f = cfg_.ffn_hidden;
        const std::size_t t = tokens_;
        const std::size_t h = cfg_.heads;
        const std::size_t dh = d / h;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

        Tensor dlogits({rows, cfg_.num_classes});
        const double loss = detail::softmax_xent(logits_.data(), dlogits.data(), labels, rows,
                                                 cfg_.num_classes, correct);

        // head
        Tensor dlat({rows, L});
        detail::linear_backward(lat_.data(), dlogits.data(), params_.at("head2.w"),
                                params_.at("head2.b"), dlat.data(), rows, L, cfg_.num_classes);
        for (std::size_t i = 0; i < rows * L; ++i) dlat.v[i] *= gelu_grad(p1_.v[i]);
        Tensor dnf({rows, d});
        detail::linear_backward(nf_.data(), dlat.data(), params_.at("head1.w"),
                                params_.at("head1.b"), dnf.data(), rows, d, L);

        Tensor dxcls({rows, d});
        ln_backward(xcls_.data(), params_.at("lnf.g").value.data(), muf_.data(), rf_.data(),
                    dnf.data(), dxcls.data(), params_.at("lnf.g").grad.data(),
                    params_.at("lnf.b").grad.data(), rows, d);

        // scatter head gradient into the cls token rows
        Tensor dx({rows * t, d});
        for (std::size_t r = 0; r < rows; ++r)
            std::copy(dxcls.data() + r * d, dxcls.data() + (r + 1) * d, dx.data() + r * t * d);

        Tensor dmid({rows * t, d}), dn2({rows * t, d}), dh1({rows * t, f}), dgbuf({rows * t, f});
        Tensor dz({rows * t, d}), dq({rows * t, d}), dk({rows * t, d}), dv({rows * t, d});
        Tensor dzh({rows * h * t, dh});
        Tensor dqh({rows * h * t, dh}), dkh({rows * h * t, dh}), dvh({rows * h * t, dh});
        Tensor dn1({rows * t, d}), dtmp({rows * t, d});
        Tensor dp({t, t}), ds({t, t});

        for (std::size_t bl = cfg_.blocks; bl-- > 0;) {
            auto& c = cache_[bl];
            const std::string pre = "b" + std::to_string(bl) + ".";
            const std::size_t nt = rows * t;

            // ffn: x_out = x_mid + gelu(ln2(x_mid) W1 + b1) (masked) W2 + b2
            detail::linear_backward(c.g.data(), dx.data(), params_.at(pre + "ffn.w2"),
                                    params_.at(pre + "ffn.b2"), dgbuf.data(), nt, f, d);
            const std::uint8_t* mask = prune_mask_.data() + bl * f;
            for (std::size_t r = 0; r < nt; ++r)
                for (std::size_t u = 0; u < f; ++u) {
                    const std::size_t idx = r * f + u;
                    dh1.v[idx] = mask[u] ? dgbuf.v[idx] * gelu_grad(c.h1.v[idx]) : 0.0;
                }
            detail::linear_backward(c.n2.data(), dh1.data(), params_.at(pre + "ffn.w1"),
                                    params_.at(pre + "ffn.b1"), dn2.data(), nt, d, f);
            dmid = dx;  // residual path
            ln_backward(c.x_mid.data(), params_.at(pre + "ln2.g").value.data(), c.mu2.data(),
                        c.r2.data(), dn2.data(), dmid.data(), params_.at(pre + "ln2.g").grad.data(),
                        params_.at(pre + "ln2.b").grad.data(), nt, d);

            // attention: x_mid = x_in + (merge_heads(P V) Wo + bo)
            detail::linear_backward(c.z.data(), dmid.data(), params_.at(pre + "attn.wo"),
                                    params_.at(pre + "attn.bo"), dz.data(), nt, d, d);
            split_heads(dz, dzh, rows, t, h, dh);
            for (std::size_t bh = 0; bh < rows * h; ++bh) {
                const double* ph = c.p.data() + bh * t * t;
                const double* qh = c.qh.data() + bh * t * dh;
                const double* kh = c.kh.data() + bh * t * dh;
                const double* vh = c.vh.data() + bh * t * dh;
                const double* dzh_p = dzh.data() + bh * t * dh;
                double* dqh_p = dqh.data() + bh * t * dh;
                double* dkh_p = dkh.data() + bh * t * dh;
                double* dvh_p = dvh.data() + bh * t * dh;
                // dP = dZh Vh^T ; dVh = P^T dZh
                dp.fill(0.0);
                kern::gemm_nt(dzh_p, vh, dp.data(), t, dh, t);
                std::fill(dvh_p, dvh_p + t * dh, 0.0);
                kern::gemm_tn(ph, dzh_p, dvh_p, t, t, dh);
                // softmax rows backward, then the 1/sqrt(dh) score scale
                for (std::size_t i = 0; i < t; ++i) {
                    const double* pr = ph + i * t;
                    const double* dpr = dp.data() + i * t;
                    double* dsr = ds.data() + i * t;
                    const double inner = kern::dot(dpr, pr, t);
                    for (std::size_t jj = 0; jj < t; ++jj) dsr[jj] = pr[jj] * (dpr[jj] - inner) * scale;
                }
                // dQh = dS Kh ; dKh = dS^T Qh
                std::fill(dqh_p, dqh_p + t * dh, 0.0);
                kern::gemm_nn(ds.data(), kh, dqh_p, t, t, dh);
                std::fill(dkh_p, dkh_p + t * dh, 0.0);
                kern::gemm_tn(ds.data(), qh, dkh_p, t, t, dh);
            }
            merge_heads(dqh, dq, rows, t, h, dh);
            merge_heads(dkh, dk, rows, t, h, dh);
            merge_heads(dvh, dv, rows, t, h, dh);

            detail::linear_backward(c.n1.data(), dq.data(), params_.at(pre + "attn.wq"),
                                    params_.at(pre + "attn.bq"), dn1.data(), nt, d, d);
            detail::linear_backward(c.n1.data(), dk.data(), params_.at(pre + "attn.wk"), nullptr,
                                    dtmp.data(), nt, d, d);
            kern::vadd(dtmp.data(), dn1.data(), nt * d);
            detail::linear_backward(c.n1.data(), dv.data(), params_.at(pre + "attn.wv"),
                                    params_.at(pre + "attn.bv"), dtmp.data(), nt, d, d);
            kern::vadd(dtmp.data(), dn1.data(), nt * d);

            dx = dmid;  // residual path into x_in
            ln_backward(c.x_in.data(), params_.at(pre + "ln1.g").value.data(), c.mu1.data(),
                        c.r1.data(), dn1.data(), dx.data(), params_.at(pre + "ln1.g").grad.data(),
                        params_.at(pre + "ln1.b").grad.data(), nt, d);
        }

        // tokenizer gradients
        double* dcls = params_.at("tok.cls").grad.data();
        for (std::size_t r = 0; r < rows; ++r) kern::vadd(dx.data() + r * t * d, dcls, d);
        if (n_num_ > 0) {
            double* dwn = params_.at("tok.num.w").grad.data();
            double* dbn = params_.at("tok.num.b").grad.data();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < n_num_; ++j) {
                    const double* dtok = dx.data() + (r * t + 1 + j) * d;
                    kern::axpy(b.numeric[r * n_num_ + j], dtok, dwn + j * d, d);
                    kern::vadd(dtok, dbn + j * d, d);
                }
        }
        for (std::size_t cfeat = 0; cfeat < cards_.size(); ++cfeat) {
            double* demb = params_.at("tok.cat" + std::to_string(cfeat) + ".emb").grad.data();
            for (std::size_t r = 0; r < rows; ++r) {
                const auto idx = static_cast<std::size_t>(b.categorical[r * cards_.size() + cfeat]);
                const double* dtok = dx.data() + (r * t + 1 + n_num_ + cfeat) * d;
                kern::vadd(dtok, demb + idx * d, d);
            }
        }
        return loss;
    }

    std::size_t accumulate_unit_activation(const Batch& b, double* acc) override {
        run_forward(b);
        const std::size_t f = cfg_.ffn_hidden;
        const std::size_t nt = b.rows * tokens_;
        for (std::size_t bl = 0; bl < cfg_.blocks; ++bl) {
            const double* g = cache_[bl].g.data();
            for (std::size_t r = 0; r < nt; ++r)
                for (std::size_t u = 0; u < f; ++u) acc[bl * f + u] += std::fabs(g[r * f + u]);
        }
        return nt;
    }

private:
    static void split_heads(const Tensor& x, Tensor& xh, std::size_t rows, std::size_t t,
                            std::size_t h, std::size_t dh) {
        const std::size_t d = h * dh;
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t hh = 0; hh < h; ++hh)
                for (std::size_t tt = 0; tt < t; ++tt) {
                    const double* src = x.data() + (r * t + tt) * d + hh * dh;
                    double* dst = xh.data() + ((r * h + hh) * t + tt) * dh;
                    std::copy(src, src + dh, dst);
                }
    }

    static void merge_heads(const Tensor& xh, Tensor& x, std::size_t rows, std::size_t t,
                            std::size_t h, std::size_t dh) {
        const std::size_t d = h * dh;
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t hh = 0; hh < h; ++hh)
                for (std::size_t tt = 0; tt < t; ++tt) {
                    const double* src = xh.data() + ((r * h + hh) * t + tt) * dh;
                    double* dst = x.data() + (r * t + tt) * d + hh * dh;
                    std::copy(src, src + dh, dst);
                }
    }

    void run_forward(const Batch& b) {
        detail::check_batch(b, n_num_, cards_.size());
        const std::size_t rows = b.rows;
        const std::size_t d = cfg_.d_model;
        const std::size_t f = cfg_.ffn_hidden;
        const std::size_t t = tokens_;
        const std::size_t h = cfg_.heads;
        const std::size_t dh = d / h;
        const std::size_t nt = rows * t;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

        cache_.resize(cfg_.blocks);
        Tensor x0({nt, d});
        const double* cls = params_.at("tok.cls").value.data();
        const double* wn = n_num_ ? params_.at("tok.num.w").value.data() : nullptr;
        const double* bn = n_num_ ? params_.at("tok.num.b").value.data() : nullptr;
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy(cls, cls + d, x0.data() + r * t * d);
            for (std::size_t j = 0; j < n_num_; ++j) {
                const double xv = b.numeric[r * n_num_ + j];
                double* tok = x0.data() + (r * t + 1 + j) * d;
                for (std::size_t u = 0; u < d; ++u) tok[u] = wn[j * d + u] * xv + bn[j * d + u];
            }
            for (std::size_t c = 0; c < cards_.size(); ++c) {
                const auto idx = static_cast<std::size_t>(b.categorical[r * cards_.size() + c]);
                if (idx >= cards_[c]) throw ConfigError("categorical index out of range in batch");
                const double* emb =
                    params_.at("tok.cat" + std::to_string(c) + ".emb").value.data() + idx * d;
                std::copy(emb, emb + d, x0.data() + (r * t + 1 + n_num_ + c) * d);
            }
        }

        for (std::size_t bl = 0; bl < cfg_.blocks; ++bl) {
            auto& c = cache_[bl];
            const std::string pre = "b" + std::to_string(bl) + ".";
            c.x_in = bl == 0 ? std::move(x0) : cache_[bl - 1].x_out;

            c.n1.reset({nt, d});
            c.mu1.reset({nt});
            c.r1.reset({nt});
            ln_forward(c.x_in.data(), params_.at(pre + "ln1.g").value.data(),
                       params_.at(pre + "ln1.b").value.data(), c.n1.data(), c.mu1.data(),
                       c.r1.data(), nt, d);

            c.q.reset({nt, d});
            c.k.reset({nt, d});
            c.v.reset({nt, d});
            detail::linear_forward(c.n1.data(), params_.at(pre + "attn.wq"),
                                   params_.at(pre + "attn.bq"), c.q.data(), nt, d, d);
            detail::linear_forward(c.n1.data(), params_.at(pre + "attn.wk"), nullptr, c.k.data(),
                                   nt, d, d);
            detail::linear_forward(c.n1.data(), params_.at(pre + "attn.wv"),
                                   params_.at(pre + "attn.bv"), c.v.data(), nt, d, d);

            c.qh.reset({rows * h * t, dh});
            c.kh.reset({rows * h * t, dh});
            c.vh.reset({rows * h * t, dh});
            split_heads(c.q, c.qh, rows, t, h, dh);
            split_heads(c.k, c.kh, rows, t, h, dh);
            split_heads(c.v, c.vh, rows, t, h, dh);

            c.p.reset({rows * h, t, t});
            Tensor zh({rows * h * t, dh});
            for (std::size_t bh = 0; bh < rows * h; ++bh) {
                double* p = c.p.data() + bh * t * t;
                kern::gemm_nt(c.qh.data() + bh * t * dh, c.kh.data() + bh * t * dh, p, t, dh, t);
                kern::scale(scale, p, t * t);
                softmax_rows(p, t, t);
                kern::gemm_nn(p, c.vh.data() + bh * t * dh, zh.data() + bh * t * dh, t, t, dh);
            }
            c.z.reset({nt, d});
            merge_heads(zh, c.z, rows, t, h, dh);

            c.x_mid.reset({nt, d});
            detail::linear_forward(c.z.data(), params_.at(pre + "attn.wo"),
                                   params_.at(pre + "attn.bo"), c.x_mid.data(), nt, d, d);
            kern::vadd(c.x_in.data(), c.x_mid.data(), nt * d);

            c.n2.reset({nt, d});
            c.mu2.reset({nt});
            c.r2.reset({nt});
            ln_forward(c.x_mid.data(), params_.at(pre + "ln2.g").value.data(),
                       params_.at(pre + "ln2.b").value.data(), c.n2.data(), c.mu2.data(),
                       c.r2.data(), nt, d);

            c.h1.reset({nt, f});
            detail::linear_forward(c.n2.data(), params_.at(pre + "ffn.w1"),
                                   params_.at(pre + "ffn.b1"), c.h1.data(), nt, d, f);
            c.g.reset({nt, f});
            const std::uint8_t* mask = prune_mask_.data() + bl * f;
            for (std::size_t r = 0; r < nt; ++r)
                for (std::size_t u = 0; u < f; ++u) {
                    const std::size_t idx = r * f + u;
                    c.g.v[idx] = mask[u] ? gelu(c.h1.v[idx]) : 0.0;
                }
            c.x_out.reset({nt, d});
            detail::linear_forward(c.g.data(), params_.at(pre + "ffn.w2"),
                                   params_.at(pre + "ffn.b2"), c.x_out.data(), nt, f, d);
            kern::vadd(c.x_mid.data(), c.x_out.data(), nt * d);
        }

        // final pre-norm + head on the cls token only
        xcls_.reset({rows, d});
        const Tensor& xlast = cache_.back().x_out;
        for (std::size_t r = 0; r < rows; ++r)
            std::copy(xlast.data() + r * t * d, xlast.data() + r * t * d + d, xcls_.data() + r * d);
        nf_.reset({rows, d});
        muf_.reset({rows});
        rf_.reset({rows});
        ln_forward(xcls_.data(), params_.at("lnf.g").value.data(), params_.at("lnf.b").value.data(),
                   nf_.data(), muf_.data(), rf_.data(), rows, d);

        p1_.reset({rows, cfg_.latent_width});
        detail::linear_forward(nf_.data(), params_.at("head1.w"), params_.at("head1.b"), p1_.data(),
                               rows, d, cfg_.latent_width);
        lat_.reset({rows, cfg_.latent_width});
        for (std::size_t i = 0; i < rows * cfg_.latent_width; ++i) lat_.v[i] = gelu(p1_.v[i]);

        logits_.reset({rows, cfg_.num_classes});
        detail::linear_forward(lat_.data(), params_.at("head2.w"), params_.at("head2.b"),
                               logits_.data(), rows, cfg_.latent_width, cfg_.num_classes);
    }

    ModelConfig cfg_;
    std::size_t n_num_ = 0;
    std::vector<std::size_t> cards_;
    std::size_t tokens_ = 0;
    ParamStore params_;

    std::vector<BlockCache> cache_;
    Tensor xcls_, nf_, muf_, rf_, p1_, lat_, logits_;
};

}  // namespace

std::unique_ptr<Model> make_transformer(const ModelConfig& cfg, const data::Schema& schema) {
    return std::make_unique<TransformerModel>(cfg, schema);
}

std::unique_ptr<Model> make_mlp(const ModelConfig& cfg, const data::Schema& schema);

std::unique_ptr<Model> make_model(const ModelConfig& cfg, const data::Schema& schema) {
    cfg.validate();
    if (cfg.num_classes != schema.label_classes)
        throw ConfigError("model num_classes does not match schema label_classes");
    return cfg.arch == Arch::Mlp ? make_mlp(cfg, schema) : make_transformer(cfg, schema);
}

}  // namespace tablab::nn
