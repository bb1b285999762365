#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace oracles {

std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                 std::size_t m, std::size_t k, std::size_t n) {
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
            c[i * n + j] = acc;
        }
    return c;
}

std::vector<double> jacobi_top_eigenvector(std::vector<double> sym, std::size_t n) {
    std::vector<double> evec(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) evec[i * n + i] = 1.0;

    for (std::size_t sweep = 0; sweep < 200; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += sym[p * n + q] * sym[p * n + q];
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = sym[p * n + q];
                if (std::fabs(apq) < 1e-300) continue;
                const double app = sym[p * n + p], aqq = sym[q * n + q];
                const double theta = 0.5 * (aqq - app) / apq;
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = sym[i * n + p], aiq = sym[i * n + q];
                    sym[i * n + p] = c * aip - s * aiq;
                    sym[i * n + q] = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = sym[p * n + i], aqi = sym[q * n + i];
                    sym[p * n + i] = c * api - s * aqi;
                    sym[q * n + i] = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = evec[i * n + p], viq = evec[i * n + q];
                    evec[i * n + p] = c * vip - s * viq;
                    evec[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }
    std::size_t top = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (sym[i * n + i] > sym[top * n + top]) top = i;
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = evec[i * n + top];
    double norm = 0.0;
    for (const auto x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
}

std::vector<double> recompute_latents(const tablab::nn::Model& model,
                                      const tablab::nn::Batch& batch) {
    using tablab::nn::Arch;
    const auto& cfg = model.config();
    const auto& ps = model.params();
    const std::size_t rows = batch.rows;

    auto linear = [](const std::vector<double>& x, const std::vector<double>& w,
                     const std::vector<double>& b, std::size_t m, std::size_t in, std::size_t out) {
        std::vector<double> y(m * out);
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t o = 0; o < out; ++o) {
                double acc = b[o];
                for (std::size_t i = 0; i < in; ++i) acc += x[r * in + i] * w[i * out + o];
                y[r * out + o] = acc;
            }
        return y;
    };
    auto gelu = [](double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); };

    if (cfg.arch == Arch::Mlp) {
        // numeric-only batches here; the one-hot block stays zero otherwise
        const std::size_t d_in = ps.at("l0.w").value.shape[0];
        std::vector<double> cur(rows * d_in, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < batch.n_num; ++j)
                cur[r * d_in + j] = batch.numeric[r * batch.n_num + j];
        std::size_t in = d_in;
        std::size_t mask_off = 0;
        for (std::size_t l = 0; l < cfg.hidden_widths.size(); ++l) {
            const auto& w = ps.at("l" + std::to_string(l) + ".w");
            const auto& b = ps.at("l" + std::to_string(l) + ".b");
            const std::size_t out = cfg.hidden_widths[l];
            cur = linear(cur, w.value.v, b.value.v, rows, in, out);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t u = 0; u < out; ++u) {
                    auto& val = cur[r * out + u];
                    val = model.prune_mask()[mask_off + u] ? gelu(val) : 0.0;
                }
            mask_off += out;
            in = out;
        }
        return cur;
    }

    // transformer
    const std::size_t d = cfg.d_model, h = cfg.heads, dh = d / h;
    const std::size_t t = 1 + batch.n_num + batch.n_cat;
    std::vector<double> x(rows * t * d);
    const auto& cls = ps.at("tok.cls").value.v;
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy(cls.begin(), cls.end(), x.begin() + r * t * d);
        for (std::size_t j = 0; j < batch.n_num; ++j) {
            const auto& wn = ps.at("tok.num.w").value.v;
            const auto& bn = ps.at("tok.num.b").value.v;
            for (std::size_t u = 0; u < d; ++u)
                x[(r * t + 1 + j) * d + u] =
                    wn[j * d + u] * batch.numeric[r * batch.n_num + j] + bn[j * d + u];
        }
        for (std::size_t c = 0; c < batch.n_cat; ++c) {
            const auto& emb = ps.at("tok.cat" + std::to_string(c) + ".emb").value.v;
            const auto idx = static_cast<std::size_t>(batch.categorical[r * batch.n_cat + c]);
            for (std::size_t u = 0; u < d; ++u)
                x[(r * t + 1 + batch.n_num + c) * d + u] = emb[idx * d + u];
        }
    }

    auto layer_norm = [&](const std::vector<double>& in_, const std::vector<double>& g,
                          const std::vector<double>& b, std::size_t m, std::size_t w) {
        std::vector<double> out(m * w);
        for (std::size_t r = 0; r < m; ++r) {
            double mu = 0.0;
            for (std::size_t i = 0; i < w; ++i) mu += in_[r * w + i];
            mu /= static_cast<double>(w);
            double var = 0.0;
            for (std::size_t i = 0; i < w; ++i) {
                const double c = in_[r * w + i] - mu;
                var += c * c;
            }
            var /= static_cast<double>(w);
            const double inv = 1.0 / std::sqrt(var + 1e-5);
            for (std::size_t i = 0; i < w; ++i)
                out[r * w + i] = (in_[r * w + i] - mu) * inv * g[i] + b[i];
        }
        return out;
    };

    const auto& mask = model.prune_mask();
    for (std::size_t bl = 0; bl < cfg.blocks; ++bl) {
        const std::string pre = "b" + std::to_string(bl) + ".";
        const auto n1 = layer_norm(x, ps.at(pre + "ln1.g").value.v, ps.at(pre + "ln1.b").value.v,
                                   rows * t, d);
        const auto q = linear(n1, ps.at(pre + "attn.wq").value.v, ps.at(pre + "attn.bq").value.v,
                              rows * t, d, d);
        const std::vector<double> no_bias(d, 0.0);  // key projection carries no bias
        const auto k = linear(n1, ps.at(pre + "attn.wk").value.v, no_bias, rows * t, d, d);
        const auto v = linear(n1, ps.at(pre + "attn.wv").value.v, ps.at(pre + "attn.bv").value.v,
                              rows * t, d, d);
        std::vector<double> z(rows * t * d);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t hh = 0; hh < h; ++hh) {
                for (std::size_t ti = 0; ti < t; ++ti) {
                    std::vector<double> scores(t);
                    double mx = -1e300;
                    for (std::size_t tj = 0; tj < t; ++tj) {
                        double s = 0.0;
                        for (std::size_t u = 0; u < dh; ++u)
                            s += q[(r * t + ti) * d + hh * dh + u] * k[(r * t + tj) * d + hh * dh + u];
                        scores[tj] = s / std::sqrt(static_cast<double>(dh));
                        mx = std::max(mx, scores[tj]);
                    }
                    double den = 0.0;
                    for (auto& s : scores) {
                        s = std::exp(s - mx);
                        den += s;
                    }
                    for (std::size_t u = 0; u < dh; ++u) {
                        double acc = 0.0;
                        for (std::size_t tj = 0; tj < t; ++tj)
                            acc += scores[tj] / den * v[(r * t + tj) * d + hh * dh + u];
                        z[(r * t + ti) * d + hh * dh + u] = acc;
                    }
                }
            }
        const auto o = linear(z, ps.at(pre + "attn.wo").value.v, ps.at(pre + "attn.bo").value.v,
                              rows * t, d, d);
        for (std::size_t i = 0; i < rows * t * d; ++i) x[i] += o[i];

        const auto n2 = layer_norm(x, ps.at(pre + "ln2.g").value.v, ps.at(pre + "ln2.b").value.v,
                                   rows * t, d);
        auto h1 = linear(n2, ps.at(pre + "ffn.w1").value.v, ps.at(pre + "ffn.b1").value.v, rows * t,
                         d, cfg.ffn_hidden);
        for (std::size_t r = 0; r < rows * t; ++r)
            for (std::size_t u = 0; u < cfg.ffn_hidden; ++u) {
                auto& val = h1[r * cfg.ffn_hidden + u];
                val = mask[bl * cfg.ffn_hidden + u] ? gelu(val) : 0.0;
            }
        const auto f = linear(h1, ps.at(pre + "ffn.w2").value.v, ps.at(pre + "ffn.b2").value.v,
                              rows * t, cfg.ffn_hidden, d);
        for (std::size_t i = 0; i < rows * t * d; ++i) x[i] += f[i];
    }

    // final ln on cls rows + first head layer + gelu
    std::vector<double> xcls(rows * d);
    for (std::size_t r = 0; r < rows; ++r)
        std::copy(x.begin() + r * t * d, x.begin() + r * t * d + d, xcls.begin() + r * d);
    const auto nf = layer_norm(xcls, ps.at("lnf.g").value.v, ps.at("lnf.b").value.v, rows, d);
    auto lat = linear(nf, ps.at("head1.w").value.v, ps.at("head1.b").value.v, rows, d,
                      cfg.latent_width);
    for (auto& v : lat) v = gelu(v);
    return lat;
}

GradCheckResult finite_difference_check(tablab::nn::Model& model, const tablab::nn::Batch& batch,
                                        const std::vector<int>& labels, double h,
                                        std::size_t stride) {
    auto loss_fn = [&] {
        tablab::nn::Tensor logits;
        model.forward(batch, logits);
        double loss = 0.0;
        const std::size_t classes = logits.dim(1);
        for (std::size_t r = 0; r < batch.rows; ++r) {
            const double* row = logits.data() + r * classes;
            double mx = row[0];
            for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
            double den = 0.0;
            for (std::size_t c = 0; c < classes; ++c) den += std::exp(row[c] - mx);
            loss -= row[static_cast<std::size_t>(labels[r])] - mx - std::log(den);
        }
        return loss / static_cast<double>(batch.rows);
    };

    model.params().zero_grad();
    model.forward_backward(batch, labels.data());

    GradCheckResult res;
    for (auto& p : model.params().items()) {
        for (std::size_t i = 0; i < p.value.size(); i += stride) {
            const double keep = p.value.v[i];
            p.value.v[i] = keep + h;
            const double up = loss_fn();
            p.value.v[i] = keep - h;
            const double dn = loss_fn();
            p.value.v[i] = keep;
            const double fd = (up - dn) / (2.0 * h);
            const double an = p.grad.v[i];
            const double rel = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-8});
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_param = p.name + "[" + std::to_string(i) + "]";
            }
            res.checked++;
        }
    }
    return res;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double ks = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) ++i;
        else ++j;
        const double fa = static_cast<double>(i) / static_cast<double>(a.size());
        const double fb = static_cast<double>(j) / static_cast<double>(b.size());
        ks = std::max(ks, std::fabs(fa - fb));
    }
    return ks;
}

double brute_force_mode(const std::vector<double>& col, double precision) {
    std::map<long long, std::size_t> counts;
    for (const auto v : col) counts[static_cast<long long>(std::llround(v / precision))]++;
    long long best_key = counts.begin()->first;
    std::size_t best = 0;
    for (const auto& [k, c] : counts)
        if (c > best || (c == best && k < best_key)) {
            best = c;
            best_key = k;
        }
    return static_cast<double>(best_key) * precision;
}

}  // namespace oracles
