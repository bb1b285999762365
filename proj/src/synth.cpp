#include <cmath>

#include "tablab/kernels.hpp"
#include "tablab/rng.hpp"
#include "tablab/synth.hpp"

namespace tablab::synth {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

constexpr std::uint64_t kFeatureStream = 0;
constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kLabelStream = 2;

}  // namespace

void SynthConfig::validate() const {
    if (d < 2) throw ConfigError("synth: d must be >= 2");
    if (n < 100) throw ConfigError("synth: n must be >= 100");
    if (noise_scale <= 0) throw ConfigError("synth: noise_scale must be positive");
    const auto w = effective_weights();
    for (std::size_t j = 0; j < w.size(); ++j) {
        if (w[j] <= 0) throw ConfigError("synth: weights must be positive");
        if (j > 0 && w[j] >= w[j - 1]) throw ConfigError("synth: weights must be strictly descending");
    }
}

std::vector<double> SynthConfig::effective_weights() const {
    if (!importance_weights.empty()) {
        if (importance_weights.size() != d) throw ConfigError("synth: weights length must equal d");
        return importance_weights;
    }
    std::vector<double> w(d);
    for (std::size_t j = 0; j < d; ++j) w[j] = std::pow(0.8, static_cast<double>(j));
    return w;
}

data::Dataset generate(const SynthConfig& cfg) {
    cfg.validate();
    const auto w = cfg.effective_weights();

    data::Dataset ds;
    for (std::size_t j = 0; j < cfg.d; ++j)
        ds.schema.features.push_back({"f" + std::to_string(j), data::FeatureKind::numeric(), {}});
    ds.schema.label_classes = 2;
    ds.n = cfg.n;
    ds.cells.resize(cfg.n * cfg.d);
    ds.labels.resize(cfg.n);

    for (std::size_t i = 0; i < cfg.n; ++i) {
        double* row = ds.cells.data() + i * cfg.d;
        for (std::size_t j = 0; j < cfg.d; ++j)
            row[j] = rng::normal_at(cfg.seed, kFeatureStream, i * cfg.d + j);
        const double noise = cfg.noise_scale * rng::normal_at(cfg.seed, kNoiseStream, i);
        const double p = sigmoid(kern::dot(w.data(), row, cfg.d) + noise);
        ds.labels[i] = rng::uniform_at(cfg.seed, kLabelStream, i) < p ? 1 : 0;
    }
    return ds;
}

double teacher_posterior(const SynthConfig& cfg, const double* row) {
    const auto w = cfg.effective_weights();
    const double a = kern::dot(w.data(), row, cfg.d);
    // E_nu[sigmoid(a + nu)], nu ~ N(0, noise_scale^2), Simpson over +-6 sigma
    const double s = cfg.noise_scale;
    const int m = 200;  // even
    const double lo = -6.0 * s, hi = 6.0 * s, h = (hi - lo) / m;
    double acc = 0.0;
    for (int k = 0; k <= m; ++k) {
        const double nu = lo + h * k;
        const double phi = std::exp(-0.5 * nu * nu / (s * s)) / (s * std::sqrt(2.0 * M_PI));
        const double f = sigmoid(a + nu) * phi;
        acc += (k == 0 || k == m) ? f : (k % 2 ? 4.0 * f : 2.0 * f);
    }
    return acc * h / 3.0;
}

double bayes_accuracy(const SynthConfig& cfg, const data::Dataset& ds) {
    double acc = 0.0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        const double p = teacher_posterior(cfg, ds.cells.data() + i * cfg.d);
        acc += std::max(p, 1.0 - p);
    }
    return acc / static_cast<double>(ds.n);
}

}  // namespace tablab::synth
