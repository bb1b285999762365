#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "tablab/defense.hpp"
#include "tablab/kernels.hpp"

namespace tablab::defense {

PowerIterationResult top_right_singular_vector(const double* centered, std::size_t n, std::size_t l,
                                               double tolerance, std::size_t max_iterations) {
    PowerIterationResult res;
    // gram = X^T X, l x l
    std::vector<double> gram(l * l, 0.0);
    kern::gemm_tn(centered, centered, gram.data(), l, n, l);

    double frob = 0.0;
    for (const auto g : gram) frob += g * g;
    if (frob == 0.0) {
        res.degenerate = true;
        res.vector.assign(l, 0.0);
        return res;
    }

    std::vector<double> v(l, 1.0 / std::sqrt(static_cast<double>(l)));  // fixed start
    std::vector<double> w(l);
    for (std::size_t it = 0; it < max_iterations; ++it) {
        kern::matvec(gram.data(), v.data(), w.data(), l, l);
        const double rayleigh = kern::dot(v.data(), w.data(), l);
        res.rayleigh_trace.push_back(rayleigh);
        const double norm = std::sqrt(kern::dot(w.data(), w.data(), l));
        if (norm == 0.0) {
            res.degenerate = true;
            break;
        }
        double delta = 0.0;
        for (std::size_t i = 0; i < l; ++i) {
            w[i] /= norm;
            const double d = w[i] - v[i];
            delta += d * d;
        }
        v = w;
        res.iterations = it + 1;
        if (std::sqrt(delta) <= tolerance) break;
    }
    kern::matvec(gram.data(), v.data(), w.data(), l, l);
    res.rayleigh = kern::dot(v.data(), w.data(), l);
    res.vector = std::move(v);
    return res;
}

double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& positive) {
    if (scores.size() != positive.size()) throw ConfigError("auroc: length mismatch");
    std::size_t npos = 0;
    for (const auto p : positive) npos += p ? 1 : 0;
    const std::size_t nneg = scores.size() - npos;
    if (npos == 0 || nneg == 0) throw ConfigError("auroc: need both classes");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // average ranks over ties
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
        for (std::size_t k = i; k <= j; ++k)
            if (positive[order[k]]) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double u = rank_sum_pos - static_cast<double>(npos) * (static_cast<double>(npos) + 1.0) / 2.0;
    return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

SpectralReport spectral_signatures(const nn::Tensor& latents, const std::vector<int>& labels,
                                   const SpectralConfig& cfg,
                                   const std::vector<std::size_t>* ground_truth_mask) {
    if (latents.shape.size() != 2 || latents.dim(0) != labels.size())
        throw ConfigError("spectral: latents must be (n, L) with one label per row");
    const std::size_t l = latents.dim(1);

    SpectralReport rep;
    if (cfg.scope == SpectralScope::PerClass) {
        rep.analyzed_class = cfg.analyzed_class;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cfg.analyzed_class) rep.analyzed_rows.push_back(i);
    } else {
        rep.analyzed_class = -1;
        rep.analyzed_rows.resize(labels.size());
        std::iota(rep.analyzed_rows.begin(), rep.analyzed_rows.end(), 0);
    }
    const std::size_t n = rep.analyzed_rows.size();
    if (n < 2) throw ConfigError("spectral: need at least 2 samples in the analyzed class");

    // center the analyzed rows by their mean
    std::vector<double> centered(n * l);
    std::vector<double> mean(l, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        kern::vadd(latents.data() + rep.analyzed_rows[r] * l, mean.data(), l);
    kern::scale(1.0 / static_cast<double>(n), mean.data(), l);
    for (std::size_t r = 0; r < n; ++r) {
        const double* src = latents.data() + rep.analyzed_rows[r] * l;
        double* dst = centered.data() + r * l;
        for (std::size_t c = 0; c < l; ++c) dst[c] = src[c] - mean[c];
    }

    auto pi = top_right_singular_vector(centered.data(), n, l, cfg.tolerance, cfg.max_iterations);
    rep.degenerate = pi.degenerate;
    rep.iterations = pi.iterations;
    rep.rayleigh_trace = std::move(pi.rayleigh_trace);
    rep.singular_vector = pi.vector;

    rep.scores.resize(n);
    if (rep.degenerate) {
        std::fill(rep.scores.begin(), rep.scores.end(), 0.0);
    } else {
        for (std::size_t r = 0; r < n; ++r)
            rep.scores[r] = std::fabs(kern::dot(centered.data() + r * l, rep.singular_vector.data(), l));
    }

    // ground-truth flags restricted to the analyzed rows
    std::vector<std::uint8_t> is_poisoned(n, 0);
    std::size_t poisoned_here = 0;
    if (ground_truth_mask) {
        for (std::size_t r = 0; r < n; ++r) {
            const bool hit = std::binary_search(ground_truth_mask->begin(), ground_truth_mask->end(),
                                                rep.analyzed_rows[r]);
            is_poisoned[r] = hit ? 1 : 0;
            poisoned_here += hit ? 1 : 0;
        }
        if (poisoned_here > 0 && poisoned_here < n) rep.auroc = auroc(rep.scores, is_poisoned);
    }

    std::size_t budget = cfg.suspected_budget;
    if (budget == 0 && ground_truth_mask) budget = poisoned_here;
    auto remove_count = static_cast<std::size_t>(
        std::llround(cfg.removal_multiplier * static_cast<double>(budget)));
    remove_count = std::min(remove_count, n - 1);  // never empty the class
    if (remove_count > 0 && !rep.degenerate) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return rep.scores[a] > rep.scores[b]; });
        for (std::size_t k = 0; k < remove_count; ++k)
            rep.removed.push_back(rep.analyzed_rows[order[k]]);
        std::sort(rep.removed.begin(), rep.removed.end());
    }

    // 50-bin score histogram, clean vs poisoned
    constexpr std::size_t kBins = 50;
    const double lo = *std::min_element(rep.scores.begin(), rep.scores.end());
    const double hi = *std::max_element(rep.scores.begin(), rep.scores.end());
    const double width = hi > lo ? hi - lo : 1.0;
    rep.hist_edges.resize(kBins + 1);
    for (std::size_t b = 0; b <= kBins; ++b)
        rep.hist_edges[b] = lo + width * static_cast<double>(b) / static_cast<double>(kBins);
    rep.hist_clean.assign(kBins, 0);
    rep.hist_poisoned.assign(kBins, 0);
    for (std::size_t r = 0; r < n; ++r) {
        auto b = static_cast<std::size_t>((rep.scores[r] - lo) / width * kBins);
        if (b >= kBins) b = kBins - 1;
        (is_poisoned[r] ? rep.hist_poisoned : rep.hist_clean)[b]++;
    }
    return rep;
}

std::pair<double, double> evaluate_spectral_removal(std::size_t train_rows,
                                                    const SpectralReport& report,
                                                    const RetrainFn& retrain) {
    std::vector<std::size_t> survivors;
    survivors.reserve(train_rows - report.removed.size());
    for (std::size_t i = 0; i < train_rows; ++i)
        if (!std::binary_search(report.removed.begin(), report.removed.end(), i))
            survivors.push_back(i);
    if (survivors.empty()) throw StageError("spectral removal emptied the training set");
    return retrain(survivors);
}

std::string to_json(const SpectralReport& rep) {
    nlohmann::json j;
    j["analyzed_class"] = rep.analyzed_class;
    j["analyzed_rows"] = rep.analyzed_rows;
    j["scores"] = rep.scores;
    j["singular_vector"] = rep.singular_vector;
    j["removed"] = rep.removed;
    j["auroc"] = rep.auroc;
    j["degenerate"] = rep.degenerate;
    j["iterations"] = rep.iterations;
    j["hist_edges"] = rep.hist_edges;
    j["hist_clean"] = rep.hist_clean;
    j["hist_poisoned"] = rep.hist_poisoned;
    return j.dump(2);
}

void write_histogram_svg(const SpectralReport& rep, const std::string& path) {
    const std::size_t bins = rep.hist_clean.size();
    std::size_t peak = 1;
    for (std::size_t b = 0; b < bins; ++b)
        peak = std::max({peak, rep.hist_clean[b], rep.hist_poisoned[b]});

    const double w = 640.0, h = 400.0, ml = 50.0, mb = 40.0, mt = 20.0, mr = 20.0;
    const double pw = (w - ml - mr) / static_cast<double>(bins);
    const double ph = h - mt - mb;

    std::ofstream out(path);
    if (!out) throw StageError("cannot write svg: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    auto bar = [&](std::size_t b, std::size_t count, const char* color, double shift) {
        if (count == 0) return;
        const double bh = ph * static_cast<double>(count) / static_cast<double>(peak);
        out << "<rect x=\"" << ml + pw * static_cast<double>(b) + shift << "\" y=\"" << mt + ph - bh
            << "\" width=\"" << pw * 0.45 << "\" height=\"" << bh << "\" fill=\"" << color
            << "\" fill-opacity=\"0.7\"/>\n";
    };
    for (std::size_t b = 0; b < bins; ++b) {
        bar(b, rep.hist_clean[b], "#4878cf", 0.0);
        bar(b, rep.hist_poisoned[b], "#d65f5f", pw * 0.45);
    }
    out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << w - mr << "\" y2=\""
        << mt + ph << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << ml << "\" y=\"" << h - 8 << "\" font-size=\"12\">correlation score ("
        << rep.hist_edges.front() << " .. " << rep.hist_edges.back() << ")</text>\n";
    out << "<text x=\"" << w - 220 << "\" y=\"" << mt + 12
        << "\" font-size=\"12\" fill=\"#4878cf\">clean</text>\n";
    out << "<text x=\"" << w - 160 << "\" y=\"" << mt + 12
        << "\" font-size=\"12\" fill=\"#d65f5f\">poisoned</text>\n";
    out << "</svg>\n";
}

}  // namespace tablab::defense
