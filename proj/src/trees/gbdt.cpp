#include <algorithm>
#include <cmath>

#include "tablab/rng.hpp"
#include "tablab/trees.hpp"

// Gradient-boosted trees with histogram splits over 256 quantile bins and
// logistic loss; multiclass is one-vs-rest, one tree per class per round.

namespace tablab::trees {

namespace {

constexpr std::size_t kBins = 256;
constexpr double kLambda = 1.0;  // L2 on leaf weights
constexpr double kMinChildHess = 1e-6;

struct BinnedColumns {
    std::vector<std::vector<double>> cuts;   // inner cut points per feature
    std::vector<std::vector<std::uint16_t>> bins;  // bin index per training row
};

BinnedColumns build_bins(const data::Dataset& ds, const std::vector<std::size_t>& rows) {
    const std::size_t d = ds.schema.d();
    BinnedColumns bc;
    bc.cuts.resize(d);
    bc.bins.assign(d, std::vector<std::uint16_t>(rows.size()));
    std::vector<double> col(rows.size());
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < rows.size(); ++i) col[i] = ds.at(rows[i], j);
        std::vector<double> sorted = col;
        std::sort(sorted.begin(), sorted.end());
        auto& cuts = bc.cuts[j];
        for (std::size_t q = 1; q < kBins; ++q) {
            const double v = sorted[q * sorted.size() / kBins];
            if (cuts.empty() || v > cuts.back()) cuts.push_back(v);
        }
        if (!cuts.empty() && cuts.back() >= sorted.back()) cuts.pop_back();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto it = std::lower_bound(cuts.begin(), cuts.end(), col[i]);
            bc.bins[j][i] = static_cast<std::uint16_t>(it - cuts.begin());
        }
    }
    return bc;
}

struct TreeGrower {
    const BinnedColumns& bc;
    std::size_t d;
    const std::vector<double>& grad;
    const std::vector<double>& hess;
    std::vector<double>& gain_acc;
    double lr;
    Tree tree;

    static double leaf_weight(double g, double h) { return -g / (h + kLambda); }
    static double score(double g, double h) { return g * g / (h + kLambda); }

    int build(std::vector<std::size_t>& items, std::size_t depth, std::size_t max_depth) {
        double gsum = 0.0, hsum = 0.0;
        for (const auto i : items) {
            gsum += grad[i];
            hsum += hess[i];
        }
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        auto make_leaf = [&] {
            tree.nodes[node_id].leaf = {lr * leaf_weight(gsum, hsum)};
            return node_id;
        };
        if (depth >= max_depth || items.size() < 2) return make_leaf();

        int best_feature = -1;
        std::size_t best_bin = 0;
        double best_gain = 0.0;
        std::vector<double> gb(kBins), hb(kBins);
        for (std::size_t j = 0; j < d; ++j) {
            const std::size_t nb = bc.cuts[j].size() + 1;
            if (nb < 2) continue;
            std::fill(gb.begin(), gb.begin() + nb, 0.0);
            std::fill(hb.begin(), hb.begin() + nb, 0.0);
            for (const auto i : items) {
                const auto b = bc.bins[j][i];
                gb[b] += grad[i];
                hb[b] += hess[i];
            }
            double gl = 0.0, hl = 0.0;
            for (std::size_t b = 0; b + 1 < nb; ++b) {
                gl += gb[b];
                hl += hb[b];
                const double gr = gsum - gl, hr = hsum - hl;
                if (hl < kMinChildHess || hr < kMinChildHess) continue;
                const double g = 0.5 * (score(gl, hl) + score(gr, hr) - score(gsum, hsum));
                if (g > best_gain) {
                    best_gain = g;
                    best_feature = static_cast<int>(j);
                    best_bin = b;
                }
            }
        }
        if (best_feature < 0 || best_gain <= 0.0) return make_leaf();

        gain_acc[static_cast<std::size_t>(best_feature)] += best_gain;

        std::vector<std::size_t> left_items, right_items;
        for (const auto i : items) {
            if (bc.bins[static_cast<std::size_t>(best_feature)][i] <= best_bin)
                left_items.push_back(i);
            else
                right_items.push_back(i);
        }
        items.clear();
        items.shrink_to_fit();

        const double threshold = bc.cuts[static_cast<std::size_t>(best_feature)][best_bin];
        const int li = build(left_items, depth + 1, max_depth);
        const int ri = build(right_items, depth + 1, max_depth);
        auto& node = tree.nodes[node_id];
        node.feature = best_feature;
        node.threshold = threshold;
        node.left = li;
        node.right = ri;
        return node_id;
    }
};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TreeEnsemble train_gbdt(const data::Dataset& ds, const std::vector<std::size_t>& rows,
                        const TreeEnsembleConfig& cfg) {
    const std::size_t n = rows.size();
    const std::size_t d = ds.schema.d();
    const std::size_t k = ds.schema.label_classes;

    TreeEnsemble ens;
    ens.cfg = cfg;
    ens.d = d;
    ens.num_classes = k;
    ens.gain.assign(d, 0.0);
    ens.base_scores.resize(k);

    const BinnedColumns bc = build_bins(ds, rows);

    // one-vs-rest targets and raw scores per class
    std::vector<std::vector<double>> scores(k, std::vector<double>(n));
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t pos = 0;
        for (const auto r : rows)
            if (static_cast<std::size_t>(ds.labels[r]) == c) ++pos;
        const double p = std::clamp(static_cast<double>(pos) / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
        ens.base_scores[c] = std::log(p / (1.0 - p));
        std::fill(scores[c].begin(), scores[c].end(), ens.base_scores[c]);
    }

    std::vector<double> grad(n), hess(n);
    for (std::size_t round = 0; round < cfg.tree_count; ++round) {
        std::vector<std::size_t> items(n);
        for (std::size_t i = 0; i < n; ++i) items[i] = i;
        if (cfg.subsample < 1.0) {
            rng::Stream stream(cfg.seed, 0x47420000ULL + round);
            stream.shuffle(items.data(), items.size());
            items.resize(std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(cfg.subsample * static_cast<double>(n)))));
            std::sort(items.begin(), items.end());
        }
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                const double p = sigmoid(scores[c][i]);
                const double y = static_cast<std::size_t>(ds.labels[rows[i]]) == c ? 1.0 : 0.0;
                grad[i] = p - y;
                hess[i] = std::max(p * (1.0 - p), 1e-16);
            }
            TreeGrower grower{bc, d, grad, hess, ens.gain, cfg.learning_rate, {}};
            std::vector<std::size_t> node_items = items;
            grower.build(node_items, 0, cfg.max_depth);
            // refresh raw scores with the new tree (training rows route by bins)
            for (std::size_t i = 0; i < n; ++i) {
                int cur = 0;
                const auto& nodes = grower.tree.nodes;
                while (nodes[cur].feature >= 0) {
                    const auto j = static_cast<std::size_t>(nodes[cur].feature);
                    cur = ds.at(rows[i], j) <= nodes[cur].threshold ? nodes[cur].left : nodes[cur].right;
                }
                scores[c][i] += nodes[cur].leaf[0];
            }
            ens.trees.push_back(std::move(grower.tree));
        }
    }
    return ens;
}

}  // namespace tablab::trees
