#include <algorithm>
#include <cmath>

#include "tablab/rng.hpp"
#include "tablab/trees.hpp"

namespace tablab::trees {

void TreeEnsembleConfig::validate() const {
    if (tree_count < 1) throw ConfigError("tree_count must be >= 1");
    if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
    if (kind == EnsembleKind::GradientBoosted && (learning_rate <= 0 || learning_rate > 1))
        throw ConfigError("learning_rate must be in (0,1]");
    if (subsample <= 0 || subsample > 1) throw ConfigError("subsample must be in (0,1]");
}

const TreeNode& Tree::route(const double* row) const {
    int cur = 0;
    while (nodes[cur].feature >= 0)
        cur = row[nodes[cur].feature] <= nodes[cur].threshold ? nodes[cur].left : nodes[cur].right;
    return nodes[cur];
}

int TreeEnsemble::predict(const double* row) const {
    const auto scores = raw_scores(row);
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c)
        if (scores[c] > scores[best]) best = c;
    return static_cast<int>(best);
}

std::vector<double> TreeEnsemble::raw_scores(const double* row) const {
    std::vector<double> scores(num_classes, 0.0);
    if (cfg.kind == EnsembleKind::RandomForest) {
        for (const auto& t : trees) {
            const auto& leaf = t.route(row).leaf;
            for (std::size_t c = 0; c < num_classes; ++c) scores[c] += leaf[c];
        }
    } else {
        scores = base_scores;
        // trees are stored round-major with one tree per class
        for (std::size_t i = 0; i < trees.size(); ++i)
            scores[i % num_classes] += trees[i].route(row).leaf[0];
    }
    return scores;
}

std::vector<double> TreeEnsemble::normalized_importance() const {
    std::vector<double> out(d, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) total += gain[j];
    if (total <= 0.0) {
        for (auto& v : out) v = 1.0 / static_cast<double>(d);
        return out;
    }
    for (std::size_t j = 0; j < d; ++j) out[j] = gain[j] / total;
    return out;
}

double TreeEnsemble::accuracy(const data::Dataset& ds, const std::vector<std::size_t>& rows) const {
    if (rows.empty()) throw StageError("accuracy over empty row set");
    std::size_t hit = 0;
    for (const auto r : rows)
        if (predict(ds.cells.data() + r * ds.schema.d()) == ds.labels[r]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(rows.size());
}

namespace rf_detail {

struct Builder {
    const data::Dataset& ds;
    std::size_t d;
    std::size_t num_classes;
    std::size_t root_count;
    Tree tree;
    std::vector<double>& gain;  // shared accumulator across the forest

    double gini(const std::vector<std::size_t>& counts, std::size_t n) const {
        if (n == 0) return 0.0;
        double g = 1.0;
        for (const auto c : counts) {
            const double p = static_cast<double>(c) / static_cast<double>(n);
            g -= p * p;
        }
        return g;
    }

    int build(std::vector<std::size_t>& rows, std::size_t depth, std::size_t max_depth) {
        const std::size_t n = rows.size();
        std::vector<std::size_t> counts(num_classes, 0);
        for (const auto r : rows) counts[static_cast<std::size_t>(ds.labels[r])]++;
        const double g_parent = gini(counts, n);

        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        auto make_leaf = [&] {
            auto& node = tree.nodes[node_id];
            node.leaf.resize(num_classes);
            for (std::size_t c = 0; c < num_classes; ++c)
                node.leaf[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
            return node_id;
        };

        if (depth >= max_depth || n < 2 || g_parent == 0.0) return make_leaf();

        // exact split search: best Gini decrease over all features
        int best_feature = -1;
        double best_threshold = 0.0, best_decrease = 0.0;
        std::vector<std::pair<double, int>> vals(n);
        std::vector<std::size_t> left_counts(num_classes);
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t i = 0; i < n; ++i)
                vals[i] = {ds.at(rows[i], j), ds.labels[rows[i]]};
            std::sort(vals.begin(), vals.end());
            if (vals.front().first == vals.back().first) continue;
            std::fill(left_counts.begin(), left_counts.end(), 0);
            for (std::size_t i = 1; i < n; ++i) {
                left_counts[static_cast<std::size_t>(vals[i - 1].second)]++;
                if (vals[i].first == vals[i - 1].first) continue;
                double gl = 1.0, gr = 1.0;
                const double nl = static_cast<double>(i), nr = static_cast<double>(n - i);
                for (std::size_t c = 0; c < num_classes; ++c) {
                    const double pl = static_cast<double>(left_counts[c]) / nl;
                    const double pr = static_cast<double>(counts[c] - left_counts[c]) / nr;
                    gl -= pl * pl;
                    gr -= pr * pr;
                }
                const double dec = g_parent - (nl * gl + nr * gr) / static_cast<double>(n);
                if (dec > best_decrease) {
                    best_decrease = dec;
                    best_feature = static_cast<int>(j);
                    double thr = 0.5 * (vals[i - 1].first + vals[i].first);
                    if (!(thr < vals[i].first)) thr = vals[i - 1].first;
                    best_threshold = thr;
                }
            }
        }
        if (best_feature < 0 || best_decrease <= 0.0) return make_leaf();

        gain[static_cast<std::size_t>(best_feature)] +=
            best_decrease * static_cast<double>(n) / static_cast<double>(root_count);

        std::vector<std::size_t> left_rows, right_rows;
        for (const auto r : rows) {
            if (ds.at(r, static_cast<std::size_t>(best_feature)) <= best_threshold)
                left_rows.push_back(r);
            else
                right_rows.push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        const int li = build(left_rows, depth + 1, max_depth);
        const int ri = build(right_rows, depth + 1, max_depth);
        auto& node = tree.nodes[node_id];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = li;
        node.right = ri;
        return node_id;
    }
};

}  // namespace rf_detail

TreeEnsemble train_random_forest(const data::Dataset& ds, const std::vector<std::size_t>& rows,
                                 const TreeEnsembleConfig& cfg) {
    TreeEnsemble ens;
    ens.cfg = cfg;
    ens.d = ds.schema.d();
    ens.num_classes = ds.schema.label_classes;
    ens.gain.assign(ens.d, 0.0);

    const std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(
        std::llround(cfg.subsample * static_cast<double>(rows.size()))));
    for (std::size_t t = 0; t < cfg.tree_count; ++t) {
        rng::Stream stream(cfg.seed, 0x52460000ULL + t);
        std::vector<std::size_t> sample(m);
        for (std::size_t i = 0; i < m; ++i)  // bootstrap, with replacement
            sample[i] = rows[stream.next_below(rows.size())];
        rf_detail::Builder b{ds, ens.d, ens.num_classes, sample.size(), {}, ens.gain};
        b.build(sample, 0, cfg.max_depth);
        ens.trees.push_back(std::move(b.tree));
    }
    return ens;
}

TreeEnsemble train_gbdt(const data::Dataset& ds, const std::vector<std::size_t>& rows,
                        const TreeEnsembleConfig& cfg);  // gbdt.cpp

TreeEnsemble train_ensemble(const data::Dataset& ds, const std::vector<std::size_t>& rows,
                            const TreeEnsembleConfig& cfg) {
    cfg.validate();
    if (rows.empty()) throw StageError("train_ensemble: empty training partition");
    int first = ds.labels[rows[0]];
    bool single_class = true;
    for (const auto r : rows)
        if (ds.labels[r] != first) {
            single_class = false;
            break;
        }
    if (single_class) throw StageError("train_ensemble: degenerate single-class training data");
    return cfg.kind == EnsembleKind::RandomForest ? train_random_forest(ds, rows, cfg)
                                                  : train_gbdt(ds, rows, cfg);
}

}  // namespace tablab::trees
