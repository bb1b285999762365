#pragma once

#include <cstdint>
#include <vector>

#include "tablab/data.hpp"

namespace tablab::trees {

enum class EnsembleKind { RandomForest, GradientBoosted };

struct TreeEnsembleConfig {
    EnsembleKind kind = EnsembleKind::RandomForest;
    std::size_t tree_count = 50;
    std::size_t max_depth = 8;
    double learning_rate = 0.3;  // boosted only
    double subsample = 1.0;      // row fraction per tree/round
    std::uint64_t seed = 0;

    void validate() const;
};

struct TreeNode {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;  // x <= threshold goes left
    int left = -1;
    int right = -1;
    std::vector<double> leaf;  // RF: class distribution; GBDT: single raw value
};

struct Tree {
    std::vector<TreeNode> nodes;
    const TreeNode& route(const double* row) const;
};

// Trained forest / boosted ensemble over a numeric view of the table
// (categorical features are treated as ordinals by the surrogates).
struct TreeEnsemble {
    TreeEnsembleConfig cfg;
    std::size_t d = 0;
    std::size_t num_classes = 0;
    std::vector<Tree> trees;          // GBDT multiclass: round-major, one tree per class per round
    std::vector<double> base_scores;  // GBDT: initial raw score per class
    std::vector<double> gain;         // accumulated split gain per feature

    int predict(const double* row) const;
    std::vector<double> raw_scores(const double* row) const;

    // gain normalized to sum 1 (uniform when the ensemble never split)
    std::vector<double> normalized_importance() const;

    double accuracy(const data::Dataset& ds, const std::vector<std::size_t>& rows) const;
};

// Fit on the given rows. Throws StageError when the training rows hold a
// single class.
TreeEnsemble train_ensemble(const data::Dataset& ds, const std::vector<std::size_t>& rows,
                            const TreeEnsembleConfig& cfg);

inline TreeEnsemble train_surrogate(const data::Dataset& ds, const data::SplitIndices& split,
                                    const TreeEnsembleConfig& cfg) {
    return train_ensemble(ds, split.train, cfg);
}

}  // namespace tablab::trees
