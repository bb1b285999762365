#pragma once

#include <string>
#include <vector>

#include "tablab/trees.hpp"

namespace tablab::importance {

struct ImportanceScores {
    std::vector<std::vector<double>> per_surrogate;  // each normalized to sum 1
    std::vector<double> averaged;                    // phi, arithmetic mean of the above
    std::vector<std::size_t> ranking;                // descending phi; ties -> lower index
};

struct RankStabilityReport {
    std::size_t k = 0;
    std::size_t topk_overlap = 0;  // |top-k(clean) intersect top-k(poisoned)|
    double spearman_rho = 0.0;
    std::vector<std::size_t> clean_ranking;
    std::vector<std::size_t> poisoned_ranking;

    std::size_t poisoned_rank_of(std::size_t feature) const;  // 0-based
};

ImportanceScores estimate_importance(const data::Dataset& ds, const data::SplitIndices& split,
                                     const std::vector<trees::TreeEnsembleConfig>& cfgs);

RankStabilityReport verify_rank_stability(const ImportanceScores& clean_scores,
                                          const data::Dataset& poisoned_ds,
                                          const data::SplitIndices& split,
                                          const std::vector<trees::TreeEnsembleConfig>& cfgs,
                                          std::size_t k = 3);

std::string to_json(const ImportanceScores& scores);

std::vector<std::size_t> rank_descending(const std::vector<double>& phi);
double spearman(const std::vector<std::size_t>& ranking_a, const std::vector<std::size_t>& ranking_b);

}  // namespace tablab::importance
