#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "tablab/importance.hpp"

namespace tablab::importance {

std::vector<std::size_t> rank_descending(const std::vector<double>& phi) {
    std::vector<std::size_t> r(phi.size());
    std::iota(r.begin(), r.end(), 0);
    std::stable_sort(r.begin(), r.end(), [&](std::size_t a, std::size_t b) { return phi[a] > phi[b]; });
    return r;
}

double spearman(const std::vector<std::size_t>& ranking_a, const std::vector<std::size_t>& ranking_b) {
    const std::size_t d = ranking_a.size();
    if (ranking_b.size() != d || d < 2) throw ConfigError("spearman: rankings must match, length >= 2");
    std::vector<std::size_t> pos_a(d), pos_b(d);
    for (std::size_t i = 0; i < d; ++i) {
        pos_a[ranking_a[i]] = i;
        pos_b[ranking_b[i]] = i;
    }
    double s = 0.0;
    for (std::size_t f = 0; f < d; ++f) {
        const double diff = static_cast<double>(pos_a[f]) - static_cast<double>(pos_b[f]);
        s += diff * diff;
    }
    const double n = static_cast<double>(d);
    return 1.0 - 6.0 * s / (n * (n * n - 1.0));
}

ImportanceScores estimate_importance(const data::Dataset& ds, const data::SplitIndices& split,
                                     const std::vector<trees::TreeEnsembleConfig>& cfgs) {
    if (cfgs.empty()) throw ConfigError("estimate_importance: need at least one surrogate config");
    ImportanceScores out;
    const std::size_t d = ds.schema.d();
    out.averaged.assign(d, 0.0);
    for (const auto& cfg : cfgs) {
        const auto ens = trees::train_surrogate(ds, split, cfg);
        out.per_surrogate.push_back(ens.normalized_importance());
        for (std::size_t j = 0; j < d; ++j) out.averaged[j] += out.per_surrogate.back()[j];
    }
    for (auto& v : out.averaged) v /= static_cast<double>(cfgs.size());
    out.ranking = rank_descending(out.averaged);
    return out;
}

std::size_t RankStabilityReport::poisoned_rank_of(std::size_t feature) const {
    for (std::size_t i = 0; i < poisoned_ranking.size(); ++i)
        if (poisoned_ranking[i] == feature) return i;
    throw ConfigError("feature not present in ranking");
}

RankStabilityReport verify_rank_stability(const ImportanceScores& clean_scores,
                                          const data::Dataset& poisoned_ds,
                                          const data::SplitIndices& split,
                                          const std::vector<trees::TreeEnsembleConfig>& cfgs,
                                          std::size_t k) {
    if (clean_scores.averaged.size() != poisoned_ds.schema.d())
        throw ConfigError("verify_rank_stability: schema mismatch");
    const auto poisoned = estimate_importance(poisoned_ds, split, cfgs);

    RankStabilityReport rep;
    rep.k = k;
    rep.clean_ranking = clean_scores.ranking;
    rep.poisoned_ranking = poisoned.ranking;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            if (rep.clean_ranking[i] == rep.poisoned_ranking[j]) {
                rep.topk_overlap++;
                break;
            }
    rep.spearman_rho = spearman(rep.clean_ranking, rep.poisoned_ranking);
    return rep;
}

std::string to_json(const ImportanceScores& scores) {
    nlohmann::json j;
    j["per_surrogate"] = scores.per_surrogate;
    j["averaged"] = scores.averaged;
    j["ranking"] = scores.ranking;
    return j.dump(2);
}

}  // namespace tablab::importance
