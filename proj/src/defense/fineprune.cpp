#include <algorithm>
#include <cmath>
#include <numeric>

#include "tablab/defense.hpp"

namespace tablab::defense {

namespace {

double target_class_rate(nn::Model& model, const nn::ModelInput& in, int target_class) {
    const auto preds = nn::predict(model, in);
    std::size_t hits = 0;
    for (const auto p : preds)
        if (p == target_class) ++hits;
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

// per-block variant of the global ascending order: the lowest q fraction of
// each block's units
std::vector<std::uint8_t> per_block_mask(nn::Model& model, const nn::ModelInput& clean_eval,
                                         double fraction, std::size_t blocks) {
    const auto order = nn::prune_order(model, clean_eval);
    const std::size_t units = order.size();
    const std::size_t per_block = units / blocks;
    std::vector<std::uint8_t> mask(units, 1);
    std::vector<std::size_t> killed(blocks, 0);
    const auto quota = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(per_block)));
    for (const auto u : order) {
        const std::size_t bl = u / per_block;
        if (killed[bl] < quota) {
            mask[u] = 0;
            killed[bl]++;
        }
    }
    return mask;
}

}  // namespace

FinePruneResult fine_pruning_defense(const nn::Model& model, const nn::ModelInput& clean_eval,
                                     const nn::ModelInput& asr_eval, int target_class,
                                     const nn::ModelInput& finetune_set, const FinePruneConfig& cfg) {
    if (cfg.stop_fraction < 0.0 || cfg.stop_fraction > 1.0)
        throw ConfigError("fine-pruning: stop fraction must be in [0,1]");

    FinePruneResult res;
    auto work = model.clone();

    // one ranking from the undefended model; masks at increasing fractions
    // are then nested by construction
    const auto order = nn::prune_order(*work, clean_eval);
    const std::size_t units = order.size();
    const std::size_t blocks = work->config().arch == nn::Arch::TabTransformer
                                   ? work->config().blocks
                                   : work->config().hidden_widths.size();

    for (double f = 0.0; f <= cfg.stop_fraction + 1e-12; f += cfg.step) {
        const double fraction = std::min(f, 1.0);
        std::vector<std::uint8_t> mask(units, 1);
        if (cfg.per_block_quota) {
            mask = per_block_mask(*work, clean_eval, fraction, blocks);
        } else {
            const auto kill = static_cast<std::size_t>(
                std::llround(fraction * static_cast<double>(units)));
            for (std::size_t i = 0; i < kill; ++i) mask[order[i]] = 0;
        }
        work->set_prune_mask(std::move(mask));

        PruneCurvePoint pt;
        pt.fraction = fraction;
        pt.masked_units = units - std::accumulate(work->prune_mask().begin(),
                                                  work->prune_mask().end(), std::size_t{0});
        pt.cda = nn::accuracy(*work, clean_eval);
        pt.asr = target_class_rate(*work, asr_eval, target_class);
        res.curve.push_back(pt);
    }
    res.pruned_cda = res.curve.back().cda;
    res.pruned_asr = res.curve.back().asr;

    // fine-tune on clean data, 80/20 train/val, mask stays fixed
    const std::size_t nft = finetune_set.rows;
    if (nft < 5) throw ConfigError("fine-pruning: finetune set too small");
    const auto cut = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(nft)));
    auto slice = [&](std::size_t lo, std::size_t hi) {
        nn::ModelInput part;
        part.rows = hi - lo;
        part.n_num = finetune_set.n_num;
        part.n_cat = finetune_set.n_cat;
        part.numeric.assign(finetune_set.numeric.begin() + lo * part.n_num,
                            finetune_set.numeric.begin() + hi * part.n_num);
        part.categorical.assign(finetune_set.categorical.begin() + lo * part.n_cat,
                                finetune_set.categorical.begin() + hi * part.n_cat);
        part.labels.assign(finetune_set.labels.begin() + lo, finetune_set.labels.begin() + hi);
        return part;
    };
    const nn::ModelInput ft_train = slice(0, cut);
    const nn::ModelInput ft_val = slice(cut, nft);

    auto tuned = nn::finetune(std::move(work), ft_train, ft_val, cfg.finetune);
    res.final_cda = nn::accuracy(*tuned.model, clean_eval);
    res.final_asr = target_class_rate(*tuned.model, asr_eval, target_class);
    res.defended = std::move(tuned.model);
    return res;
}

}  // namespace tablab::defense
