#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "tablab/defense.hpp"

// Brute-force trigger reverse engineering: overwrite one feature on every
// test row with each grid value and watch the predicted-class distribution.

namespace tablab::defense {

namespace {

ScanCell evaluate_value(nn::Model& model, const data::Dataset& test, const data::Standardizer& st,
                        std::size_t feature, double value) {
    data::Dataset probe = test;
    const std::size_t d = test.schema.d();
    for (std::size_t i = 0; i < probe.n; ++i) probe.cells[i * d + feature] = value;
    const auto input = nn::make_input(data::apply_standardizer(probe, st));
    const auto preds = nn::predict(model, input);

    ScanCell cell;
    cell.feature = feature;
    cell.value = value;
    cell.class_shares.assign(test.schema.label_classes, 0.0);
    for (const auto p : preds) cell.class_shares[static_cast<std::size_t>(p)] += 1.0;
    for (auto& s : cell.class_shares) s /= static_cast<double>(preds.size());
    cell.dominant_class = 0;
    for (std::size_t c = 1; c < cell.class_shares.size(); ++c)
        if (cell.class_shares[c] > cell.class_shares[static_cast<std::size_t>(cell.dominant_class)])
            cell.dominant_class = static_cast<int>(c);
    cell.dominance = cell.class_shares[static_cast<std::size_t>(cell.dominant_class)];
    return cell;
}

}  // namespace

ScanCell scan_single_value(nn::Model& model, const data::Dataset& test, const data::Standardizer& st,
                           std::size_t feature, double value) {
    return evaluate_value(model, test, st, feature, value);
}

SweepReport reverse_engineering_scan(nn::Model& model, const data::Dataset& test,
                                     const data::Standardizer& st, const ScanConfig& cfg,
                                     nn::Model* clean_reference) {
    if (test.n == 0) throw ConfigError("scan: empty test set");
    SweepReport rep;
    const std::size_t d = test.schema.d();
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> values;
        if (test.schema.features[j].kind.is_numeric()) {
            const auto sup = data::compute_support(test, j);
            const double range = sup.max - sup.min;
            const double lo = sup.min - cfg.overshoot * range;
            const double hi = sup.max + cfg.overshoot * range;
            for (std::size_t g = 0; g < cfg.grid_points; ++g)
                values.push_back(cfg.grid_points == 1
                                     ? lo
                                     : lo + (hi - lo) * static_cast<double>(g) /
                                               static_cast<double>(cfg.grid_points - 1));
        } else {
            // categorical: every valid index, no overshoot
            for (std::size_t c = 0; c < test.schema.features[j].kind.cardinality; ++c)
                values.push_back(static_cast<double>(c));
        }
        for (const auto v : values) {
            ScanCell cell = evaluate_value(model, test, st, j, v);
            if (cell.dominance >= cfg.dominance_threshold) {
                ScanFlag flag;
                flag.feature = j;
                flag.value = v;
                flag.dominant_class = cell.dominant_class;
                flag.dominance = cell.dominance;
                if (clean_reference) {
                    const ScanCell ref = evaluate_value(*clean_reference, test, st, j, v);
                    flag.clean_share =
                        ref.class_shares[static_cast<std::size_t>(cell.dominant_class)];
                    if (cell.dominance - flag.clean_share >= cfg.differential_margin)
                        rep.differential_flags.push_back(flag);
                }
                rep.absolute_flags.push_back(flag);
            }
            rep.cells.push_back(std::move(cell));
        }
    }
    return rep;
}

std::string to_json(const SweepReport& rep) {
    nlohmann::json j;
    j["cells"] = nlohmann::json::array();
    for (const auto& c : rep.cells) {
        nlohmann::json cj;
        cj["feature"] = c.feature;
        cj["value"] = c.value;
        cj["class_shares"] = c.class_shares;
        cj["dominant_class"] = c.dominant_class;
        cj["dominance"] = c.dominance;
        j["cells"].push_back(std::move(cj));
    }
    auto flags = [](const std::vector<ScanFlag>& fs) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& f : fs) {
            nlohmann::json fj;
            fj["feature"] = f.feature;
            fj["value"] = f.value;
            fj["dominant_class"] = f.dominant_class;
            fj["dominance"] = f.dominance;
            if (f.clean_share >= 0.0) fj["clean_share"] = f.clean_share;
            arr.push_back(std::move(fj));
        }
        return arr;
    };
    j["absolute_flags"] = flags(rep.absolute_flags);
    j["differential_flags"] = flags(rep.differential_flags);
    return j.dump(2);
}

}  // namespace tablab::defense
