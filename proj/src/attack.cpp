#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "tablab/attack.hpp"
#include "tablab/rng.hpp"

namespace tablab::attack {

void TriggerSpec::validate() const {
    if (features.empty()) throw ConfigError("trigger: empty feature set");
    if (features.size() != values.size()) throw ConfigError("trigger: features/values length mismatch");
    std::vector<std::size_t> sorted = features;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ConfigError("trigger: duplicate feature index");
}

void TriggerSpec::apply(data::Dataset& ds, std::size_t row) const {
    for (std::size_t i = 0; i < features.size(); ++i) ds.at(row, features[i]) = values[i];
}

void PoisonConfig::validate() const {
    if (epsilon < 0 || epsilon > 1) throw ConfigError("poison: epsilon must be in [0,1]");
    if (target_class < 0) throw ConfigError("poison: target_class must be >= 0");
}

std::vector<std::size_t> select_trigger_features(const importance::ImportanceScores& scores,
                                                 const data::Schema& schema, std::size_t k,
                                                 Direction direction, std::size_t rank_offset) {
    if (k == 0) throw ConfigError("select_trigger_features: k must be >= 1");
    if (k > schema.d()) throw ConfigError("select_trigger_features: k exceeds feature count");
    std::vector<std::size_t> order = scores.ranking;
    if (direction == Direction::LeastImportant) std::reverse(order.begin(), order.end());

    std::vector<std::size_t> out;
    std::size_t skipped = 0;
    for (const auto f : order) {
        if (!schema.features[f].kind.is_numeric()) continue;
        if (skipped < rank_offset) {
            ++skipped;
            continue;
        }
        out.push_back(f);
        if (out.size() == k) return out;
    }
    throw StageError("select_trigger_features: fewer than k numeric features available");
}

TriggerSpec craft_out_of_bounds(const std::vector<data::FeatureSupport>& supports, double alpha) {
    if (alpha <= 0) throw ConfigError("craft_out_of_bounds: alpha must be positive");
    TriggerSpec trig;
    trig.kind = TriggerKind::OutOfBounds;
    trig.alpha = alpha;
    for (const auto& s : supports) {
        if (!(s.max > s.min))
            throw StageError("craft_out_of_bounds: constant feature " + std::to_string(s.feature) +
                             " has no out-of-bounds value");
        trig.features.push_back(s.feature);
        trig.values.push_back(s.max + alpha * (s.max - s.min));
    }
    trig.validate();
    return trig;
}

TriggerSpec craft_in_bounds(const std::vector<data::FeatureSupport>& supports, InBoundsStat statistic) {
    TriggerSpec trig;
    trig.kind = TriggerKind::InBounds;
    trig.statistic = statistic;
    for (const auto& s : supports) {
        trig.features.push_back(s.feature);
        switch (statistic) {
            case InBoundsStat::Min: trig.values.push_back(s.min); break;
            case InBoundsStat::Max: trig.values.push_back(s.max); break;
            case InBoundsStat::Mean: trig.values.push_back(s.mean); break;
            case InBoundsStat::Median: trig.values.push_back(s.median); break;
            case InBoundsStat::Mode: trig.values.push_back(s.mode); break;
        }
    }
    trig.validate();
    return trig;
}

TriggerSpec craft_adaptive(const data::Dataset& ds, const std::vector<std::size_t>& features,
                           int target_class) {
    std::vector<std::size_t> target_rows;
    for (std::size_t i = 0; i < ds.n; ++i)
        if (ds.labels[i] == target_class) target_rows.push_back(i);
    if (target_rows.empty()) throw StageError("craft_adaptive: empty target class");

    TriggerSpec trig;
    trig.kind = TriggerKind::AdaptiveTargetMode;
    for (const auto j : features) {
        if (!ds.schema.features[j].kind.is_numeric())
            throw ConfigError("craft_adaptive: categorical trigger feature");
        std::vector<double> col(target_rows.size());
        for (std::size_t i = 0; i < target_rows.size(); ++i) col[i] = ds.at(target_rows[i], j);
        trig.features.push_back(j);
        trig.values.push_back(data::compute_support(col, j).mode);
    }
    trig.validate();
    return trig;
}

std::size_t verify_collision(const data::Dataset& ds, const TriggerSpec& trig,
                             const std::vector<double>& tolerance) {
    trig.validate();
    if (!tolerance.empty() && tolerance.size() != trig.features.size())
        throw ConfigError("verify_collision: tolerance length mismatch");
    std::size_t count = 0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        bool hit = true;
        for (std::size_t t = 0; t < trig.features.size(); ++t) {
            const double tol = tolerance.empty() ? 0.0 : tolerance[t];
            if (std::fabs(ds.at(i, trig.features[t]) - trig.values[t]) > tol) {
                hit = false;
                break;
            }
        }
        if (hit) ++count;
    }
    return count;
}

PoisonResult poison_dataset(const data::Dataset& ds, const TriggerSpec& trig, const PoisonConfig& cfg) {
    trig.validate();
    cfg.validate();
    if (static_cast<std::size_t>(cfg.target_class) >= ds.schema.label_classes)
        throw ConfigError("poison: target class out of range");

    // candidate rows: clean-label mode may only touch rows already labeled y_t
    std::vector<std::size_t> candidates;
    if (cfg.label_mode == LabelMode::Clean) {
        for (std::size_t i = 0; i < ds.n; ++i)
            if (ds.labels[i] == cfg.target_class) candidates.push_back(i);
    } else {
        candidates.resize(ds.n);
        for (std::size_t i = 0; i < ds.n; ++i) candidates[i] = i;
    }

    std::size_t basis = ds.n;
    if (cfg.rate_basis == RateBasis::TargetClassOnly) {
        basis = 0;
        for (std::size_t i = 0; i < ds.n; ++i)
            if (ds.labels[i] == cfg.target_class) ++basis;
    }
    const auto m = static_cast<std::size_t>(std::llround(cfg.epsilon * static_cast<double>(basis)));
    if (m > candidates.size())
        throw StageError("poison: m=" + std::to_string(m) + " exceeds candidate population " +
                         std::to_string(candidates.size()));

    PoisonResult res;
    res.collision_count = verify_collision(ds, trig);
    res.m = m;

    // uniform sample without replacement, seeded
    rng::Stream stream(cfg.seed, 0x504f4953ULL);
    std::vector<std::size_t> chosen = candidates;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(stream.next_below(chosen.size() - i));
        std::swap(chosen[i], chosen[j]);
    }
    chosen.resize(m);
    std::sort(chosen.begin(), chosen.end());

    res.train = ds;
    if (cfg.append_mode) {
        const std::size_t d = ds.schema.d();
        for (const auto r : chosen) {
            res.train.cells.insert(res.train.cells.end(), ds.cells.begin() + r * d,
                                   ds.cells.begin() + (r + 1) * d);
            res.train.labels.push_back(cfg.label_mode == LabelMode::Dirty ? cfg.target_class
                                                                          : ds.labels[r]);
            const std::size_t new_row = res.train.n++;
            trig.apply(res.train, new_row);
            res.mask.push_back(new_row);
        }
    } else {
        for (const auto r : chosen) {
            trig.apply(res.train, r);
            if (cfg.label_mode == LabelMode::Dirty) res.train.labels[r] = cfg.target_class;
            res.mask.push_back(r);
        }
    }
    res.effective_epsilon = static_cast<double>(m) / static_cast<double>(res.train.n);
    return res;
}

data::Dataset make_asr_eval_set(const data::Dataset& test, const TriggerSpec& trig, int target_class) {
    trig.validate();
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < test.n; ++i)
        if (test.labels[i] != target_class) keep.push_back(i);
    if (keep.empty()) throw StageError("make_asr_eval_set: every test row already has the target label");
    data::Dataset out = test.select(keep);
    for (std::size_t i = 0; i < out.n; ++i) trig.apply(out, i);
    return out;
}

namespace {

const char* kind_names[] = {"out_of_bounds", "in_bounds", "adaptive_target_mode", "explicit"};
const char* stat_names[] = {"min", "max", "mean", "median", "mode"};

TriggerKind kind_from_string(const std::string& s) {
    for (int i = 0; i < 4; ++i)
        if (s == kind_names[i]) return static_cast<TriggerKind>(i);
    throw ConfigError("unknown trigger kind: " + s);
}

InBoundsStat stat_from_string(const std::string& s) {
    for (int i = 0; i < 5; ++i)
        if (s == stat_names[i]) return static_cast<InBoundsStat>(i);
    throw ConfigError("unknown in-bounds statistic: " + s);
}

}  // namespace

const char* to_string(TriggerKind k) { return kind_names[static_cast<int>(k)]; }
const char* to_string(InBoundsStat s) { return stat_names[static_cast<int>(s)]; }

std::string to_json(const TriggerSpec& trig) {
    nlohmann::json j;
    j["features"] = trig.features;
    j["values"] = trig.values;
    j["kind"] = to_string(trig.kind);
    if (trig.kind == TriggerKind::OutOfBounds) j["alpha"] = trig.alpha;
    if (trig.kind == TriggerKind::InBounds) j["statistic"] = to_string(trig.statistic);
    return j.dump(2);
}

TriggerSpec trigger_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("trigger json: ") + e.what());
    }
    TriggerSpec trig;
    trig.features = j.at("features").get<std::vector<std::size_t>>();
    trig.values = j.at("values").get<std::vector<double>>();
    trig.kind = kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("alpha")) trig.alpha = j["alpha"].get<double>();
    if (j.contains("statistic")) trig.statistic = stat_from_string(j["statistic"].get<std::string>());
    trig.validate();
    return trig;
}

std::string to_json(const PoisonConfig& cfg) {
    nlohmann::json j;
    j["epsilon"] = cfg.epsilon;
    j["target_class"] = cfg.target_class;
    j["label_mode"] = cfg.label_mode == LabelMode::Dirty ? "dirty" : "clean";
    j["rate_basis"] = cfg.rate_basis == RateBasis::WholeTrain ? "whole_train" : "target_class_only";
    j["append_mode"] = cfg.append_mode;
    j["seed"] = cfg.seed;
    return j.dump(2);
}

PoisonConfig poison_config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("poison config json: ") + e.what());
    }
    PoisonConfig cfg;
    cfg.epsilon = j.at("epsilon").get<double>();
    cfg.target_class = j.at("target_class").get<int>();
    if (j.contains("label_mode")) {
        const auto s = j["label_mode"].get<std::string>();
        if (s == "dirty") cfg.label_mode = LabelMode::Dirty;
        else if (s == "clean") cfg.label_mode = LabelMode::Clean;
        else throw ConfigError("unknown label mode: " + s);
    }
    if (j.contains("rate_basis")) {
        const auto s = j["rate_basis"].get<std::string>();
        if (s == "whole_train") cfg.rate_basis = RateBasis::WholeTrain;
        else if (s == "target_class_only") cfg.rate_basis = RateBasis::TargetClassOnly;
        else throw ConfigError("unknown rate basis: " + s);
    }
    if (j.contains("append_mode")) cfg.append_mode = j["append_mode"].get<bool>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    cfg.validate();
    return cfg;
}

}  // namespace tablab::attack
