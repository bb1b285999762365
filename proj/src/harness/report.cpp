#include <fstream>

#include <nlohmann/json.hpp>

#include "tablab/harness.hpp"

namespace tablab::harness {

namespace {

using nlohmann::json;

json metrics_json(const MetricsReport& r) {
    json j;
    j["ba"] = r.ba;
    j["cda"] = r.cda;
    j["asr"] = r.asr;
    j["m"] = r.m;
    j["effective_epsilon"] = r.effective_epsilon;
    j["per_class_accuracy"] = r.per_class_accuracy;
    j["seed"] = r.seed;
    j["runtime_seconds"] = r.runtime_seconds;
    return j;
}

json run_json(const RunResult& r) {
    json j;
    j["seed"] = r.seed;
    j["baseline"] = metrics_json(r.baseline);
    j["attacked"] = metrics_json(r.attacked);
    j["trigger"] = json::parse(attack::to_json(r.trigger));
    j["collision_count"] = r.collision_count;
    j["importance_ranking"] = r.importance_ranking;
    if (r.spectral) {
        json s;
        s["auroc"] = r.spectral->auroc;
        s["removed"] = r.spectral->removed;
        s["true_positives"] = r.spectral->true_positives;
        s["retrain_asr"] = r.spectral->retrain_asr;
        s["retrain_cda"] = r.spectral->retrain_cda;
        j["spectral"] = std::move(s);
    }
    if (r.fineprune) {
        json f;
        f["pruned_asr"] = r.fineprune->pruned_asr;
        f["pruned_cda"] = r.fineprune->pruned_cda;
        f["final_asr"] = r.fineprune->final_asr;
        f["final_cda"] = r.fineprune->final_cda;
        f["asr_at_10pct"] = r.fineprune->asr_at_10pct;
        json curve = json::array();
        for (const auto& pt : r.fineprune->curve) {
            json c;
            c["fraction"] = pt.fraction;
            c["masked_units"] = pt.masked_units;
            c["cda"] = pt.cda;
            c["asr"] = pt.asr;
            curve.push_back(std::move(c));
        }
        f["curve"] = std::move(curve);
        j["fineprune"] = std::move(f);
    }
    if (r.scan) {
        json s;
        s["absolute_flag_count"] = r.scan->absolute_flag_count;
        s["differential_flag_count"] = r.scan->differential_flag_count;
        s["trigger_dominance"] = r.scan->trigger_dominance;
        s["trigger_flagged"] = r.scan->trigger_flagged;
        j["scan"] = std::move(s);
    }
    return j;
}

const char* direction_name(attack::Direction d) {
    return d == attack::Direction::MostImportant ? "most_important" : "least_important";
}
attack::Direction direction_from(const std::string& s) {
    if (s == "most_important") return attack::Direction::MostImportant;
    if (s == "least_important") return attack::Direction::LeastImportant;
    throw ConfigError("unknown direction: " + s);
}

json synth_json(const synth::SynthConfig& s) {
    json j;
    j["n"] = s.n;
    j["d"] = s.d;
    if (!s.importance_weights.empty()) j["importance_weights"] = s.importance_weights;
    j["noise_scale"] = s.noise_scale;
    j["seed"] = s.seed;
    return j;
}

synth::SynthConfig synth_from(const json& j) {
    synth::SynthConfig s;
    s.n = j.at("n").get<std::size_t>();
    s.d = j.at("d").get<std::size_t>();
    if (j.contains("importance_weights"))
        s.importance_weights = j["importance_weights"].get<std::vector<double>>();
    if (j.contains("noise_scale")) s.noise_scale = j["noise_scale"].get<double>();
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    return s;
}

json surrogate_json(const trees::TreeEnsembleConfig& c) {
    json j;
    j["kind"] = c.kind == trees::EnsembleKind::RandomForest ? "random_forest" : "gradient_boosted";
    j["tree_count"] = c.tree_count;
    j["max_depth"] = c.max_depth;
    j["learning_rate"] = c.learning_rate;
    j["subsample"] = c.subsample;
    return j;
}

trees::TreeEnsembleConfig surrogate_from(const json& j) {
    trees::TreeEnsembleConfig c;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "random_forest") c.kind = trees::EnsembleKind::RandomForest;
    else if (kind == "gradient_boosted") c.kind = trees::EnsembleKind::GradientBoosted;
    else throw ConfigError("unknown surrogate kind: " + kind);
    if (j.contains("tree_count")) c.tree_count = j["tree_count"].get<std::size_t>();
    if (j.contains("max_depth")) c.max_depth = j["max_depth"].get<std::size_t>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("subsample")) c.subsample = j["subsample"].get<double>();
    return c;
}

json model_json(const nn::ModelConfig& m) {
    json j;
    j["arch"] = m.arch == nn::Arch::Mlp ? "mlp" : "tab_transformer";
    j["hidden_widths"] = m.hidden_widths;
    j["d_model"] = m.d_model;
    j["heads"] = m.heads;
    j["blocks"] = m.blocks;
    j["ffn_hidden"] = m.ffn_hidden;
    j["latent_width"] = m.latent_width;
    j["num_classes"] = m.num_classes;
    j["seed"] = m.seed;
    return j;
}

nn::ModelConfig model_from(const json& j) {
    nn::ModelConfig m;
    const auto arch = j.at("arch").get<std::string>();
    if (arch == "mlp") m.arch = nn::Arch::Mlp;
    else if (arch == "tab_transformer") m.arch = nn::Arch::TabTransformer;
    else throw ConfigError("unknown arch: " + arch);
    if (j.contains("hidden_widths")) m.hidden_widths = j["hidden_widths"].get<std::vector<std::size_t>>();
    if (j.contains("d_model")) m.d_model = j["d_model"].get<std::size_t>();
    if (j.contains("heads")) m.heads = j["heads"].get<std::size_t>();
    if (j.contains("blocks")) m.blocks = j["blocks"].get<std::size_t>();
    if (j.contains("ffn_hidden")) m.ffn_hidden = j["ffn_hidden"].get<std::size_t>();
    if (j.contains("latent_width")) m.latent_width = j["latent_width"].get<std::size_t>();
    if (j.contains("num_classes")) m.num_classes = j["num_classes"].get<std::size_t>();
    if (j.contains("seed")) m.seed = j["seed"].get<std::uint64_t>();
    return m;
}

json train_json(const nn::TrainConfig& t) {
    json j;
    j["lr"] = t.lr;
    j["beta1"] = t.beta1;
    j["beta2"] = t.beta2;
    j["eps"] = t.eps;
    j["batch_size"] = t.batch_size;
    j["max_epochs"] = t.max_epochs;
    j["patience"] = t.patience;
    j["seed"] = t.seed;
    return j;
}

nn::TrainConfig train_from(const json& j) {
    nn::TrainConfig t;
    if (j.contains("lr")) t.lr = j["lr"].get<double>();
    if (j.contains("beta1")) t.beta1 = j["beta1"].get<double>();
    if (j.contains("beta2")) t.beta2 = j["beta2"].get<double>();
    if (j.contains("eps")) t.eps = j["eps"].get<double>();
    if (j.contains("batch_size")) t.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("max_epochs")) t.max_epochs = j["max_epochs"].get<std::size_t>();
    if (j.contains("patience")) t.patience = j["patience"].get<std::size_t>();
    if (j.contains("seed")) t.seed = j["seed"].get<std::uint64_t>();
    return t;
}

json config_json(const ExperimentConfig& c) {
    json j;
    json ds;
    if (c.dataset.synth) ds["synth"] = synth_json(*c.dataset.synth);
    if (!c.dataset.csv_path.empty()) {
        ds["csv_path"] = c.dataset.csv_path;
        ds["schema_path"] = c.dataset.schema_path;
    }
    ds["subsample_limit"] = c.dataset.subsample_limit;
    j["dataset"] = std::move(ds);
    j["model"] = model_json(c.model);
    j["train"] = train_json(c.train);
    json surr = json::array();
    for (const auto& s : c.surrogates) surr.push_back(surrogate_json(s));
    j["surrogates"] = std::move(surr);
    json trig;
    trig["kind"] = attack::to_string(c.trigger.kind);
    trig["size"] = c.trigger.size;
    trig["direction"] = direction_name(c.trigger.direction);
    trig["rank_offset"] = c.trigger.rank_offset;
    trig["statistic"] = attack::to_string(c.trigger.statistic);
    trig["alpha"] = c.trigger.alpha;
    if (!c.trigger.explicit_features.empty()) {
        trig["explicit_features"] = c.trigger.explicit_features;
        trig["explicit_values"] = c.trigger.explicit_values;
    }
    j["trigger"] = std::move(trig);
    j["poison"] = json::parse(attack::to_json(c.poison));
    j["train_frac"] = c.train_frac;
    j["val_frac"] = c.val_frac;
    j["test_frac"] = c.test_frac;
    j["standardize_fit_on_train"] = c.standardize_fit_on_train;
    j["poison_validation"] = c.poison_validation;
    json def;
    def["spectral"] = c.defenses.spectral;
    def["fineprune"] = c.defenses.fineprune;
    def["scan"] = c.defenses.scan;
    j["defenses"] = std::move(def);
    json spec;
    spec["scope"] = c.spectral.scope == defense::SpectralScope::PerClass ? "per_class" : "global";
    spec["removal_multiplier"] = c.spectral.removal_multiplier;
    spec["suspected_budget"] = c.spectral.suspected_budget;
    j["spectral"] = std::move(spec);
    json fp;
    fp["stop_fraction"] = c.fineprune.stop_fraction;
    fp["step"] = c.fineprune.step;
    fp["per_block_quota"] = c.fineprune.per_block_quota;
    fp["finetune"] = train_json(c.fineprune.finetune);
    j["fineprune"] = std::move(fp);
    json sc;
    sc["grid_points"] = c.scan.grid_points;
    sc["overshoot"] = c.scan.overshoot;
    sc["dominance_threshold"] = c.scan.dominance_threshold;
    sc["differential_margin"] = c.scan.differential_margin;
    j["scan"] = std::move(sc);
    j["repetitions"] = c.repetitions;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    j["persist_datasets"] = c.persist_datasets;
    return j;
}

ExperimentConfig config_from(const json& j) {
    ExperimentConfig c;
    if (j.contains("dataset")) {
        const auto& ds = j["dataset"];
        if (ds.contains("synth")) c.dataset.synth = synth_from(ds["synth"]);
        if (ds.contains("csv_path")) {
            c.dataset.csv_path = ds["csv_path"].get<std::string>();
            c.dataset.schema_path = ds.value("schema_path", std::string{});
        }
        if (ds.contains("subsample_limit"))
            c.dataset.subsample_limit = ds["subsample_limit"].get<std::size_t>();
    }
    if (j.contains("model")) c.model = model_from(j["model"]);
    if (j.contains("train")) c.train = train_from(j["train"]);
    if (j.contains("surrogates"))
        for (const auto& s : j["surrogates"]) c.surrogates.push_back(surrogate_from(s));
    if (j.contains("trigger")) {
        const auto& t = j["trigger"];
        if (t.contains("kind")) {
            const auto k = t["kind"].get<std::string>();
            if (k == "out_of_bounds") c.trigger.kind = attack::TriggerKind::OutOfBounds;
            else if (k == "in_bounds") c.trigger.kind = attack::TriggerKind::InBounds;
            else if (k == "adaptive_target_mode") c.trigger.kind = attack::TriggerKind::AdaptiveTargetMode;
            else if (k == "explicit") c.trigger.kind = attack::TriggerKind::Explicit;
            else throw ConfigError("unknown trigger kind: " + k);
        }
        if (t.contains("size")) c.trigger.size = t["size"].get<std::size_t>();
        if (t.contains("direction")) c.trigger.direction = direction_from(t["direction"].get<std::string>());
        if (t.contains("rank_offset")) c.trigger.rank_offset = t["rank_offset"].get<std::size_t>();
        if (t.contains("statistic")) {
            const auto s = t["statistic"].get<std::string>();
            if (s == "min") c.trigger.statistic = attack::InBoundsStat::Min;
            else if (s == "max") c.trigger.statistic = attack::InBoundsStat::Max;
            else if (s == "mean") c.trigger.statistic = attack::InBoundsStat::Mean;
            else if (s == "median") c.trigger.statistic = attack::InBoundsStat::Median;
            else if (s == "mode") c.trigger.statistic = attack::InBoundsStat::Mode;
            else throw ConfigError("unknown statistic: " + s);
        }
        if (t.contains("alpha")) c.trigger.alpha = t["alpha"].get<double>();
        if (t.contains("explicit_features")) {
            c.trigger.explicit_features = t["explicit_features"].get<std::vector<std::size_t>>();
            c.trigger.explicit_values = t["explicit_values"].get<std::vector<double>>();
        }
    }
    if (j.contains("poison")) c.poison = attack::poison_config_from_json(j["poison"].dump());
    if (j.contains("train_frac")) c.train_frac = j["train_frac"].get<double>();
    if (j.contains("val_frac")) c.val_frac = j["val_frac"].get<double>();
    if (j.contains("test_frac")) c.test_frac = j["test_frac"].get<double>();
    if (j.contains("standardize_fit_on_train"))
        c.standardize_fit_on_train = j["standardize_fit_on_train"].get<bool>();
    if (j.contains("poison_validation")) c.poison_validation = j["poison_validation"].get<bool>();
    if (j.contains("defenses")) {
        c.defenses.spectral = j["defenses"].value("spectral", false);
        c.defenses.fineprune = j["defenses"].value("fineprune", false);
        c.defenses.scan = j["defenses"].value("scan", false);
    }
    if (j.contains("spectral")) {
        const auto& s = j["spectral"];
        if (s.contains("scope"))
            c.spectral.scope = s["scope"].get<std::string>() == "global"
                                   ? defense::SpectralScope::Global
                                   : defense::SpectralScope::PerClass;
        if (s.contains("removal_multiplier"))
            c.spectral.removal_multiplier = s["removal_multiplier"].get<double>();
        if (s.contains("suspected_budget"))
            c.spectral.suspected_budget = s["suspected_budget"].get<std::size_t>();
    }
    if (j.contains("fineprune")) {
        const auto& f = j["fineprune"];
        if (f.contains("stop_fraction")) c.fineprune.stop_fraction = f["stop_fraction"].get<double>();
        if (f.contains("step")) c.fineprune.step = f["step"].get<double>();
        if (f.contains("per_block_quota")) c.fineprune.per_block_quota = f["per_block_quota"].get<bool>();
        if (f.contains("finetune")) c.fineprune.finetune = train_from(f["finetune"]);
    }
    if (j.contains("scan")) {
        const auto& s = j["scan"];
        if (s.contains("grid_points")) c.scan.grid_points = s["grid_points"].get<std::size_t>();
        if (s.contains("overshoot")) c.scan.overshoot = s["overshoot"].get<double>();
        if (s.contains("dominance_threshold"))
            c.scan.dominance_threshold = s["dominance_threshold"].get<double>();
        if (s.contains("differential_margin"))
            c.scan.differential_margin = s["differential_margin"].get<double>();
    }
    if (j.contains("repetitions")) c.repetitions = j["repetitions"].get<std::size_t>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("persist_datasets")) c.persist_datasets = j["persist_datasets"].get<bool>();
    return c;
}

}  // namespace

std::string to_json(const MetricsReport& r) { return metrics_json(r).dump(2); }
std::string to_json(const RunResult& r) { return run_json(r).dump(2); }

std::string to_json(const ExperimentResult& r) {
    json j;
    j["config"] = config_json(r.config);
    json runs = json::array();
    for (const auto& run : r.runs) runs.push_back(run_json(run));
    j["runs"] = std::move(runs);
    j["mean"] = metrics_json(r.mean);
    return j.dump(2);
}

std::string to_json(const ExperimentConfig& c) { return config_json(c).dump(2); }

ExperimentConfig experiment_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
    return config_from(j);
}

std::string to_json(const SweepGrid& g) {
    json j;
    j["base"] = config_json(g.base);
    j["epsilons"] = g.epsilons;
    j["trigger_sizes"] = g.trigger_sizes;
    j["positions"] = g.positions;
    json kinds = json::array();
    for (const auto k : g.kinds) kinds.push_back(attack::to_string(k));
    j["kinds"] = std::move(kinds);
    return j.dump(2);
}

SweepGrid sweep_grid_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("sweep grid: ") + e.what());
    }
    SweepGrid g;
    g.base = config_from(j.at("base"));
    if (j.contains("epsilons")) g.epsilons = j["epsilons"].get<std::vector<double>>();
    if (j.contains("trigger_sizes")) g.trigger_sizes = j["trigger_sizes"].get<std::vector<std::size_t>>();
    if (j.contains("positions")) g.positions = j["positions"].get<std::vector<std::size_t>>();
    if (j.contains("kinds"))
        for (const auto& k : j["kinds"]) {
            const auto s = k.get<std::string>();
            if (s == "out_of_bounds") g.kinds.push_back(attack::TriggerKind::OutOfBounds);
            else if (s == "in_bounds") g.kinds.push_back(attack::TriggerKind::InBounds);
            else if (s == "adaptive_target_mode") g.kinds.push_back(attack::TriggerKind::AdaptiveTargetMode);
            else throw ConfigError("unknown trigger kind in grid: " + s);
        }
    if (g.epsilons.empty()) g.epsilons = {g.base.poison.epsilon};
    if (g.trigger_sizes.empty()) g.trigger_sizes = {g.base.trigger.size};
    if (g.positions.empty()) g.positions = {g.base.trigger.rank_offset};
    if (g.kinds.empty()) g.kinds = {g.base.trigger.kind};
    return g;
}

void emit_report(const std::vector<ExperimentResult>& results, ReportFormat format,
                 const std::string& path) {
    std::ofstream out(path);
    if (!out) throw StageError("cannot write report: " + path);
    if (format == ReportFormat::Json) {
        json arr = json::array();
        for (const auto& r : results) arr.push_back(json::parse(to_json(r)));
        out << arr.dump(2) << '\n';
        return;
    }
    out << "kind,size,rank_offset,epsilon,rep,seed,ba,cda,asr,m,effective_epsilon,"
           "collisions,runtime_seconds\n";
    for (const auto& r : results) {
        for (std::size_t i = 0; i < r.runs.size(); ++i) {
            const auto& run = r.runs[i];
            out << attack::to_string(r.config.trigger.kind) << ',' << r.config.trigger.size << ','
                << r.config.trigger.rank_offset << ',' << r.config.poison.epsilon << ',' << i << ','
                << run.seed << ',' << run.attacked.ba << ',' << run.attacked.cda << ','
                << run.attacked.asr << ',' << run.attacked.m << ','
                << run.attacked.effective_epsilon << ',' << run.collision_count << ','
                << run.attacked.runtime_seconds << '\n';
        }
    }
}

std::string sweep_csv(const SweepResult& res) {
    std::string out =
        "cell,kind,size,rank_offset,epsilon,rep,seed,ba,cda,asr,m,effective_epsilon,error\n";
    for (std::size_t c = 0; c < res.cell_configs.size(); ++c) {
        const auto& cfg = res.cell_configs[c];
        const std::string prefix = std::to_string(c) + "," +
                                   attack::to_string(cfg.trigger.kind) + "," +
                                   std::to_string(cfg.trigger.size) + "," +
                                   std::to_string(cfg.trigger.rank_offset) + "," +
                                   std::to_string(cfg.poison.epsilon) + ",";
        if (!res.cell_errors[c].empty()) {
            out += prefix + ",,,,,,," + res.cell_errors[c] + "\n";
            continue;
        }
        const auto& runs = res.cell_results[c].runs;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto& run = runs[i];
            out += prefix + std::to_string(i) + "," + std::to_string(run.seed) + "," +
                   std::to_string(run.attacked.ba) + "," + std::to_string(run.attacked.cda) + "," +
                   std::to_string(run.attacked.asr) + "," + std::to_string(run.attacked.m) + "," +
                   std::to_string(run.attacked.effective_epsilon) + ",\n";
        }
    }
    return out;
}

std::string config_key(const std::string& canonical_json) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : canonical_json) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace tablab::harness
