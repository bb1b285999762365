#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include "tablab/harness.hpp"
#include "tablab/rng.hpp"

namespace tablab::harness {

namespace fs = std::filesystem;

namespace {

// stage ids for per-repetition seed derivation
enum Stage : std::uint64_t {
    kData = 1,
    kSplit = 2,
    kPoisonTrain = 3,
    kPoisonVal = 4,
    kModelInit = 5,
    kTrain = 6,
    kImportance = 16,  // + surrogate index
};

struct BaselineEntry {
    double ba = 0.0;
    std::vector<double> per_class;
    std::shared_ptr<nn::Model> model;
    data::Standardizer standardizer;
};

// per-process caches; sweeps share baselines and importance across cells
std::map<std::string, BaselineEntry>& baseline_cache() {
    static std::map<std::string, BaselineEntry> c;
    return c;
}
std::map<std::string, importance::ImportanceScores>& importance_cache() {
    static std::map<std::string, importance::ImportanceScores> c;
    return c;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw StageError("cannot write " + path.string());
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
}

std::string dataset_blob(const ExperimentConfig& cfg, std::size_t rep) {
    if (cfg.dataset.synth) {
        const auto& s = *cfg.dataset.synth;
        std::string w;
        for (const auto x : s.effective_weights()) w += std::to_string(x) + ",";
        return "synth:" + std::to_string(s.n) + ":" + std::to_string(s.d) + ":" +
               std::to_string(s.noise_scale) + ":" + std::to_string(s.seed + rep) + ":" + w;
    }
    return "csv:" + cfg.dataset.csv_path + ":" + std::to_string(cfg.dataset.subsample_limit) + ":" +
           std::to_string(rep);
}

std::string split_blob(const ExperimentConfig& cfg) {
    return std::to_string(cfg.train_frac) + ":" + std::to_string(cfg.val_frac) + ":" +
           std::to_string(cfg.test_frac);
}

std::string model_train_blob(const ExperimentConfig& cfg) {
    std::string s = cfg.model.arch == nn::Arch::Mlp ? "mlp:" : "tt:";
    for (const auto w : cfg.model.hidden_widths) s += std::to_string(w) + ",";
    s += ":" + std::to_string(cfg.model.d_model) + ":" + std::to_string(cfg.model.heads) + ":" +
         std::to_string(cfg.model.blocks) + ":" + std::to_string(cfg.model.ffn_hidden) + ":" +
         std::to_string(cfg.model.latent_width) + "|" + std::to_string(cfg.train.lr) + ":" +
         std::to_string(cfg.train.batch_size) + ":" + std::to_string(cfg.train.max_epochs) + ":" +
         std::to_string(cfg.train.patience) + "|" +
         std::to_string(static_cast<int>(cfg.standardize_fit_on_train));
    return s;
}

data::Dataset stratified_cap(const data::Dataset& ds, std::size_t limit, std::uint64_t seed) {
    if (ds.n <= limit) return ds;
    std::vector<std::vector<std::size_t>> by_class(ds.schema.label_classes);
    for (std::size_t i = 0; i < ds.n; ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    std::vector<std::size_t> keep;
    const double frac = static_cast<double>(limit) / static_cast<double>(ds.n);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        rng::Stream stream(seed, 0x43415000ULL + c);
        stream.shuffle(idx.data(), idx.size());
        const auto take = static_cast<std::size_t>(
            std::llround(frac * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < std::min(take, idx.size()); ++i) keep.push_back(idx[i]);
    }
    std::sort(keep.begin(), keep.end());
    return ds.select(keep);
}

data::Dataset load_dataset(const DatasetSource& src, std::uint64_t rep_seed) {
    if (src.synth) {
        synth::SynthConfig cfg = *src.synth;
        cfg.seed = cfg.seed + rep_seed;  // fresh draw per repetition
        return synth::generate(cfg);
    }
    if (src.csv_path.empty() || src.schema_path.empty())
        throw ConfigError("dataset source needs either synth config or csv+schema paths");
    const auto schema = data::load_schema(src.schema_path);
    auto ds = data::load_csv(src.csv_path, schema);
    ds.validate();
    return stratified_cap(ds, src.subsample_limit, rep_seed);
}

struct VictimPipeline {
    std::unique_ptr<nn::Model> model;
    data::Standardizer standardizer;
    nn::ModelInput test_input;      // clean test, victim preprocessing
    nn::ModelInput asr_input;       // triggered eval set, victim preprocessing
    double cda = 0.0;
    double asr = 0.0;
};

// poison -> standardize -> train -> evaluate, over explicit train rows
VictimPipeline train_and_eval(const ExperimentConfig& cfg, const data::Dataset& train_poisoned,
                              const data::Dataset& val_poisoned, const data::Dataset& test_clean,
                              const attack::TriggerSpec& trig, std::uint64_t seed_r) {
    VictimPipeline out;
    if (cfg.standardize_fit_on_train) {
        out.standardizer = data::fit_standardizer(train_poisoned);
    } else {
        data::Dataset all = train_poisoned;
        for (const auto* part : {&val_poisoned, &test_clean}) {
            all.cells.insert(all.cells.end(), part->cells.begin(), part->cells.end());
            all.labels.insert(all.labels.end(), part->labels.begin(), part->labels.end());
            all.n += part->n;
        }
        out.standardizer = data::fit_standardizer(all);
    }

    const auto train_in = nn::make_input(data::apply_standardizer(train_poisoned, out.standardizer));
    const auto val_in = nn::make_input(data::apply_standardizer(val_poisoned, out.standardizer));
    out.test_input = nn::make_input(data::apply_standardizer(test_clean, out.standardizer));

    nn::ModelConfig mc = cfg.model;
    mc.num_classes = train_poisoned.schema.label_classes;
    mc.seed = rng::derive(seed_r, kModelInit);
    nn::TrainConfig tc = cfg.train;
    tc.seed = rng::derive(seed_r, kTrain);
    auto trained = nn::train(nn::make_model(mc, train_poisoned.schema), train_in, val_in, tc);
    if (trained.diverged) throw StageError("training diverged");
    out.model = std::move(trained.model);

    out.cda = compute_cda(*out.model, out.test_input);
    const auto eval_set = attack::make_asr_eval_set(test_clean, trig, cfg.poison.target_class);
    out.asr_input = nn::make_input(data::apply_standardizer(eval_set, out.standardizer));
    out.asr = compute_asr(*out.model, out.asr_input, cfg.poison.target_class);
    return out;
}

RunResult run_one(const ExperimentConfig& cfg, std::size_t rep, const fs::path& rep_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t seed_r = cfg.seed + rep;

    RunResult rr;
    rr.seed = seed_r;

    // data + split
    const data::Dataset ds = load_dataset(cfg.dataset, rep);
    const auto split =
        data::split(ds, cfg.train_frac, cfg.val_frac, cfg.test_frac, rng::derive(seed_r, kSplit));
    const data::Dataset train_clean = ds.select(split.train);
    const data::Dataset val_clean = ds.select(split.validation);
    const data::Dataset test_clean = ds.select(split.test);

    // importance on clean data (cached across cells that share the repetition)
    std::vector<trees::TreeEnsembleConfig> surrogate_cfgs =
        cfg.surrogates.empty() ? default_surrogates() : cfg.surrogates;
    for (std::size_t i = 0; i < surrogate_cfgs.size(); ++i)
        surrogate_cfgs[i].seed = rng::derive(seed_r, kImportance + i);
    importance::ImportanceScores scores;
    {
        std::string blob = "importance|" + std::to_string(seed_r) + "|" + dataset_blob(cfg, rep) +
                           "|" + split_blob(cfg);
        for (const auto& sc : surrogate_cfgs)
            blob += "|" + std::to_string(static_cast<int>(sc.kind)) + ":" +
                    std::to_string(sc.tree_count) + ":" + std::to_string(sc.max_depth) + ":" +
                    std::to_string(sc.learning_rate) + ":" + std::to_string(sc.subsample);
        const std::string key = config_key(blob);
        auto it = importance_cache().find(key);
        if (it != importance_cache().end()) {
            scores = it->second;
        } else {
            scores = importance::estimate_importance(ds, split, surrogate_cfgs);
            importance_cache()[key] = scores;
        }
    }
    rr.importance_ranking = scores.ranking;
    write_file(rep_dir / "importance.json", importance::to_json(scores));

    // trigger
    const auto S = attack::select_trigger_features(scores, ds.schema, cfg.trigger.size,
                                                   cfg.trigger.direction, cfg.trigger.rank_offset);
    attack::TriggerSpec trig;
    switch (cfg.trigger.kind) {
        case attack::TriggerKind::OutOfBounds: {
            std::vector<data::FeatureSupport> sup;
            for (const auto j : S) sup.push_back(data::compute_support(train_clean, j));
            trig = attack::craft_out_of_bounds(sup, cfg.trigger.alpha);
            break;
        }
        case attack::TriggerKind::InBounds: {
            std::vector<data::FeatureSupport> sup;
            for (const auto j : S) sup.push_back(data::compute_support(train_clean, j));
            trig = attack::craft_in_bounds(sup, cfg.trigger.statistic);
            break;
        }
        case attack::TriggerKind::AdaptiveTargetMode:
            trig = attack::craft_adaptive(train_clean, S, cfg.poison.target_class);
            break;
        case attack::TriggerKind::Explicit:
            trig.kind = attack::TriggerKind::Explicit;
            trig.features = cfg.trigger.explicit_features;
            trig.values = cfg.trigger.explicit_values;
            trig.validate();
            break;
    }
    rr.trigger = trig;
    rr.collision_count = attack::verify_collision(train_clean, trig);
    write_file(rep_dir / "trigger.json", attack::to_json(trig));

    // poison train and (optionally) validation partitions
    attack::PoisonConfig pc = cfg.poison;
    pc.seed = rng::derive(seed_r, kPoisonTrain);
    const auto poisoned = attack::poison_dataset(train_clean, trig, pc);
    data::Dataset val_poisoned = val_clean;
    if (cfg.poison_validation && cfg.poison.epsilon > 0) {
        attack::PoisonConfig pv = cfg.poison;
        pv.seed = rng::derive(seed_r, kPoisonVal);
        val_poisoned = attack::poison_dataset(val_clean, trig, pv).train;
    }
    {
        std::string mask_text;
        for (const auto r : poisoned.mask) mask_text += std::to_string(r) + "\n";
        write_file(rep_dir / "mask.txt", mask_text);
    }

    // victim
    const auto victim =
        train_and_eval(cfg, poisoned.train, val_poisoned, test_clean, trig, seed_r);
    nn::save_checkpoint(*victim.model, ds.schema, (rep_dir / "victim.ckpt").string(),
                        &victim.standardizer);

    rr.attacked.cda = victim.cda;
    rr.attacked.asr = victim.asr;
    rr.attacked.m = poisoned.m;
    rr.attacked.effective_epsilon = poisoned.effective_epsilon;
    rr.attacked.seed = seed_r;
    rr.attacked.per_class_accuracy =
        per_class_accuracy(*victim.model, victim.test_input, ds.schema.label_classes);

    // baseline on clean data, same seeds (cached)
    BaselineEntry base;
    {
        const std::string blob = "baseline|" + std::to_string(seed_r) + "|" + dataset_blob(cfg, rep) +
                                 "|" + split_blob(cfg) + "|" + model_train_blob(cfg);
        const std::string key = config_key(blob);
        auto it = baseline_cache().find(key);
        if (it != baseline_cache().end()) {
            base = it->second;
        } else {
            auto bl = train_and_eval(cfg, train_clean, val_clean, test_clean, trig, seed_r);
            base.ba = bl.cda;
            base.per_class = per_class_accuracy(*bl.model, bl.test_input, ds.schema.label_classes);
            base.standardizer = bl.standardizer;
            base.model = std::shared_ptr<nn::Model>(std::move(bl.model));
            baseline_cache()[key] = base;
        }
    }
    nn::save_checkpoint(*base.model, ds.schema, (rep_dir / "baseline.ckpt").string(),
                        &base.standardizer);
    rr.baseline.ba = base.ba;
    rr.baseline.per_class_accuracy = base.per_class;
    rr.baseline.seed = seed_r;
    rr.attacked.ba = base.ba;

    // defenses
    const auto train_poisoned_in =
        nn::make_input(data::apply_standardizer(poisoned.train, victim.standardizer));

    if (cfg.defenses.spectral) {
        const auto lat = nn::latents(*victim.model, train_poisoned_in);
        nn::save_activation_dump(lat, poisoned.train.labels, &poisoned.mask,
                                 (rep_dir / "activations").string());
        defense::SpectralConfig sc = cfg.spectral;
        if (sc.scope == defense::SpectralScope::PerClass) sc.analyzed_class = cfg.poison.target_class;
        const auto dump = nn::load_activation_dump((rep_dir / "activations").string());
        const auto rep_spec = defense::spectral_signatures(
            dump.latents, dump.labels, sc, dump.poison_mask ? &*dump.poison_mask : nullptr);
        write_file(rep_dir / "spectral.json", defense::to_json(rep_spec));
        defense::write_histogram_svg(rep_spec, (rep_dir / "spectral.svg").string());

        SpectralOutcome so;
        so.auroc = rep_spec.auroc;
        so.removed = rep_spec.removed.size();
        for (const auto r : rep_spec.removed)
            if (std::binary_search(poisoned.mask.begin(), poisoned.mask.end(), r)) so.true_positives++;

        const auto retrain = [&](const std::vector<std::size_t>& survivors) {
            const auto pruned_train = poisoned.train.select(survivors);
            const auto vp = train_and_eval(cfg, pruned_train, val_poisoned, test_clean, trig, seed_r);
            return std::make_pair(vp.asr, vp.cda);
        };
        const auto [rasr, rcda] =
            defense::evaluate_spectral_removal(poisoned.train.n, rep_spec, retrain);
        so.retrain_asr = rasr;
        so.retrain_cda = rcda;
        rr.spectral = so;
    }

    if (cfg.defenses.fineprune) {
        // rank/eval on the clean test set, fine-tune on the clean validation
        // rows (disjoint from the poisoned training partition)
        const auto finetune_in = nn::make_input(data::apply_standardizer(val_clean, victim.standardizer));
        defense::FinePruneConfig fpc = cfg.fineprune;
        fpc.finetune.seed = rng::derive(seed_r, kTrain + 100);
        const auto fp = defense::fine_pruning_defense(*victim.model, victim.test_input,
                                                      victim.asr_input, cfg.poison.target_class,
                                                      finetune_in, fpc);
        FinePruneOutcome fo;
        fo.pruned_asr = fp.pruned_asr;
        fo.pruned_cda = fp.pruned_cda;
        fo.final_asr = fp.final_asr;
        fo.final_cda = fp.final_cda;
        for (const auto& pt : fp.curve)
            if (std::abs(pt.fraction - 0.10) < 1e-9) fo.asr_at_10pct = pt.asr;
        fo.curve = fp.curve;
        std::string curve_json = "{\n  \"curve\": [\n";
        for (std::size_t i = 0; i < fp.curve.size(); ++i) {
            const auto& pt = fp.curve[i];
            curve_json += "    {\"fraction\": " + std::to_string(pt.fraction) +
                          ", \"cda\": " + std::to_string(pt.cda) +
                          ", \"asr\": " + std::to_string(pt.asr) + "}" +
                          (i + 1 < fp.curve.size() ? ",\n" : "\n");
        }
        curve_json += "  ],\n  \"final_cda\": " + std::to_string(fp.final_cda) +
                      ",\n  \"final_asr\": " + std::to_string(fp.final_asr) + "\n}";
        write_file(rep_dir / "fineprune.json", curve_json);
        rr.fineprune = fo;
    }

    if (cfg.defenses.scan) {
        const auto sweep_rep = defense::reverse_engineering_scan(
            *victim.model, test_clean, victim.standardizer, cfg.scan, base.model.get());
        write_file(rep_dir / "scan.json", defense::to_json(sweep_rep));

        ScanOutcome sc;
        sc.absolute_flag_count = sweep_rep.absolute_flags.size();
        sc.differential_flag_count = sweep_rep.differential_flags.size();
        for (std::size_t t = 0; t < trig.features.size(); ++t) {
            const std::size_t j = trig.features[t];
            const double delta = trig.values[t];
            const auto sup = data::compute_support(test_clean, j);
            const double range = sup.max - sup.min;
            const double step = (1.0 + 2.0 * cfg.scan.overshoot) * range /
                                static_cast<double>(cfg.scan.grid_points - 1);
            // exact probe plus nearest grid cells
            const auto probe =
                defense::scan_single_value(*victim.model, test_clean, victim.standardizer, j, delta);
            sc.trigger_dominance = std::max(sc.trigger_dominance, probe.dominance);
            for (const auto& cell : sweep_rep.cells) {
                if (cell.feature != j || std::fabs(cell.value - delta) > step) continue;
                sc.trigger_dominance = std::max(sc.trigger_dominance, cell.dominance);
            }
            for (const auto& flag : sweep_rep.absolute_flags)
                if (flag.feature == j && std::fabs(flag.value - delta) <= step)
                    sc.trigger_flagged = true;
        }
        rr.scan = sc;
    }

    if (cfg.persist_datasets) {
        data::save_csv(poisoned.train, (rep_dir / "train_poisoned.csv").string());
        data::save_schema(ds.schema, (rep_dir / "schema.json").string());
    }

    rr.attacked.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_file(rep_dir / "metrics.json", to_json(rr));
    return rr;
}

}  // namespace

std::vector<trees::TreeEnsembleConfig> default_surrogates() {
    trees::TreeEnsembleConfig rf;
    rf.kind = trees::EnsembleKind::RandomForest;
    rf.tree_count = 40;
    rf.max_depth = 10;
    rf.subsample = 0.8;
    trees::TreeEnsembleConfig gb;
    gb.kind = trees::EnsembleKind::GradientBoosted;
    gb.tree_count = 40;
    gb.max_depth = 4;
    gb.learning_rate = 0.3;
    gb.subsample = 1.0;
    return {rf, gb};
}

void ExperimentConfig::validate() const {
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (out_dir.empty()) throw ConfigError("out_dir must be set");
    poison.validate();
    model.validate();
    train.validate();
    if (trigger.size == 0) throw ConfigError("trigger size must be >= 1");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentResult res;
    res.config = cfg;

    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    write_file(out / "config.json", to_json(cfg));

    for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
        const fs::path rep_dir = out / ("rep" + std::to_string(rep));
        fs::create_directories(rep_dir);
        try {
            res.runs.push_back(run_one(cfg, rep, rep_dir));
        } catch (const std::exception& e) {
            throw StageError("repetition " + std::to_string(rep) + ": " + e.what());
        }
    }

    // mean over runs
    MetricsReport& mean = res.mean;
    mean.ba = mean.cda = mean.asr = 0.0;
    mean.seed = cfg.seed;
    double msum = 0.0;
    for (const auto& r : res.runs) {
        mean.ba += r.attacked.ba;
        mean.cda += r.attacked.cda;
        mean.asr += r.attacked.asr;
        msum += static_cast<double>(r.attacked.m);
        mean.effective_epsilon += r.attacked.effective_epsilon;
        mean.runtime_seconds += r.attacked.runtime_seconds;
    }
    const auto nruns = static_cast<double>(res.runs.size());
    mean.ba /= nruns;
    mean.cda /= nruns;
    mean.asr /= nruns;
    mean.effective_epsilon /= nruns;
    mean.m = static_cast<std::size_t>(std::llround(msum / nruns));

    write_file(out / "result.json", to_json(res));
    return res;
}

}  // namespace tablab::harness
