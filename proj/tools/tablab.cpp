#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tablab/harness.hpp"
#include "tablab/rng.hpp"

// tablab: desk-scale backdoor laboratory for tabular classifiers.
// Subcommands: synth, importance, poison, train, evaluate, defend, sweep, report.
// Exit codes: 0 ok, 1 config error, 2 stage failure.

namespace {

using namespace tablab;
namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw StageError("cannot write " + path);
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
}

data::Dataset load_table(const std::string& csv, const std::string& schema_path) {
    const auto schema = data::load_schema(schema_path);
    auto ds = data::load_csv(csv, schema);
    ds.validate();
    return ds;
}

attack::TriggerKind trigger_kind_from(const std::string& s) {
    if (s == "out_of_bounds") return attack::TriggerKind::OutOfBounds;
    if (s == "in_bounds") return attack::TriggerKind::InBounds;
    if (s == "adaptive_target_mode") return attack::TriggerKind::AdaptiveTargetMode;
    if (s == "explicit") return attack::TriggerKind::Explicit;
    throw ConfigError("unknown trigger kind: " + s);
}

// --- synth ------------------------------------------------------------------

int cmd_synth(const std::string& config, std::size_t n, std::size_t d, std::uint64_t seed,
              const std::string& out_dir) {
    synth::SynthConfig cfg;
    if (!config.empty()) {
        const auto j = nlohmann::json::parse(slurp(config));
        cfg.n = j.value("n", cfg.n);
        cfg.d = j.value("d", cfg.d);
        if (j.contains("importance_weights"))
            cfg.importance_weights = j["importance_weights"].get<std::vector<double>>();
        cfg.noise_scale = j.value("noise_scale", cfg.noise_scale);
        cfg.seed = j.value("seed", cfg.seed);
    }
    if (n) cfg.n = n;
    if (d) cfg.d = d;
    if (seed) cfg.seed = seed;

    const auto ds = synth::generate(cfg);
    fs::create_directories(out_dir);
    data::save_csv(ds, out_dir + "/data.csv");
    data::save_schema(ds.schema, out_dir + "/schema.json");
    std::cout << "wrote " << ds.n << " rows, " << ds.schema.d() << " features to " << out_dir
              << "\n";
    return 0;
}

// --- importance ----------------------------------------------------------------

int cmd_importance(const std::string& data_csv, const std::string& schema_path,
                   const std::string& config, std::uint64_t seed, const std::string& out) {
    const auto ds = load_table(data_csv, schema_path);
    auto cfgs = harness::default_surrogates();
    if (!config.empty()) {
        cfgs.clear();
        for (const auto& j : nlohmann::json::parse(slurp(config)).at("surrogates")) {
            trees::TreeEnsembleConfig c;
            const auto kind = j.at("kind").get<std::string>();
            c.kind = kind == "random_forest" ? trees::EnsembleKind::RandomForest
                                             : trees::EnsembleKind::GradientBoosted;
            c.tree_count = j.value("tree_count", c.tree_count);
            c.max_depth = j.value("max_depth", c.max_depth);
            c.learning_rate = j.value("learning_rate", c.learning_rate);
            c.subsample = j.value("subsample", c.subsample);
            cfgs.push_back(c);
        }
    }
    for (std::size_t i = 0; i < cfgs.size(); ++i) cfgs[i].seed = rng::derive(seed, i + 1);
    const auto split = data::split(ds, 0.8, 0.1, 0.1, seed);
    const auto scores = importance::estimate_importance(ds, split, cfgs);
    const std::string text = importance::to_json(scores);
    if (out.empty())
        std::cout << text << "\n";
    else
        spit(out, text);
    return 0;
}

// --- poison -----------------------------------------------------------------------

int cmd_poison(const std::string& data_csv, const std::string& schema_path,
               const std::string& trigger_path, const std::string& kind, std::size_t size,
               const std::string& statistic, double alpha, double epsilon, int target_class,
               bool clean_label, bool target_class_basis, std::uint64_t seed,
               const std::string& out_dir) {
    const auto ds = load_table(data_csv, schema_path);

    attack::TriggerSpec trig;
    if (!trigger_path.empty()) {
        trig = attack::trigger_from_json(slurp(trigger_path));
    } else {
        // craft from the data itself using the default surrogate ranking
        auto cfgs = harness::default_surrogates();
        for (std::size_t i = 0; i < cfgs.size(); ++i) cfgs[i].seed = rng::derive(seed, i + 1);
        const auto split = data::split(ds, 0.8, 0.1, 0.1, seed);
        const auto scores = importance::estimate_importance(ds, split, cfgs);
        const auto S = attack::select_trigger_features(scores, ds.schema, size,
                                                       attack::Direction::MostImportant);
        const auto k = trigger_kind_from(kind);
        if (k == attack::TriggerKind::AdaptiveTargetMode) {
            trig = attack::craft_adaptive(ds, S, target_class);
        } else {
            std::vector<data::FeatureSupport> sup;
            for (const auto j : S) sup.push_back(data::compute_support(ds, j));
            if (k == attack::TriggerKind::OutOfBounds) {
                trig = attack::craft_out_of_bounds(sup, alpha);
            } else {
                attack::InBoundsStat st = attack::InBoundsStat::Mode;
                if (statistic == "min") st = attack::InBoundsStat::Min;
                else if (statistic == "max") st = attack::InBoundsStat::Max;
                else if (statistic == "mean") st = attack::InBoundsStat::Mean;
                else if (statistic == "median") st = attack::InBoundsStat::Median;
                else if (statistic != "mode") throw ConfigError("unknown statistic: " + statistic);
                trig = attack::craft_in_bounds(sup, st);
            }
        }
    }

    attack::PoisonConfig pc;
    pc.epsilon = epsilon;
    pc.target_class = target_class;
    pc.label_mode = clean_label ? attack::LabelMode::Clean : attack::LabelMode::Dirty;
    pc.rate_basis =
        target_class_basis ? attack::RateBasis::TargetClassOnly : attack::RateBasis::WholeTrain;
    pc.seed = seed;

    const auto res = attack::poison_dataset(ds, trig, pc);
    fs::create_directories(out_dir);
    data::save_csv(res.train, out_dir + "/train_poisoned.csv");
    data::save_schema(res.train.schema, out_dir + "/schema.json");
    spit(out_dir + "/trigger.json", attack::to_json(trig));
    std::string mask;
    for (const auto r : res.mask) mask += std::to_string(r) + "\n";
    spit(out_dir + "/mask.txt", mask);
    std::cout << "poisoned m=" << res.m << " rows (effective epsilon "
              << res.effective_epsilon << "), collisions " << res.collision_count << "\n";
    return 0;
}

// --- train ------------------------------------------------------------------------

int cmd_train(const std::string& data_csv, const std::string& schema_path,
              const std::string& config, const std::string& arch, std::uint64_t seed,
              const std::string& out) {
    const auto ds = load_table(data_csv, schema_path);
    nn::ModelConfig mc;
    nn::TrainConfig tc;
    if (!config.empty()) {
        const auto j = nlohmann::json::parse(slurp(config));
        harness::ExperimentConfig tmp =
            harness::experiment_config_from_json(nlohmann::json{{"model", j.value("model", nlohmann::json::object())},
                                                                {"train", j.value("train", nlohmann::json::object())}}
                                                     .dump());
        mc = tmp.model;
        tc = tmp.train;
    }
    if (arch == "mlp") mc.arch = nn::Arch::Mlp;
    else if (arch == "tab_transformer") mc.arch = nn::Arch::TabTransformer;
    else if (!arch.empty()) throw ConfigError("unknown arch: " + arch);
    mc.num_classes = ds.schema.label_classes;
    mc.seed = rng::derive(seed, 5);
    tc.seed = rng::derive(seed, 6);

    const auto split = data::split(ds, 0.8, 0.1, 0.1, seed);
    const auto train_ds = ds.select(split.train);
    const auto [train_std, st] = data::standardize(train_ds);
    const auto val_std = data::apply_standardizer(ds.select(split.validation), st);
    const auto test_std = data::apply_standardizer(ds.select(split.test), st);

    auto trained = nn::train(nn::make_model(mc, ds.schema), nn::make_input(train_std),
                             nn::make_input(val_std), tc);
    const double test_acc = nn::accuracy(*trained.model, nn::make_input(test_std));
    nn::save_checkpoint(*trained.model, ds.schema, out, &st);
    std::cout << "trained " << (mc.arch == nn::Arch::Mlp ? "mlp" : "tab_transformer") << ", "
              << trained.history.size() << " epochs, best epoch " << trained.best_epoch
              << ", test accuracy " << test_acc << "\n";
    return 0;
}

// --- evaluate -----------------------------------------------------------------------

int cmd_evaluate(const std::string& model_path, const std::string& data_csv,
                 const std::string& schema_path, const std::string& trigger_path, int target_class,
                 const std::string& out) {
    data::Schema schema;
    data::Standardizer st;
    auto model = nn::load_checkpoint(model_path, &schema, &st);
    const auto ds = load_table(data_csv, schema_path);
    if (st.per_feature.empty()) st = data::fit_standardizer(ds);

    nlohmann::json j;
    const auto test_in = nn::make_input(data::apply_standardizer(ds, st));
    j["cda"] = harness::compute_cda(*model, test_in);
    j["per_class_accuracy"] = harness::per_class_accuracy(*model, test_in, schema.label_classes);
    if (!trigger_path.empty()) {
        const auto trig = attack::trigger_from_json(slurp(trigger_path));
        const auto eval = attack::make_asr_eval_set(ds, trig, target_class);
        const auto eval_in = nn::make_input(data::apply_standardizer(eval, st));
        j["asr"] = harness::compute_asr(*model, eval_in, target_class);
        j["asr_eval_rows"] = eval.n;
    }
    const std::string text = j.dump(2);
    if (out.empty())
        std::cout << text << "\n";
    else
        spit(out, text);
    return 0;
}

// --- defend -------------------------------------------------------------------------

int cmd_defend(const std::string& defense, const std::string& model_path,
               const std::string& data_csv, const std::string& schema_path,
               const std::string& activations, const std::string& finetune_csv,
               const std::string& trigger_path, int target_class, double rho,
               double stop_fraction, const std::string& out_dir) {
    fs::create_directories(out_dir);
    if (defense == "spectral") {
        if (activations.empty()) throw ConfigError("spectral needs --activations <stem>");
        const auto dump = nn::load_activation_dump(activations);
        defense::SpectralConfig sc;
        sc.analyzed_class = target_class;
        sc.removal_multiplier = rho;
        const auto rep = defense::spectral_signatures(
            dump.latents, dump.labels, sc, dump.poison_mask ? &*dump.poison_mask : nullptr);
        spit(out_dir + "/spectral.json", defense::to_json(rep));
        defense::write_histogram_svg(rep, out_dir + "/spectral.svg");
        std::cout << "spectral: analyzed " << rep.analyzed_rows.size() << " rows, auroc "
                  << rep.auroc << ", flagged " << rep.removed.size() << "\n";
        return 0;
    }

    data::Schema schema;
    data::Standardizer st;
    auto model = nn::load_checkpoint(model_path, &schema, &st);
    const auto ds = load_table(data_csv, schema_path);
    if (st.per_feature.empty()) st = data::fit_standardizer(ds);

    if (defense == "scan") {
        defense::ScanConfig sc;
        const auto rep = defense::reverse_engineering_scan(*model, ds, st, sc);
        spit(out_dir + "/scan.json", defense::to_json(rep));
        std::cout << "scan: " << rep.cells.size() << " cells, " << rep.absolute_flags.size()
                  << " flags\n";
        return 0;
    }
    if (defense == "fineprune") {
        if (trigger_path.empty() || finetune_csv.empty())
            throw ConfigError("fineprune needs --trigger and --finetune-data");
        const auto trig = attack::trigger_from_json(slurp(trigger_path));
        const auto ft = load_table(finetune_csv, schema_path);
        const auto eval = attack::make_asr_eval_set(ds, trig, target_class);
        defense::FinePruneConfig fpc;
        fpc.stop_fraction = stop_fraction;
        const auto res = defense::fine_pruning_defense(
            *model, nn::make_input(data::apply_standardizer(ds, st)),
            nn::make_input(data::apply_standardizer(eval, st)), target_class,
            nn::make_input(data::apply_standardizer(ft, st)), fpc);
        nlohmann::json j;
        j["final_cda"] = res.final_cda;
        j["final_asr"] = res.final_asr;
        nlohmann::json curve = nlohmann::json::array();
        for (const auto& pt : res.curve)
            curve.push_back({{"fraction", pt.fraction}, {"cda", pt.cda}, {"asr", pt.asr}});
        j["curve"] = std::move(curve);
        spit(out_dir + "/fineprune.json", j.dump(2));
        nn::save_checkpoint(*res.defended, schema, out_dir + "/defended.ckpt", &st);
        std::cout << "fineprune: pruned cda " << res.pruned_cda << " asr " << res.pruned_asr
                  << " -> final cda " << res.final_cda << " asr " << res.final_asr << "\n";
        return 0;
    }
    throw ConfigError("unknown defense: " + defense);
}

// --- sweep / report --------------------------------------------------------------------

int cmd_sweep(const std::string& config, double epsilon, std::size_t trigger_size,
              const std::string& trigger_kind, int target_class, std::uint64_t seed,
              const std::string& out_dir) {
    auto grid = harness::sweep_grid_from_json(slurp(config));
    if (epsilon > 0) grid.epsilons = {epsilon};
    if (trigger_size > 0) grid.trigger_sizes = {trigger_size};
    if (!trigger_kind.empty()) grid.kinds = {trigger_kind_from(trigger_kind)};
    if (target_class >= 0) grid.base.poison.target_class = target_class;
    if (seed > 0) grid.base.seed = seed;
    if (!out_dir.empty()) grid.base.out_dir = out_dir;
    const auto res = harness::sweep(grid);
    std::size_t failed = 0;
    for (const auto& e : res.cell_errors)
        if (!e.empty()) ++failed;
    std::cout << "sweep: " << res.cell_configs.size() << " cells, " << failed << " failed, csv at "
              << grid.base.out_dir << "/sweep.csv\n";
    return failed == res.cell_configs.size() && !res.cell_configs.empty() ? 2 : 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& format,
               const std::string& out) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : inputs) arr.push_back(nlohmann::json::parse(slurp(p)));
    if (format == "json") {
        spit(out, arr.dump(2));
    } else if (format == "csv") {
        std::string csv =
            "source,kind,size,epsilon,rep,seed,ba,cda,asr,m,effective_epsilon\n";
        for (std::size_t s = 0; s < arr.size(); ++s) {
            const auto& r = arr[s];
            const auto& cfg = r.at("config");
            for (std::size_t i = 0; i < r.at("runs").size(); ++i) {
                const auto& run = r["runs"][i];
                const auto& a = run.at("attacked");
                csv += inputs[s] + "," + cfg["trigger"]["kind"].get<std::string>() + "," +
                       std::to_string(cfg["trigger"]["size"].get<std::size_t>()) + "," +
                       std::to_string(cfg["poison"]["epsilon"].get<double>()) + "," +
                       std::to_string(i) + "," + std::to_string(run["seed"].get<std::uint64_t>()) +
                       "," + std::to_string(a["ba"].get<double>()) + "," +
                       std::to_string(a["cda"].get<double>()) + "," +
                       std::to_string(a["asr"].get<double>()) + "," +
                       std::to_string(a["m"].get<std::size_t>()) + "," +
                       std::to_string(a["effective_epsilon"].get<double>()) + "\n";
            }
        }
        spit(out, csv);
    } else {
        throw ConfigError("unknown format: " + format);
    }
    std::cout << "wrote " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale backdoor laboratory for tabular classifiers"};
    app.require_subcommand(1);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate the synthetic dataset");
    std::string sy_config, sy_out = "runs/synth";
    std::size_t sy_n = 0, sy_d = 0;
    std::uint64_t sy_seed = 0;
    synth_cmd->add_option("--config", sy_config, "SynthConfig json file");
    synth_cmd->add_option("--n", sy_n);
    synth_cmd->add_option("--d", sy_d);
    synth_cmd->add_option("--seed", sy_seed);
    synth_cmd->add_option("--out", sy_out);

    // importance
    auto* imp_cmd = app.add_subcommand("importance", "surrogate feature-importance ranking");
    std::string im_data, im_schema, im_config, im_out;
    std::uint64_t im_seed = 1;
    imp_cmd->add_option("--data", im_data)->required();
    imp_cmd->add_option("--schema", im_schema)->required();
    imp_cmd->add_option("--config", im_config, "surrogate list json");
    imp_cmd->add_option("--seed", im_seed);
    imp_cmd->add_option("--out", im_out);

    // poison
    auto* poi_cmd = app.add_subcommand("poison", "craft a trigger and poison a table");
    std::string po_data, po_schema, po_trigger, po_kind = "out_of_bounds", po_stat = "mode";
    std::string po_out = "runs/poison";
    std::size_t po_size = 1;
    double po_alpha = 0.1, po_eps = 0.03;
    int po_target = 0;
    bool po_clean = false, po_basis = false;
    std::uint64_t po_seed = 1;
    poi_cmd->add_option("--data", po_data)->required();
    poi_cmd->add_option("--schema", po_schema)->required();
    poi_cmd->add_option("--trigger", po_trigger, "trigger json (skips crafting)");
    poi_cmd->add_option("--trigger-kind", po_kind);
    poi_cmd->add_option("--trigger-size", po_size);
    poi_cmd->add_option("--statistic", po_stat);
    poi_cmd->add_option("--alpha", po_alpha);
    poi_cmd->add_option("--epsilon", po_eps);
    poi_cmd->add_option("--target-class", po_target);
    poi_cmd->add_flag("--clean-label", po_clean);
    poi_cmd->add_flag("--target-class-basis", po_basis);
    poi_cmd->add_option("--seed", po_seed);
    poi_cmd->add_option("--out", po_out);

    // train
    auto* tr_cmd = app.add_subcommand("train", "train a model on a table");
    std::string tr_data, tr_schema, tr_config, tr_arch, tr_out = "model.ckpt";
    std::uint64_t tr_seed = 1;
    tr_cmd->add_option("--data", tr_data)->required();
    tr_cmd->add_option("--schema", tr_schema)->required();
    tr_cmd->add_option("--config", tr_config, "{model, train} json");
    tr_cmd->add_option("--arch", tr_arch, "mlp | tab_transformer");
    tr_cmd->add_option("--seed", tr_seed);
    tr_cmd->add_option("--out", tr_out);

    // evaluate
    auto* ev_cmd = app.add_subcommand("evaluate", "CDA (and ASR with a trigger) of a checkpoint");
    std::string ev_model, ev_data, ev_schema, ev_trigger, ev_out;
    int ev_target = 0;
    ev_cmd->add_option("--model", ev_model)->required();
    ev_cmd->add_option("--data", ev_data)->required();
    ev_cmd->add_option("--schema", ev_schema)->required();
    ev_cmd->add_option("--trigger", ev_trigger);
    ev_cmd->add_option("--target-class", ev_target);
    ev_cmd->add_option("--out", ev_out);

    // defend
    auto* de_cmd = app.add_subcommand("defend", "run a defense against a checkpoint");
    std::string de_defense, de_model, de_data, de_schema, de_acts, de_ft, de_trigger;
    std::string de_out = "runs/defense";
    int de_target = 0;
    double de_rho = 1.5, de_stop = 0.5;
    de_cmd->add_option("--defense", de_defense, "spectral | fineprune | scan")->required();
    de_cmd->add_option("--model", de_model);
    de_cmd->add_option("--data", de_data);
    de_cmd->add_option("--schema", de_schema);
    de_cmd->add_option("--activations", de_acts, "activation dump stem");
    de_cmd->add_option("--finetune-data", de_ft);
    de_cmd->add_option("--trigger", de_trigger);
    de_cmd->add_option("--target-class", de_target);
    de_cmd->add_option("--rho", de_rho);
    de_cmd->add_option("--stop-fraction", de_stop);
    de_cmd->add_option("--out", de_out);

    // sweep
    auto* sw_cmd = app.add_subcommand("sweep", "run an experiment grid");
    std::string sw_config, sw_kind, sw_out;
    double sw_eps = -1.0;
    std::size_t sw_size = 0;
    int sw_target = -1;
    std::uint64_t sw_seed = 0;
    sw_cmd->add_option("--config", sw_config, "SweepGrid json")->required();
    sw_cmd->add_option("--epsilon", sw_eps);
    sw_cmd->add_option("--trigger-size", sw_size);
    sw_cmd->add_option("--trigger-kind", sw_kind);
    sw_cmd->add_option("--target-class", sw_target);
    sw_cmd->add_option("--seed", sw_seed);
    sw_cmd->add_option("--out", sw_out);

    // report
    auto* re_cmd = app.add_subcommand("report", "aggregate result.json files");
    std::vector<std::string> re_in;
    std::string re_format = "csv", re_out = "report.csv";
    re_cmd->add_option("--in", re_in)->required();
    re_cmd->add_option("--format", re_format, "json | csv");
    re_cmd->add_option("--out", re_out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth_cmd) return cmd_synth(sy_config, sy_n, sy_d, sy_seed, sy_out);
        if (*imp_cmd) return cmd_importance(im_data, im_schema, im_config, im_seed, im_out);
        if (*poi_cmd)
            return cmd_poison(po_data, po_schema, po_trigger, po_kind, po_size, po_stat, po_alpha,
                              po_eps, po_target, po_clean, po_basis, po_seed, po_out);
        if (*tr_cmd) return cmd_train(tr_data, tr_schema, tr_config, tr_arch, tr_seed, tr_out);
        if (*ev_cmd) return cmd_evaluate(ev_model, ev_data, ev_schema, ev_trigger, ev_target, ev_out);
        if (*de_cmd)
            return cmd_defend(de_defense, de_model, de_data, de_schema, de_acts, de_ft, de_trigger,
                              de_target, de_rho, de_stop, de_out);
        if (*sw_cmd)
            return cmd_sweep(sw_config, sw_eps, sw_size, sw_kind, sw_target, sw_seed, sw_out);
        if (*re_cmd) return cmd_report(re_in, re_format, re_out);
    } catch (const tablab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "stage failure: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
