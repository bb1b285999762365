#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tablab/attack.hpp"
#include "tablab/defense.hpp"
#include "tablab/nn.hpp"
#include "tablab/synth.hpp"
#include "tablab/trees.hpp"

namespace tablab::harness {

// --- metrics ---------------------------------------------------------------

double compute_asr(nn::Model& model, const nn::ModelInput& asr_eval, int target_class);
double compute_cda(nn::Model& model, const nn::ModelInput& clean_test);
std::vector<double> per_class_accuracy(nn::Model& model, const nn::ModelInput& in,
                                       std::size_t classes);

struct MetricsReport {
    double ba = -1.0;
    double cda = -1.0;
    double asr = -1.0;
    std::size_t m = 0;
    double effective_epsilon = 0.0;
    std::vector<double> per_class_accuracy;
    std::uint64_t seed = 0;
    double runtime_seconds = 0.0;
};

// --- experiment config -------------------------------------------------------

struct DatasetSource {
    std::string csv_path;     // with schema_path, or
    std::string schema_path;
    std::optional<synth::SynthConfig> synth;  // generated per repetition (seed + rep)
    std::size_t subsample_limit = 50000;      // csv mode: stratified cap
};

struct TriggerRecipe {
    attack::TriggerKind kind = attack::TriggerKind::OutOfBounds;
    std::size_t size = 1;  // k
    attack::Direction direction = attack::Direction::MostImportant;
    std::size_t rank_offset = 0;  // trigger position: offset into the importance ranking
    attack::InBoundsStat statistic = attack::InBoundsStat::Mode;
    double alpha = 0.1;
    std::vector<std::size_t> explicit_features;  // Explicit kind only
    std::vector<double> explicit_values;
};

struct DefenseSelection {
    bool spectral = false;
    bool fineprune = false;
    bool scan = false;
};

struct ExperimentConfig {
    DatasetSource dataset;
    nn::ModelConfig model;
    nn::TrainConfig train;
    std::vector<trees::TreeEnsembleConfig> surrogates;  // default: random forest + gbdt
    TriggerRecipe trigger;
    attack::PoisonConfig poison;
    double train_frac = 10.0 / 13.0;
    double val_frac = 1.0 / 13.0;
    double test_frac = 2.0 / 13.0;
    bool standardize_fit_on_train = true;  // false: fit on train+val+test
    bool poison_validation = true;         // early stopping sees the trigger
    DefenseSelection defenses;
    defense::SpectralConfig spectral;
    defense::FinePruneConfig fineprune;
    defense::ScanConfig scan;
    std::size_t repetitions = 5;
    std::uint64_t seed = 1;  // repetition r uses seed + r
    std::string out_dir = "runs/exp";
    bool persist_datasets = false;

    void validate() const;
};

std::vector<trees::TreeEnsembleConfig> default_surrogates();

// --- per-run outcome ---------------------------------------------------------

struct SpectralOutcome {
    double auroc = -1.0;
    std::size_t removed = 0;
    std::size_t true_positives = 0;  // removed rows that are actually poisoned
    double retrain_asr = -1.0;
    double retrain_cda = -1.0;
};

struct FinePruneOutcome {
    double pruned_asr = -1.0, pruned_cda = -1.0;
    double final_asr = -1.0, final_cda = -1.0;
    double asr_at_10pct = -1.0;
    std::vector<defense::PruneCurvePoint> curve;
};

struct ScanOutcome {
    std::size_t absolute_flag_count = 0;
    std::size_t differential_flag_count = 0;
    // best dominance seen on a true trigger feature within one grid step of
    // its true value
    double trigger_dominance = 0.0;
    bool trigger_flagged = false;
};

struct RunResult {
    std::uint64_t seed = 0;
    MetricsReport baseline;  // ba filled
    MetricsReport attacked;
    attack::TriggerSpec trigger;
    std::size_t collision_count = 0;
    std::optional<SpectralOutcome> spectral;
    std::optional<FinePruneOutcome> fineprune;
    std::optional<ScanOutcome> scan;
    std::vector<std::size_t> importance_ranking;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<RunResult> runs;
    MetricsReport mean;  // over attacked runs (ba averaged too)
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

// --- sweep ---------------------------------------------------------------------

struct SweepGrid {
    ExperimentConfig base;
    std::vector<double> epsilons;
    std::vector<std::size_t> trigger_sizes;
    std::vector<std::size_t> positions;  // rank offsets
    std::vector<attack::TriggerKind> kinds;

    std::size_t cells() const {
        return epsilons.size() * trigger_sizes.size() * positions.size() * kinds.size();
    }
};

struct SweepResult {
    std::vector<ExperimentConfig> cell_configs;  // grid order
    std::vector<ExperimentResult> cell_results;
    std::vector<std::string> cell_errors;  // empty string = ok
};

SweepResult sweep(const SweepGrid& grid);

// --- reports -------------------------------------------------------------------

enum class ReportFormat { Json, Csv };

std::string to_json(const MetricsReport& r);
std::string to_json(const RunResult& r);
std::string to_json(const ExperimentResult& r);
std::string to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const std::string& text);
std::string to_json(const SweepGrid& g);
SweepGrid sweep_grid_from_json(const std::string& text);

void emit_report(const std::vector<ExperimentResult>& results, ReportFormat format,
                 const std::string& path);
std::string sweep_csv(const SweepResult& res);

// ASR and CDA vs epsilon, one polyline pair per (kind, size) configuration
void emit_plots(const SweepResult& res, const std::string& path);

// canonical config hash for artifact caching (fnv-1a of canonical json)
std::string config_key(const std::string& canonical_json);

}  // namespace tablab::harness
