#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tablab/attack.hpp"
#include "tablab/nn.hpp"

namespace tablab::defense {

// --- spectral signatures -------------------------------------------------

enum class SpectralScope { PerClass, Global };

struct SpectralConfig {
    SpectralScope scope = SpectralScope::PerClass;
    int analyzed_class = 0;            // PerClass only
    double removal_multiplier = 1.5;   // rho
    std::size_t suspected_budget = 0;  // m-hat; 0 means "use the true mask size when known"
    double tolerance = 1e-10;
    std::size_t max_iterations = 1000;
};

struct SpectralReport {
    int analyzed_class = -1;                 // -1 for global scope
    std::vector<std::size_t> analyzed_rows;  // row ids the scores refer to
    std::vector<double> scores;              // tau_i, aligned with analyzed_rows
    std::vector<double> singular_vector;     // top right singular vector (length L)
    std::vector<std::size_t> removed;        // row ids removed under rho * m_hat
    double auroc = -1.0;                     // vs ground truth, -1 when mask unknown
    bool degenerate = false;                 // centered matrix was all zero
    std::size_t iterations = 0;
    std::vector<double> rayleigh_trace;      // per-iteration rayleigh quotient
    // 50-bin histogram over scores: clean vs poisoned counts (poisoned all
    // zero when the mask is unknown)
    std::vector<double> hist_edges;
    std::vector<std::size_t> hist_clean;
    std::vector<std::size_t> hist_poisoned;
};

// latents: n x L; mask (optional) holds ground-truth poisoned row ids
SpectralReport spectral_signatures(const nn::Tensor& latents, const std::vector<int>& labels,
                                   const SpectralConfig& cfg,
                                   const std::vector<std::size_t>* ground_truth_mask = nullptr);

// power iteration on the gram matrix of a centered n x L matrix; fixed start
// vector, tolerance on the iterate delta. Exposed for direct testing.
struct PowerIterationResult {
    std::vector<double> vector;
    double rayleigh = 0.0;
    std::size_t iterations = 0;
    std::vector<double> rayleigh_trace;
    bool degenerate = false;
};
PowerIterationResult top_right_singular_vector(const double* centered, std::size_t n, std::size_t l,
                                               double tolerance, std::size_t max_iterations);

double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& positive);

// retrain callback: receives surviving row ids (into the poisoned train set),
// returns (asr, cda) of the retrained model
using RetrainFn = std::function<std::pair<double, double>(const std::vector<std::size_t>&)>;
std::pair<double, double> evaluate_spectral_removal(std::size_t train_rows,
                                                    const SpectralReport& report,
                                                    const RetrainFn& retrain);

std::string to_json(const SpectralReport& rep);
void write_histogram_svg(const SpectralReport& rep, const std::string& path);

// --- fine-pruning ----------------------------------------------------------

struct PruneCurvePoint {
    double fraction = 0.0;
    std::size_t masked_units = 0;
    double cda = 0.0;
    double asr = 0.0;
};

struct FinePruneResult {
    std::vector<PruneCurvePoint> curve;  // 5% steps from 0 to stop_fraction
    double pruned_cda = 0.0, pruned_asr = 0.0;
    double final_cda = 0.0, final_asr = 0.0;  // after fine-tuning
    std::unique_ptr<nn::Model> defended;
};

struct FinePruneConfig {
    double stop_fraction = 0.5;
    double step = 0.05;
    bool per_block_quota = false;  // rank within each block instead of globally
    nn::TrainConfig finetune;      // 80/20 split applied to the finetune set
};

FinePruneResult fine_pruning_defense(const nn::Model& model, const nn::ModelInput& clean_eval,
                                     const nn::ModelInput& asr_eval, int target_class,
                                     const nn::ModelInput& finetune_set, const FinePruneConfig& cfg);

// --- reverse-engineering sweep ----------------------------------------------

struct ScanConfig {
    std::size_t grid_points = 101;   // per numeric feature
    double overshoot = 0.1;          // grid widens range_j by this fraction on both sides
    double dominance_threshold = 0.95;
    double differential_margin = 0.3;  // extra share over the clean model to flag
};

struct ScanCell {
    std::size_t feature = 0;
    double value = 0.0;
    std::vector<double> class_shares;  // sums to 1
    int dominant_class = 0;
    double dominance = 0.0;
};

struct ScanFlag {
    std::size_t feature = 0;
    double value = 0.0;
    int dominant_class = 0;
    double dominance = 0.0;
    double clean_share = -1.0;  // share of the same class under the clean model, if supplied
};

struct SweepReport {
    std::vector<ScanCell> cells;
    std::vector<ScanFlag> absolute_flags;      // dominance >= threshold
    std::vector<ScanFlag> differential_flags;  // also beats the clean model by the margin
};

// test set is in native units; the standardizer is the victim's preprocessing
SweepReport reverse_engineering_scan(nn::Model& model, const data::Dataset& test,
                                     const data::Standardizer& st, const ScanConfig& cfg,
                                     nn::Model* clean_reference = nullptr);

// single (feature, value) probe with the same semantics as one scan cell
ScanCell scan_single_value(nn::Model& model, const data::Dataset& test,
                           const data::Standardizer& st, std::size_t feature, double value);

std::string to_json(const SweepReport& rep);

}  // namespace tablab::defense
