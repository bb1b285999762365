#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tablab/data.hpp"
#include "tablab/importance.hpp"

namespace tablab::attack {

enum class TriggerKind { OutOfBounds, InBounds, AdaptiveTargetMode, Explicit };
enum class InBoundsStat { Min, Max, Mean, Median, Mode };
enum class Direction { MostImportant, LeastImportant };
enum class LabelMode { Dirty, Clean };
enum class RateBasis { WholeTrain, TargetClassOnly };

struct TriggerSpec {
    std::vector<std::size_t> features;  // S, in selection order
    std::vector<double> values;         // delta, native units, aligned with features
    TriggerKind kind = TriggerKind::Explicit;
    double alpha = 0.1;                 // OutOfBounds only
    InBoundsStat statistic = InBoundsStat::Mode;  // InBounds only

    void validate() const;
    void apply(data::Dataset& ds, std::size_t row) const;
};

struct PoisonConfig {
    double epsilon = 0.03;
    int target_class = 0;
    LabelMode label_mode = LabelMode::Dirty;
    RateBasis rate_basis = RateBasis::WholeTrain;
    bool append_mode = false;  // default replaces rows in place, keeping n fixed
    std::uint64_t seed = 0;

    void validate() const;
};

struct PoisonResult {
    data::Dataset train;                // poisoned copy
    std::vector<std::size_t> mask;      // modified (or appended) row indices, sorted
    data::Dataset asr_eval;             // filled by the harness via make_asr_eval_set
    std::size_t m = 0;
    double effective_epsilon = 0.0;     // m / n over the poisoned train set
    std::size_t collision_count = 0;    // clean rows already matching the trigger
};

// ranking order, numeric features only, k of them
std::vector<std::size_t> select_trigger_features(const importance::ImportanceScores& scores,
                                                 const data::Schema& schema, std::size_t k,
                                                 Direction direction, std::size_t rank_offset = 0);

TriggerSpec craft_out_of_bounds(const std::vector<data::FeatureSupport>& supports, double alpha = 0.1);
TriggerSpec craft_in_bounds(const std::vector<data::FeatureSupport>& supports,
                            InBoundsStat statistic = InBoundsStat::Mode);
TriggerSpec craft_adaptive(const data::Dataset& ds, const std::vector<std::size_t>& features,
                           int target_class);

std::size_t verify_collision(const data::Dataset& ds, const TriggerSpec& trig,
                             const std::vector<double>& tolerance = {});

PoisonResult poison_dataset(const data::Dataset& ds, const TriggerSpec& trig, const PoisonConfig& cfg);

// every test row whose true label != target gets the trigger; target-class
// rows are dropped; original labels kept for bookkeeping
data::Dataset make_asr_eval_set(const data::Dataset& test, const TriggerSpec& trig, int target_class);

std::string to_json(const TriggerSpec& trig);
TriggerSpec trigger_from_json(const std::string& text);
std::string to_json(const PoisonConfig& cfg);
PoisonConfig poison_config_from_json(const std::string& text);

const char* to_string(TriggerKind k);
const char* to_string(InBoundsStat s);

}  // namespace tablab::attack
