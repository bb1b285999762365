#include "tablab/harness.hpp"

namespace tablab::harness {

double compute_asr(nn::Model& model, const nn::ModelInput& asr_eval, int target_class) {
    if (asr_eval.rows == 0) throw ConfigError("compute_asr: empty evaluation set");
    const auto preds = nn::predict(model, asr_eval);
    std::size_t hits = 0;
    for (const auto p : preds)
        if (p == target_class) ++hits;
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double compute_cda(nn::Model& model, const nn::ModelInput& clean_test) {
    if (clean_test.rows == 0) throw ConfigError("compute_cda: empty test set");
    return nn::accuracy(model, clean_test);
}

std::vector<double> per_class_accuracy(nn::Model& model, const nn::ModelInput& in,
                                       std::size_t classes) {
    const auto preds = nn::predict(model, in);
    std::vector<std::size_t> hit(classes, 0), total(classes, 0);
    for (std::size_t i = 0; i < in.rows; ++i) {
        const auto c = static_cast<std::size_t>(in.labels[i]);
        total[c]++;
        if (preds[i] == in.labels[i]) hit[c]++;
    }
    std::vector<double> out(classes, 0.0);
    for (std::size_t c = 0; c < classes; ++c)
        out[c] = total[c] ? static_cast<double>(hit[c]) / static_cast<double>(total[c]) : 0.0;
    return out;
}

}  // namespace tablab::harness
