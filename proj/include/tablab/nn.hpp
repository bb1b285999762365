#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tablab/data.hpp"
#include "tablab/tensor.hpp"

namespace tablab::nn {

enum class Arch { Mlp, TabTransformer };

struct ModelConfig {
    Arch arch = Arch::Mlp;
    // MLP: hidden layer widths; the last one is the latent width L
    std::vector<std::size_t> hidden_widths = {64, 64};
    // transformer stand-in: feature tokens + cls token, pre-norm blocks,
    // head = linear(d_model -> L) + gelu + linear(L -> classes)
    std::size_t d_model = 32;
    std::size_t heads = 4;
    std::size_t blocks = 2;
    std::size_t ffn_hidden = 64;
    std::size_t latent_width = 64;  // L for the transformer head
    std::size_t num_classes = 2;
    std::uint64_t seed = 0;

    void validate() const;
    std::size_t latent() const {
        return arch == Arch::Mlp ? hidden_widths.back() : latent_width;
    }
};

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t batch_size = 128;
    std::size_t max_epochs = 200;
    std::size_t patience = 5;  // epochs past the best validation accuracy
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
};

// standardized numeric columns + categorical index columns, dataset order
struct ModelInput {
    std::size_t rows = 0;
    std::size_t n_num = 0;
    std::size_t n_cat = 0;
    std::vector<double> numeric;            // rows x n_num
    std::vector<std::int32_t> categorical;  // rows x n_cat
    std::vector<int> labels;
};

ModelInput make_input(const data::Dataset& standardized);

struct Batch {
    const double* numeric = nullptr;
    const std::int32_t* categorical = nullptr;
    std::size_t rows = 0;
    std::size_t n_num = 0;
    std::size_t n_cat = 0;
};

Batch full_batch(const ModelInput& in);

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor m;  // adam first moment
    Tensor v;  // adam second moment
};

class ParamStore {
public:
    Param& add(const std::string& name, std::vector<std::size_t> shape);
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    std::vector<Param>& items() { return items_; }
    const std::vector<Param>& items() const { return items_; }
    void zero_grad();
    std::size_t total_values() const;

private:
    std::vector<Param> items_;
};

// glorot-uniform on a stream derived from the parameter name, so init does
// not depend on registration order
void init_glorot(Param& p, std::size_t fan_in, std::size_t fan_out, std::uint64_t seed);

class Model {
public:
    virtual ~Model() = default;

    virtual const ModelConfig& config() const = 0;
    virtual ParamStore& params() = 0;
    virtual const ParamStore& params() const = 0;

    // logits: rows x num_classes; latents (optional): rows x L, taken at the
    // input of the final linear layer
    virtual void forward(const Batch& b, Tensor& logits, Tensor* latents = nullptr) = 0;

    // mean cross-entropy; accumulates parameter gradients; optionally counts
    // argmax hits against labels
    virtual double forward_backward(const Batch& b, const int* labels, std::size_t* correct = nullptr) = 0;

    virtual std::size_t prunable_units() const = 0;
    // adds |activation| of each prunable unit over this batch into acc
    // (length prunable_units()); returns the number of activation samples
    // contributed per unit
    virtual std::size_t accumulate_unit_activation(const Batch& b, double* acc) = 0;

    virtual std::unique_ptr<Model> clone() const = 0;

    const std::vector<std::uint8_t>& prune_mask() const { return prune_mask_; }
    void set_prune_mask(std::vector<std::uint8_t> mask);

protected:
    std::vector<std::uint8_t> prune_mask_;  // 1 = alive
};

std::unique_ptr<Model> make_model(const ModelConfig& cfg, const data::Schema& schema);

struct TrainedModel {
    std::unique_ptr<Model> model;
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0;
    bool diverged = false;
};

TrainedModel train(std::unique_ptr<Model> model, const ModelInput& train_in,
                   const ModelInput& val_in, const TrainConfig& cfg);

// keeps current weights and prune mask, fresh optimizer state
TrainedModel finetune(std::unique_ptr<Model> model, const ModelInput& train_in,
                      const ModelInput& val_in, const TrainConfig& cfg);

std::vector<int> predict(Model& model, const ModelInput& in, std::size_t batch_size = 256);
Tensor latents(Model& model, const ModelInput& in, std::size_t batch_size = 256);
double accuracy(Model& model, const ModelInput& in, std::size_t batch_size = 256);

// mask covering the `fraction` of units with the lowest mean |activation|
// over clean_eval (ascending order, global across blocks/layers)
std::vector<std::uint8_t> prune_mask_for_fraction(Model& model, const ModelInput& clean_eval,
                                                  double fraction);
// the ascending unit order itself (index per prunable unit)
std::vector<std::size_t> prune_order(Model& model, const ModelInput& clean_eval);

// --- persistence ---------------------------------------------------------

// standardizer (when given) rides along in the header so a checkpoint can
// preprocess native-unit data by itself
void save_checkpoint(const Model& model, const data::Schema& schema, const std::string& path,
                     const data::Standardizer* standardizer = nullptr);
std::unique_ptr<Model> load_checkpoint(const std::string& path, data::Schema* schema_out = nullptr,
                                       data::Standardizer* standardizer_out = nullptr);

// activation dump: <stem>.bin (rows x L doubles, little endian) +
// <stem>.json header {n, L, labels, poison_mask?}
struct ActivationDump {
    std::size_t n = 0;
    std::size_t latent_width = 0;
    Tensor latents;
    std::vector<int> labels;
    std::optional<std::vector<std::size_t>> poison_mask;
};

void save_activation_dump(const Tensor& latents, const std::vector<int>& labels,
                          const std::vector<std::size_t>* poison_mask, const std::string& stem);
ActivationDump load_activation_dump(const std::string& stem);

// smooth activation used across both architectures
double gelu(double x);
double gelu_grad(double x);
void softmax_rows(double* x, std::size_t rows, std::size_t cols);

}  // namespace tablab::nn
