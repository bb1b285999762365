#include <cmath>

#include "tablab/nn.hpp"
#include "tablab/rng.hpp"

namespace tablab::nn {

void ModelConfig::validate() const {
    if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
    if (arch == Arch::Mlp) {
        if (hidden_widths.empty()) throw ConfigError("mlp: need at least one hidden layer");
        for (const auto w : hidden_widths)
            if (w == 0) throw ConfigError("mlp: zero-width hidden layer");
    } else {
        if (d_model == 0 || heads == 0 || blocks == 0 || ffn_hidden == 0 || latent_width == 0)
            throw ConfigError("transformer: zero-sized dimension");
        if (d_model % heads != 0) throw ConfigError("transformer: d_model must be divisible by heads");
    }
}

void TrainConfig::validate() const {
    if (lr <= 0) throw ConfigError("train: lr must be positive");
    if (patience < 1) throw ConfigError("train: patience must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
}

Param& ParamStore::add(const std::string& name, std::vector<std::size_t> shape) {
    for (const auto& p : items_)
        if (p.name == name) throw ConfigError("duplicate parameter: " + name);
    Param p;
    p.name = name;
    p.value.reset(shape);
    p.grad.reset(shape);
    p.m.reset(shape);
    p.v.reset(std::move(shape));
    items_.push_back(std::move(p));
    return items_.back();
}

Param& ParamStore::at(const std::string& name) {
    for (auto& p : items_)
        if (p.name == name) return p;
    throw ConfigError("unknown parameter: " + name);
}

const Param& ParamStore::at(const std::string& name) const {
    for (const auto& p : items_)
        if (p.name == name) return p;
    throw ConfigError("unknown parameter: " + name);
}

void ParamStore::zero_grad() {
    for (auto& p : items_) p.grad.fill(0.0);
}

std::size_t ParamStore::total_values() const {
    std::size_t t = 0;
    for (const auto& p : items_) t += p.value.size();
    return t;
}

namespace {
std::uint64_t name_stream(const std::string& name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // fnv-1a
    for (const char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}
}  // namespace

void init_glorot(Param& p, std::size_t fan_in, std::size_t fan_out, std::uint64_t seed) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    rng::Stream stream(seed, name_stream(p.name));
    for (auto& x : p.value.v) x = (2.0 * stream.next_uniform() - 1.0) * a;
}

void Model::set_prune_mask(std::vector<std::uint8_t> mask) {
    if (mask.size() != prunable_units()) throw ConfigError("prune mask length mismatch");
    prune_mask_ = std::move(mask);
}

}  // namespace tablab::nn
