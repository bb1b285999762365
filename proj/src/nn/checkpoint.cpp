#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tablab/nn.hpp"

// Checkpoint container: "TLCK" magic, u32 version, u64 header length, JSON
// header (model config, schema, prune mask, tensor directory), then the raw
// little-endian f64 parameter blob in directory order.

namespace tablab::nn {

namespace {

constexpr char kMagic[4] = {'T', 'L', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

nlohmann::json config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["arch"] = cfg.arch == Arch::Mlp ? "mlp" : "tab_transformer";
    j["hidden_widths"] = cfg.hidden_widths;
    j["d_model"] = cfg.d_model;
    j["heads"] = cfg.heads;
    j["blocks"] = cfg.blocks;
    j["ffn_hidden"] = cfg.ffn_hidden;
    j["latent_width"] = cfg.latent_width;
    j["num_classes"] = cfg.num_classes;
    j["seed"] = cfg.seed;
    return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    const auto arch = j.at("arch").get<std::string>();
    if (arch == "mlp") cfg.arch = Arch::Mlp;
    else if (arch == "tab_transformer") cfg.arch = Arch::TabTransformer;
    else throw ConfigError("unknown arch: " + arch);
    cfg.hidden_widths = j.at("hidden_widths").get<std::vector<std::size_t>>();
    cfg.d_model = j.at("d_model").get<std::size_t>();
    cfg.heads = j.at("heads").get<std::size_t>();
    cfg.blocks = j.at("blocks").get<std::size_t>();
    cfg.ffn_hidden = j.at("ffn_hidden").get<std::size_t>();
    cfg.latent_width = j.at("latent_width").get<std::size_t>();
    cfg.num_classes = j.at("num_classes").get<std::size_t>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

}  // namespace

void save_checkpoint(const Model& model, const data::Schema& schema, const std::string& path,
                     const data::Standardizer* standardizer) {
    nlohmann::json header;
    header["config"] = config_to_json(model.config());
    header["schema"] = nlohmann::json::parse(data::schema_to_json(schema));
    header["prune_mask"] = std::vector<int>(model.prune_mask().begin(), model.prune_mask().end());
    if (standardizer) {
        nlohmann::json st = nlohmann::json::array();
        for (const auto& a : standardizer->per_feature) {
            if (a) {
                nlohmann::json aj;
                aj["mean"] = a->mean;
                aj["std"] = a->std;
                st.push_back(std::move(aj));
            } else {
                st.push_back(nullptr);
            }
        }
        header["standardizer"] = std::move(st);
    }
    nlohmann::json dir = nlohmann::json::array();
    for (const auto& p : model.params().items()) {
        nlohmann::json t;
        t["name"] = p.name;
        t["shape"] = p.value.shape;
        dir.push_back(std::move(t));
    }
    header["tensors"] = std::move(dir);
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw StageError("cannot write checkpoint: " + path);
    out.write(kMagic, 4);
    const std::uint32_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    const std::uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const auto& p : model.params().items())
        out.write(reinterpret_cast<const char*>(p.value.data()),
                  static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    if (!out) throw StageError("checkpoint write failed: " + path);
}

std::unique_ptr<Model> load_checkpoint(const std::string& path, data::Schema* schema_out,
                                       data::Standardizer* standardizer_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw ConfigError("not a checkpoint file: " + path);
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    if (version != kVersion) throw ConfigError("unsupported checkpoint version");
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw ConfigError("truncated checkpoint header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(htext);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint header: ") + e.what());
    }
    const ModelConfig cfg = config_from_json(header.at("config"));
    const data::Schema schema = data::schema_from_json(header.at("schema").dump());
    auto model = make_model(cfg, schema);

    for (const auto& t : header.at("tensors")) {
        auto& p = model->params().at(t.at("name").get<std::string>());
        const auto shape = t.at("shape").get<std::vector<std::size_t>>();
        if (shape != p.value.shape) throw ConfigError("checkpoint tensor shape mismatch: " + p.name);
        in.read(reinterpret_cast<char*>(p.value.data()),
                static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
    if (!in) throw ConfigError("truncated checkpoint blob");

    const auto mask_ints = header.at("prune_mask").get<std::vector<int>>();
    model->set_prune_mask(std::vector<std::uint8_t>(mask_ints.begin(), mask_ints.end()));
    if (schema_out) *schema_out = schema;
    if (standardizer_out && header.contains("standardizer")) {
        standardizer_out->per_feature.clear();
        for (const auto& aj : header["standardizer"]) {
            if (aj.is_null()) {
                standardizer_out->per_feature.emplace_back(std::nullopt);
            } else {
                data::Affine a;
                a.mean = aj.at("mean").get<double>();
                a.std = aj.at("std").get<double>();
                standardizer_out->per_feature.emplace_back(a);
            }
        }
    }
    return model;
}

void save_activation_dump(const Tensor& latents, const std::vector<int>& labels,
                          const std::vector<std::size_t>* poison_mask, const std::string& stem) {
    if (latents.shape.size() != 2 || latents.dim(0) != labels.size())
        throw ConfigError("activation dump: latents must be (n, L) with one label per row");
    nlohmann::json header;
    header["n"] = latents.dim(0);
    header["L"] = latents.dim(1);
    header["labels"] = labels;
    if (poison_mask) header["poison_mask"] = *poison_mask;
    std::ofstream jh(stem + ".json");
    if (!jh) throw StageError("cannot write activation header: " + stem + ".json");
    jh << header.dump(2) << '\n';

    std::ofstream bin(stem + ".bin", std::ios::binary);
    if (!bin) throw StageError("cannot write activation blob: " + stem + ".bin");
    bin.write(reinterpret_cast<const char*>(latents.data()),
              static_cast<std::streamsize>(latents.size() * sizeof(double)));
    if (!bin) throw StageError("activation blob write failed");
}

ActivationDump load_activation_dump(const std::string& stem) {
    std::ifstream jh(stem + ".json");
    if (!jh) throw ConfigError("cannot open activation header: " + stem + ".json");
    nlohmann::json header;
    try {
        jh >> header;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("activation header: ") + e.what());
    }
    ActivationDump dump;
    dump.n = header.at("n").get<std::size_t>();
    dump.latent_width = header.at("L").get<std::size_t>();
    dump.labels = header.at("labels").get<std::vector<int>>();
    if (header.contains("poison_mask"))
        dump.poison_mask = header["poison_mask"].get<std::vector<std::size_t>>();
    dump.latents.reset({dump.n, dump.latent_width});
    std::ifstream bin(stem + ".bin", std::ios::binary);
    if (!bin) throw ConfigError("cannot open activation blob: " + stem + ".bin");
    bin.read(reinterpret_cast<char*>(dump.latents.data()),
             static_cast<std::streamsize>(dump.latents.size() * sizeof(double)));
    if (!bin) throw ConfigError("truncated activation blob");
    return dump;
}

}  // namespace tablab::nn
