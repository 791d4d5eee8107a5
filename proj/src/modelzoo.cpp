#include "tlbench/modelzoo.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tlbench {

using nlohmann::json;

const std::vector<BackboneInfo>& backbone_registry() {
    // Layer counts as published for each family member; SyntheticTiny reports
    // its actual enumeration (4 conv blocks with batch norm).
    static const std::vector<BackboneInfo> registry = {
        {"VGG16", 41, 138.0, 2014, "VGG", false},
        {"ResNet50", 177, 25.6, 2015, "ResNet", false},
        {"DenseNet121", 121, 8.0, 2017, "DenseNet", false},
        {"MobileNet", 88, 4.3, 2017, "MobileNet", false},
        {"MobileNetV2", 88, 3.4, 2018, "MobileNet", false},
        {"NASNetMobile", 88, 5.3, 2018, "NASNet", false},
        {"EfficientNetB0", 237, 5.3, 2019, "EfficientNet", false},
        {"EfficientNetV2B0", 329, 7.1, 2021, "EfficientNet", false},
        {"ConvNeXtTiny", 59, 28.0, 2022, "ConvNeXt", false},
        {"SyntheticTiny", 15, 0.025, 2025, "Synthetic", true},
    };
    return registry;
}

const BackboneInfo& backbone_info(const std::string& name) {
    for (const auto& info : backbone_registry())
        if (info.name == name) return info;
    throw RegistryError(fmt::format("unknown backbone '{}'", name));
}

void HeadConfig::validate() const {
    if (!(dropout_rate > 0.0 && dropout_rate < 1.0))
        throw ConfigError("dropout_rate must lie in (0,1)");
    if (dense_units < 1) throw ConfigError("dense_units must be >= 1");
    if (l2_strength < 0.0) throw ConfigError("l2_strength must be nonnegative");
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
}

void OptimizerSpec::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be nonnegative");
}

OptimizerSpec optimizer_preset(const std::string& name) {
    if (name == "adamw_manual")
        return {nn::OptimizerFamily::adam_decoupled_wd, 5e-5, 1e-5};
    if (name == "adamw_tuned")
        return {nn::OptimizerFamily::adam_decoupled_wd, 3.7758e-4, 7.4855e-5};
    throw RegistryError(fmt::format("unknown optimizer preset '{}'", name));
}

int num_freeze_layers(int layer_count, double freeze_rate) {
    if (layer_count < 0) throw RangeError("layer_count must be nonnegative");
    if (!(freeze_rate >= 0.0 && freeze_rate <= 1.0))
        throw RangeError(fmt::format("freeze_rate {} outside [0,1]", freeze_rate));
    return static_cast<int>(std::floor(static_cast<double>(layer_count) * freeze_rate));
}

namespace {

/// 4 conv blocks (8/16/32/64 channels, 3x3, batch norm, ReLU) with 2x2 max
/// pooling after the first three; final feature map is C=64 at 1/8 spatial
/// resolution, which keeps Grad-CAM maps usable on small inputs.
void add_synthetic_tiny(nn::Model& model) {
    const int channels[4] = {8, 16, 32, 64};
    for (int block = 0; block < 4; ++block) {
        const std::string suffix = std::to_string(block + 1);
        model.add(std::make_unique<nn::Conv2d>("backbone.conv" + suffix, channels[block]));
        model.add(std::make_unique<nn::BatchNorm>("backbone.bn" + suffix));
        model.add(std::make_unique<nn::ReLU>("backbone.relu" + suffix));
        if (block < 3) model.add(std::make_unique<nn::MaxPool2>("backbone.pool" + suffix));
    }
}

} // namespace

std::unique_ptr<nn::Model> build_model(const ModelSpec& spec, std::uint64_t seed) {
    const BackboneInfo& info = backbone_info(spec.backbone.name);
    spec.head.validate();
    if (!(spec.freeze_rate >= 0.0 && spec.freeze_rate <= 1.0))
        throw RangeError(fmt::format("freeze_rate {} outside [0,1]", spec.freeze_rate));
    if (!info.available_offline)
        throw BackboneUnavailableError(fmt::format(
            "backbone '{}' has no weights available in this environment (pretrained "
            "downloads are disabled); use SyntheticTiny for offline runs",
            info.name));
    if (spec.backbone.pretrained)
        throw BackboneUnavailableError(fmt::format(
            "no pretrained weights exist for '{}'; set pretrained=false or use "
            "SyntheticTiny",
            info.name));
    if (spec.input.c != 3)
        throw ConfigError(fmt::format("model input must have 3 channels, got {}", spec.input.c));

    auto model = std::make_unique<nn::Model>(spec.input);
    add_synthetic_tiny(*model);
    model->set_backbone_layers(model->layer_count());

    const bool binary = spec.head.num_classes == 2;
    model->add(std::make_unique<nn::GlobalAvgPool>("head.gap"));
    model->add(std::make_unique<nn::BatchNorm>("head.bn"));
    model->add(std::make_unique<nn::Dropout>("head.dropout", spec.head.dropout_rate));
    model->add(std::make_unique<nn::Dense>("head.dense", spec.head.dense_units,
                                           spec.head.l2_strength, nn::DenseInit::he_normal));
    model->add(std::make_unique<nn::ReLU>("head.relu"));
    model->add(std::make_unique<nn::Dense>("head.logits", binary ? 1 : spec.head.num_classes,
                                           0.0, nn::DenseInit::glorot_uniform));
    if (binary) model->add(std::make_unique<nn::Sigmoid>("head.sigmoid"));
    else model->add(std::make_unique<nn::Softmax>("head.softmax"));

    model->build(seed);
    const int frozen = num_freeze_layers(model->backbone_layers(), spec.freeze_rate);
    model->apply_freeze(frozen, spec.bn_inference_when_frozen);
    return model;
}

std::unique_ptr<nn::Optimizer> build_optimizer(const OptimizerSpec& spec) {
    spec.validate();
    switch (spec.family) {
    case nn::OptimizerFamily::sgd: return std::make_unique<nn::Sgd>(spec.learning_rate);
    case nn::OptimizerFamily::rmsprop: return std::make_unique<nn::RmsProp>(spec.learning_rate);
    case nn::OptimizerFamily::adam: return std::make_unique<nn::Adam>(spec.learning_rate);
    case nn::OptimizerFamily::nadam:
        return std::make_unique<nn::Adam>(spec.learning_rate, 0.9, 0.999, 1e-7, 0.0, true);
    case nn::OptimizerFamily::adam_decoupled_wd:
        return std::make_unique<nn::Adam>(spec.learning_rate, 0.9, 0.999, 1e-7,
                                          spec.weight_decay, false);
    }
    throw RegistryError("unknown optimizer family");
}

std::unique_ptr<nn::Loss> build_loss(int num_classes) {
    if (num_classes < 2)
        throw ConfigError(fmt::format("build_loss needs num_classes >= 2, got {}", num_classes));
    if (num_classes == 2) return std::make_unique<nn::BinaryCrossEntropy>();
    return std::make_unique<nn::CategoricalCrossEntropy>();
}

// --- (de)serialization ------------------------------------------------------

std::string model_spec_to_json(const ModelSpec& spec) {
    json j;
    j["backbone"] = {{"name", spec.backbone.name}, {"pretrained", spec.backbone.pretrained}};
    j["freeze_rate"] = spec.freeze_rate;
    j["head"] = {{"dropout_rate", spec.head.dropout_rate},
                 {"dense_units", spec.head.dense_units},
                 {"l2_strength", spec.head.l2_strength},
                 {"num_classes", spec.head.num_classes}};
    j["input"] = {spec.input.c, spec.input.h, spec.input.w};
    j["bn_inference_when_frozen"] = spec.bn_inference_when_frozen;
    return j.dump();
}

ModelSpec model_spec_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    ModelSpec spec;
    spec.backbone.name = j.at("backbone").at("name").get<std::string>();
    spec.backbone.pretrained = j.at("backbone").at("pretrained").get<bool>();
    spec.freeze_rate = j.at("freeze_rate").get<double>();
    spec.head.dropout_rate = j.at("head").at("dropout_rate").get<double>();
    spec.head.dense_units = j.at("head").at("dense_units").get<int>();
    spec.head.l2_strength = j.at("head").at("l2_strength").get<double>();
    spec.head.num_classes = j.at("head").at("num_classes").get<int>();
    spec.input = nn::Shape{j.at("input").at(0).get<int>(), j.at("input").at(1).get<int>(),
                           j.at("input").at(2).get<int>()};
    spec.bn_inference_when_frozen = j.value("bn_inference_when_frozen", true);
    return spec;
}

namespace {
constexpr char kCheckpointMagic[8] = {'T', 'L', 'B', 'C', 'K', '0', '0', '1'};
}

void save_checkpoint(const std::string& path, const ModelSpec& spec, const nn::Model& model,
                     const std::string& metadata_json) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    json header;
    header["spec"] = json::parse(model_spec_to_json(spec));
    header["meta"] = json::parse(metadata_json);
    const std::string header_text = header.dump();
    const std::uint64_t header_len = header_text.size();
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_text.data(), static_cast<std::streamsize>(header_len));
    model.save_state(out);
    if (!out) throw IoError("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path, std::uint64_t seed) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("checkpoint not found: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw ConfigError("not a tlbench checkpoint: " + path);
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    if (!in || header_len > (1u << 20)) throw ConfigError("corrupt checkpoint header: " + path);
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    json header = json::parse(header_text);

    Checkpoint ckpt;
    ckpt.spec = model_spec_from_json(header.at("spec").dump());
    ckpt.metadata_json = header.at("meta").dump();
    ckpt.model = build_model(ckpt.spec, seed);
    ckpt.model->load_state(in);
    return ckpt;
}

void write_provenance(const std::string& path, const ModelSpec& spec, const OptimizerSpec& opt,
                      std::uint64_t seed) {
    json j;
    j["model"] = json::parse(model_spec_to_json(spec));
    j["optimizer"] = {{"family", nn::to_string(opt.family)},
                      {"learning_rate", opt.learning_rate},
                      {"weight_decay", opt.weight_decay}};
    j["seed"] = seed;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write provenance sidecar: " + path);
    out << j.dump(2) << "\n";
}

} // namespace tlbench
