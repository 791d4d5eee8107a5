#pragma once

#include "tlbench/nn/loss.hpp"
#include "tlbench/nn/model.hpp"
#include "tlbench/nn/optimizers.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tlbench {

/// Registry metadata for one backbone family member. Only SyntheticTiny can
/// be constructed offline; the ImageNet backbones carry their published layer
/// counts for freeze-rate arithmetic and provenance records.
struct BackboneInfo {
    std::string name;
    int layer_count = 0;
    double params_millions = 0.0;
    int year = 0;
    std::string family;
    bool available_offline = false;
};

const std::vector<BackboneInfo>& backbone_registry();
const BackboneInfo& backbone_info(const std::string& name); // RegistryError when unknown

struct BackboneSpec {
    std::string name = "SyntheticTiny";
    bool pretrained = false;
    bool operator==(const BackboneSpec&) const = default;
};

struct HeadConfig {
    double dropout_rate = 0.3;
    int dense_units = 128;
    double l2_strength = 1e-4;
    int num_classes = 2; // 1 sigmoid unit when 2, K softmax units otherwise
    void validate() const;
    bool operator==(const HeadConfig&) const = default;
};

struct OptimizerSpec {
    nn::OptimizerFamily family = nn::OptimizerFamily::adam_decoupled_wd;
    double learning_rate = 5e-5;
    double weight_decay = 1e-5;
    void validate() const;
    bool operator==(const OptimizerSpec&) const = default;
};

/// Named optimizer presets: "adamw_manual" (lr 5e-5, wd 1e-5) and
/// "adamw_tuned" (lr 3.7758e-4, wd 7.4855e-5).
OptimizerSpec optimizer_preset(const std::string& name);

struct ModelSpec {
    BackboneSpec backbone;
    double freeze_rate = 0.0;
    HeadConfig head;
    nn::Shape input{3, 224, 224};
    bool bn_inference_when_frozen = true;
    bool operator==(const ModelSpec&) const = default;
};

/// floor(layer_count * freeze_rate); RangeError outside [0,1].
int num_freeze_layers(int layer_count, double freeze_rate);

/// Assemble backbone + classification head:
///   backbone -> global average pooling -> batch norm -> dropout ->
///   dense(units, ReLU, He init, L2) -> output (sigmoid 1-unit when binary,
///   softmax otherwise)
/// and freeze the first num_freeze_layers backbone layers. Backbones without
/// offline weights raise BackboneUnavailableError suggesting SyntheticTiny.
std::unique_ptr<nn::Model> build_model(const ModelSpec& spec, std::uint64_t seed);

std::unique_ptr<nn::Optimizer> build_optimizer(const OptimizerSpec& spec);

/// Binary cross-entropy for 2 classes, categorical otherwise; ConfigError
/// below 2.
std::unique_ptr<nn::Loss> build_loss(int num_classes);

// --- checkpoint format -----------------------------------------------------
// Single file: magic, JSON header (ModelSpec + free-form metadata), raw
// parameter/running-stat tensors. A sidecar "<path>.provenance.json" records
// BackboneSpec, HeadConfig, OptimizerSpec and seed when requested.

struct Checkpoint {
    ModelSpec spec;
    std::unique_ptr<nn::Model> model;
    std::string metadata_json; // as stored
};

void save_checkpoint(const std::string& path, const ModelSpec& spec, const nn::Model& model,
                     const std::string& metadata_json = "{}");
Checkpoint load_checkpoint(const std::string& path, std::uint64_t seed = 0);

std::string model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const std::string& json_text);

void write_provenance(const std::string& path, const ModelSpec& spec, const OptimizerSpec& opt,
                      std::uint64_t seed);

} // namespace tlbench
