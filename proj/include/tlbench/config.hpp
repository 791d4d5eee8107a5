#pragma once

#include "tlbench/augment.hpp"
#include "tlbench/batching.hpp"
#include "tlbench/curation.hpp"
#include "tlbench/modelzoo.hpp"
#include "tlbench/synth.hpp"
#include "tlbench/trainer.hpp"
#include "tlbench/tuner.hpp"

#include <map>
#include <optional>
#include <string>

namespace tlbench {

struct DataConfig {
    std::string manifest;
    std::string image_root;
    ImputeStrategy impute_strategy = ImputeStrategy::country_median;
    std::size_t min_country_samples = 100;
    std::map<std::string, std::size_t> country_caps;
    SplitSpec split;
    bool operator==(const DataConfig&) const = default;
};

struct BalancingConfig {
    std::map<Label, std::size_t> targets; // empty = no balancing pass
    bool allow_downsampling = false;
    std::string staging_dir; // TLBENCH_STAGING_DIR overrides
    bool operator==(const BalancingConfig&) const = default;
};

struct PipelineConfig {
    int image_height = 224;
    int image_width = 224;
    BatchingConfig batching;
    AugmentationPolicy augmentation;
    BalancingConfig balancing;
    bool operator==(const PipelineConfig&) const = default;
};

struct ModelConfig {
    std::string name; // report label; defaults to the backbone name
    ModelSpec spec;
    OptimizerSpec optimizer;
    bool operator==(const ModelConfig&) const = default;
};

struct TuneConfig {
    int max_epochs = 30;
    int eta = 3;
    int workers = 1;
    std::string dir;
    SearchSpace space;
    bool operator==(const TuneConfig&) const = default;
};

struct EvalConfig {
    double threshold = 0.5;
    std::string report_dir;
    std::string checkpoint; // defaults to the training best
    bool operator==(const EvalConfig&) const = default;
};

struct ExplainConfig {
    std::string image;
    std::string checkpoint;
    std::string layer; // empty = auto-detect the last spatial layer
    int target_class = 1;
    double alpha = 0.4;
    std::string heatmap_out;
    std::string overlay_out;
    bool operator==(const ExplainConfig&) const = default;
};

/// The declarative run document. Parsing rejects unknown keys, validates every
/// section eagerly, fans the top-level seed out to sections that do not pin
/// their own, and resolves default artifact paths under out_dir.
struct RunConfig {
    std::uint64_t seed = 42;
    std::string out_dir = "runs/out";
    DataConfig data;
    SynthConfig synth;
    PipelineConfig pipeline;
    ModelConfig model;
    TrainConfig train;
    TuneConfig tune;
    EvalConfig eval;
    ExplainConfig explain;

    bool operator==(const RunConfig&) const = default;

    std::string to_json_text() const;
    static RunConfig from_json_text(const std::string& text,
                                    std::optional<std::uint64_t> seed_override = std::nullopt,
                                    std::optional<std::string> out_override = std::nullopt);
    static RunConfig from_file(const std::string& path,
                               std::optional<std::uint64_t> seed_override = std::nullopt,
                               std::optional<std::string> out_override = std::nullopt);
    void validate() const;
};

} // namespace tlbench
