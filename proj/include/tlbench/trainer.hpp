#pragma once

#include "tlbench/batching.hpp"
#include "tlbench/image.hpp"
#include "tlbench/modelzoo.hpp"
#include "tlbench/records.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tlbench {

struct TrainConfig {
    int max_epochs = 30;
    int early_stop_patience = 3;
    bool early_stop_restore_best = true;
    double lr_reduce_factor = 0.5;
    int lr_reduce_patience = 2;
    double min_delta = 0.0; // strict improvement
    double min_lr = 1e-7;
    int keep_last_checkpoints = 5; // plus the best epoch
    std::string checkpoint_dir;
    std::uint64_t seed = 42;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct EpochRow {
    int epoch = 0; // 1-based
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
    double val_auc = 0.0; // NaN when undefined
};

struct TrainingHistory {
    std::vector<EpochRow> rows;
    std::uint64_t seed = 42;

    std::string to_csv() const;
    void write_csv(const std::string& path) const;
};

/// Monitors val loss; stops after `patience` consecutive epochs without
/// strict improvement beyond min_delta.
class EarlyStopping {
  public:
    EarlyStopping(int patience, double min_delta = 0.0);
    /// Feed one epoch's val loss; true means stop now.
    bool update(double val_loss);
    bool improved_last() const { return improved_last_; }
    int best_epoch() const { return best_epoch_; } // 1-based, 0 before any update
    double best() const { return best_; }

  private:
    int patience_;
    double min_delta_;
    double best_;
    int best_epoch_ = 0;
    int epoch_ = 0;
    int wait_ = 0;
    bool improved_last_ = false;
};

/// Multiplies the learning rate by `factor` whenever val loss stagnates for
/// `patience` epochs; the counter resets on improvement and after firing.
class PlateauLrSchedule {
  public:
    PlateauLrSchedule(double factor, int patience, double min_delta = 0.0, double min_lr = 1e-7);
    /// Feed one epoch's val loss; returns the new rate when a reduction fires.
    std::optional<double> update(double val_loss, double current_lr);

  private:
    double factor_;
    int patience_;
    double min_delta_;
    double min_lr_;
    double best_;
    int wait_ = 0;
    bool seen_any_ = false;
};

/// Manifest + decoded images, assembled into network input columns.
/// Images are resolved against image_root and preprocessed to `input`;
/// decoded tensors are cached in memory when the batching config asks for it.
class ImageDataset {
  public:
    ImageDataset(DatasetManifest manifest, std::string image_root, nn::Shape input,
                 int num_classes, bool cache);

    std::size_t size() const { return manifest_.size(); }
    const DatasetManifest& manifest() const { return manifest_; }
    int num_classes() const { return num_classes_; }
    const nn::Shape& input_shape() const { return input_; }

    /// Class target of record i: binary positive = covid, otherwise the label
    /// ordinal.
    int target_of(std::size_t i) const;

    /// Fill X (flat x B) and Y ((1|K) x B) for the given record indices.
    void assemble(const std::vector<std::size_t>& indices, nn::Mat& X, nn::Mat& Y) const;

  private:
    ImageTensor load(std::size_t i) const;
    DatasetManifest manifest_;
    std::string image_root_;
    nn::Shape input_;
    int num_classes_;
    bool cache_enabled_;
    mutable std::vector<std::shared_ptr<const ImageTensor>> cache_;
};

struct EvalPass {
    double loss = 0.0;
    double accuracy = 0.0;
    std::optional<double> auc;
    std::vector<int> labels;
    std::vector<int> predictions;
    std::vector<double> scores;                  // binary: positive-class score
    std::vector<std::vector<double>> score_rows; // multiclass probabilities
};

/// Ordered full pass in inference mode; loss includes the L2 penalty so it is
/// comparable with training loss.
EvalPass evaluate_pass(nn::Model& model, const nn::Loss& loss, const ImageDataset& data,
                       std::size_t batch_size, double threshold = 0.5);

struct TrainOutcome {
    TrainingHistory history;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    std::string best_checkpoint; // path of the best epoch's checkpoint
};

std::string checkpoint_name(int epoch); // "ckpt_epoch_007"

/// The full loop: per-epoch shuffled batches, optimizer steps, validation,
/// checkpoint every epoch (last `keep_last_checkpoints` plus the best are
/// retained), plateau LR reduction, early stopping with best-weight restore.
/// Non-finite loss raises DivergedError naming the epoch.
TrainOutcome train(nn::Model& model, const ModelSpec& spec, const nn::Loss& loss,
                   nn::Optimizer& optimizer, const ImageDataset& train_data,
                   const ImageDataset& val_data, const BatchingConfig& batching,
                   const TrainConfig& config);

} // namespace tlbench
