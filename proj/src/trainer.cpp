#include "tlbench/trainer.hpp"

#include "tlbench/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

namespace fs = std::filesystem;

namespace tlbench {

void TrainConfig::validate() const {
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
    if (lr_reduce_patience < 1) throw ConfigError("lr_reduce_patience must be >= 1");
    if (!(lr_reduce_factor > 0.0 && lr_reduce_factor < 1.0))
        throw ConfigError("lr_reduce_factor must lie in (0,1)");
    if (min_delta < 0.0) throw ConfigError("min_delta must be nonnegative");
    if (keep_last_checkpoints < 1) throw ConfigError("keep_last_checkpoints must be >= 1");
}

std::string TrainingHistory::to_csv() const {
    std::string out = "epoch,lr,train_loss,train_acc,val_loss,val_acc,val_auc\n";
    for (const auto& r : rows)
        out += fmt::format("{},{},{},{},{},{},{}\n", r.epoch, r.lr, r.train_loss, r.train_acc,
                           r.val_loss, r.val_acc, r.val_auc);
    return out;
}

void TrainingHistory::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write history CSV: " + path);
    out << to_csv();
}

EarlyStopping::EarlyStopping(int patience, double min_delta)
    : patience_(patience), min_delta_(min_delta),
      best_(std::numeric_limits<double>::infinity()) {
    if (patience < 1) throw ConfigError("early stopping patience must be >= 1");
}

bool EarlyStopping::update(double val_loss) {
    ++epoch_;
    improved_last_ = val_loss < best_ - min_delta_;
    if (improved_last_) {
        best_ = val_loss;
        best_epoch_ = epoch_;
        wait_ = 0;
        return false;
    }
    ++wait_;
    return wait_ >= patience_;
}

PlateauLrSchedule::PlateauLrSchedule(double factor, int patience, double min_delta, double min_lr)
    : factor_(factor), patience_(patience), min_delta_(min_delta), min_lr_(min_lr),
      best_(std::numeric_limits<double>::infinity()) {
    if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("plateau factor must lie in (0,1)");
    if (patience < 1) throw ConfigError("plateau patience must be >= 1");
}

std::optional<double> PlateauLrSchedule::update(double val_loss, double current_lr) {
    seen_any_ = true;
    if (val_loss < best_ - min_delta_) {
        best_ = val_loss;
        wait_ = 0;
        return std::nullopt;
    }
    ++wait_;
    if (wait_ < patience_) return std::nullopt;
    wait_ = 0; // counter also resets after a reduction fires
    const double next = std::max(current_lr * factor_, min_lr_);
    if (next >= current_lr) return std::nullopt; // already at the floor
    return next;
}

// ---------------------------------------------------------------------------
// ImageDataset

ImageDataset::ImageDataset(DatasetManifest manifest, std::string image_root, nn::Shape input,
                           int num_classes, bool cache)
    : manifest_(std::move(manifest)), image_root_(std::move(image_root)), input_(input),
      num_classes_(num_classes), cache_enabled_(cache) {
    if (num_classes_ < 2) throw ConfigError("ImageDataset needs num_classes >= 2");
    if (manifest_.empty()) throw EmptyDatasetError("ImageDataset over an empty manifest");
    cache_.resize(manifest_.size());
}

int ImageDataset::target_of(std::size_t i) const {
    const Label label = manifest_.records().at(i).label;
    if (num_classes_ == 2) return binary_target(label);
    return static_cast<int>(label);
}

ImageTensor ImageDataset::load(std::size_t i) const {
    if (cache_enabled_ && cache_[i]) return *cache_[i];
    const std::string& ref = manifest_.records()[i].image_ref;
    fs::path p(ref);
    std::string path = (p.is_absolute() || image_root_.empty() || fs::exists(p))
                           ? ref
                           : (fs::path(image_root_) / p).string();
    ImageTensor img = decode_and_preprocess(path, input_.h, input_.w);
    if (cache_enabled_) cache_[i] = std::make_shared<const ImageTensor>(img);
    return img;
}

void ImageDataset::assemble(const std::vector<std::size_t>& indices, nn::Mat& X,
                            nn::Mat& Y) const {
    const Eigen::Index batch = static_cast<Eigen::Index>(indices.size());
    X.resize(input_.flat(), batch);
    const bool binary = num_classes_ == 2;
    Y.setZero(binary ? 1 : num_classes_, batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
        const ImageTensor img = load(indices[b]);
        if (img.channels != input_.c || img.height != input_.h || img.width != input_.w)
            throw ShapeError("decoded image does not match the model input shape");
        double* dst = X.col(b).data();
        for (std::size_t k = 0; k < img.values.size(); ++k) dst[k] = img.values[k];
        const int target = target_of(indices[b]);
        if (binary) Y(0, b) = target;
        else Y(target, b) = 1.0;
    }
}

// ---------------------------------------------------------------------------
// Evaluation pass

namespace {

std::optional<double> macro_ovr_auc(const std::vector<int>& labels,
                                    const std::vector<std::vector<double>>& rows,
                                    int num_classes) {
    double sum = 0.0;
    int counted = 0;
    for (int cls = 0; cls < num_classes; ++cls) {
        std::vector<int> y;
        std::vector<double> s;
        y.reserve(labels.size());
        s.reserve(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            y.push_back(labels[i] == cls ? 1 : 0);
            s.push_back(rows[i][cls]);
        }
        try {
            sum += roc_and_auc(y, s).auc;
            ++counted;
        } catch (const UndefinedMetricError&) {
        }
    }
    if (counted == 0) return std::nullopt;
    return sum / counted;
}

} // namespace

EvalPass evaluate_pass(nn::Model& model, const nn::Loss& loss, const ImageDataset& data,
                       std::size_t batch_size, double threshold) {
    const bool binary = data.num_classes() == 2;
    EvalPass result;
    nn::Mat X, Y;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    nn::StepCtx ctx{false, 0, 0};

    std::vector<std::size_t> indices(data.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    for (std::size_t start = 0; start < indices.size(); start += batch_size) {
        const std::size_t end = std::min(indices.size(), start + batch_size);
        std::vector<std::size_t> batch(indices.begin() + start, indices.begin() + end);
        data.assemble(batch, X, Y);
        const nn::Mat& pred = model.forward(X, ctx);
        loss_sum += loss.value(pred, Y) * static_cast<double>(batch.size());
        for (Eigen::Index b = 0; b < pred.cols(); ++b) {
            const int truth = data.target_of(batch[static_cast<std::size_t>(b)]);
            result.labels.push_back(truth);
            int hat;
            if (binary) {
                const double score = pred(0, b);
                result.scores.push_back(score);
                hat = score >= threshold ? 1 : 0;
            } else {
                std::vector<double> row(pred.rows());
                for (Eigen::Index k = 0; k < pred.rows(); ++k) row[k] = pred(k, b);
                Eigen::Index best = 0;
                pred.col(b).maxCoeff(&best);
                result.score_rows.push_back(std::move(row));
                hat = static_cast<int>(best);
            }
            result.predictions.push_back(hat);
            if (hat == truth) ++correct;
        }
    }
    result.loss = loss_sum / static_cast<double>(data.size()) + model.regularization_loss();
    result.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    if (binary) {
        try {
            result.auc = roc_and_auc(result.labels, result.scores).auc;
        } catch (const UndefinedMetricError&) {
        }
    } else {
        result.auc = macro_ovr_auc(result.labels, result.score_rows, data.num_classes());
    }
    return result;
}

// ---------------------------------------------------------------------------
// Training loop

std::string checkpoint_name(int epoch) { return fmt::format("ckpt_epoch_{:03}", epoch); }

namespace {

void load_state_from_checkpoint(const std::string& path, nn::Model& model) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("checkpoint not found: " + path);
    in.seekg(8, std::ios::beg); // magic
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    in.seekg(static_cast<std::streamoff>(header_len), std::ios::cur);
    model.load_state(in);
}

void prune_checkpoints(const std::string& dir, int current_epoch, int keep_last, int best_epoch) {
    const int cutoff = current_epoch - keep_last;
    for (int e = 1; e <= cutoff; ++e) {
        if (e == best_epoch) continue;
        fs::path p = fs::path(dir) / checkpoint_name(e);
        std::error_code ec;
        fs::remove(p, ec);
    }
}

} // namespace

TrainOutcome train(nn::Model& model, const ModelSpec& spec, const nn::Loss& loss,
                   nn::Optimizer& optimizer, const ImageDataset& train_data,
                   const ImageDataset& val_data, const BatchingConfig& batching,
                   const TrainConfig& config) {
    config.validate();
    batching.validate();
    if (config.checkpoint_dir.empty()) throw ConfigError("checkpoint_dir must be set");
    fs::create_directories(config.checkpoint_dir);

    const bool binary = train_data.num_classes() == 2;
    BatchStream stream = make_batches(train_data.manifest(), batching, /*shuffle=*/true);
    EarlyStopping stopper(config.early_stop_patience, config.min_delta);
    PlateauLrSchedule plateau(config.lr_reduce_factor, config.lr_reduce_patience,
                              config.min_delta, config.min_lr);

    TrainOutcome outcome;
    outcome.history.seed = config.seed;
    const std::uint64_t dropout_seed = derive_seed(config.seed, "dropout");
    std::uint64_t tick = 0;
    nn::Mat X, Y;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const double lr_in_effect = optimizer.lr();
        double loss_sum = 0.0;
        std::size_t correct = 0;

        for (const auto& batch : stream.epoch_batches(static_cast<std::size_t>(epoch - 1))) {
            train_data.assemble(batch, X, Y);
            nn::StepCtx ctx{true, dropout_seed, tick++};
            const nn::Mat& pred = model.forward(X, ctx);
            const double data_loss = loss.value(pred, Y);
            if (!std::isfinite(data_loss + model.regularization_loss()))
                throw DivergedError(fmt::format("training diverged at epoch {} (non-finite "
                                                "loss)",
                                                epoch));
            loss_sum += data_loss * static_cast<double>(batch.size());
            for (Eigen::Index b = 0; b < pred.cols(); ++b) {
                const int truth = train_data.target_of(batch[static_cast<std::size_t>(b)]);
                int hat;
                if (binary) hat = pred(0, b) >= 0.5 ? 1 : 0;
                else {
                    Eigen::Index best = 0;
                    pred.col(b).maxCoeff(&best);
                    hat = static_cast<int>(best);
                }
                if (hat == truth) ++correct;
            }
            model.zero_grads();
            model.backward(loss.grad(pred, Y));
            optimizer.step(model.params());
        }

        EvalPass val = evaluate_pass(model, loss, val_data, batching.batch_size);
        if (!std::isfinite(val.loss))
            throw DivergedError(fmt::format("validation diverged at epoch {} (non-finite loss)",
                                            epoch));

        EpochRow row;
        row.epoch = epoch;
        row.lr = lr_in_effect;
        row.train_loss = loss_sum / static_cast<double>(train_data.size()) +
                         model.regularization_loss();
        row.train_acc = static_cast<double>(correct) / static_cast<double>(train_data.size());
        row.val_loss = val.loss;
        row.val_acc = val.accuracy;
        row.val_auc = val.auc.value_or(std::numeric_limits<double>::quiet_NaN());
        outcome.history.rows.push_back(row);

        const std::string ckpt_path =
            (fs::path(config.checkpoint_dir) / checkpoint_name(epoch)).string();
        save_checkpoint(ckpt_path, spec, model,
                        fmt::format("{{\"epoch\":{},\"val_loss\":{}}}", epoch, val.loss));

        const bool stop = stopper.update(val.loss);
        if (stopper.improved_last()) {
            outcome.best_epoch = epoch;
            outcome.best_val_loss = val.loss;
            outcome.best_checkpoint = ckpt_path;
        }
        prune_checkpoints(config.checkpoint_dir, epoch, config.keep_last_checkpoints,
                          outcome.best_epoch);
        if (stop) break;

        if (auto reduced = plateau.update(val.loss, optimizer.lr())) optimizer.set_lr(*reduced);
    }

    if (config.early_stop_restore_best && outcome.best_epoch > 0)
        load_state_from_checkpoint(outcome.best_checkpoint, model);
    return outcome;
}

} // namespace tlbench
