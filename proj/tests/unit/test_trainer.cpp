#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tlbench/image.hpp"
#include "tlbench/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace tlbench;
namespace fs = std::filesystem;

TEST_CASE("early stopping: spec sequence stops after epoch 5, best is epoch 2") {
    EarlyStopping stopper(3);
    const double losses[] = {1.0, 0.9, 0.95, 0.96, 0.97};
    std::vector<bool> stops;
    for (double loss : losses) stops.push_back(stopper.update(loss));
    CHECK(stops == std::vector<bool>{false, false, false, false, true});
    CHECK(stopper.best_epoch() == 2);
    CHECK(stopper.best() == 0.9);
}

TEST_CASE("early stopping: strictly decreasing losses never stop") {
    EarlyStopping stopper(3);
    for (int epoch = 0; epoch < 30; ++epoch) CHECK_FALSE(stopper.update(1.0 - 0.01 * epoch));
    CHECK(stopper.best_epoch() == 30);
}

TEST_CASE("early stopping: ties are not improvements (min_delta 0, strict)") {
    EarlyStopping stopper(2);
    CHECK_FALSE(stopper.update(1.0));
    CHECK_FALSE(stopper.update(1.0));
    CHECK(stopper.update(1.0));
    CHECK(stopper.best_epoch() == 1);
}

TEST_CASE("plateau schedule: flat losses halve the rate first at epoch 3") {
    PlateauLrSchedule plateau(0.5, 2);
    double lr = 0.1;
    std::vector<int> fired_at;
    for (int epoch = 1; epoch <= 7; ++epoch) {
        if (auto next = plateau.update(1.0, lr)) {
            lr = *next;
            fired_at.push_back(epoch);
        }
    }
    CHECK(fired_at == std::vector<int>{3, 5, 7}); // counter resets after firing
    CHECK(lr == doctest::Approx(0.1 * 0.125));
}

TEST_CASE("plateau schedule: improvement resets the counter; floor respected") {
    PlateauLrSchedule plateau(0.5, 2, 0.0, 1e-7);
    double lr = 0.1;
    CHECK_FALSE(plateau.update(1.0, lr).has_value());
    CHECK_FALSE(plateau.update(0.9, lr).has_value()); // improvement
    CHECK_FALSE(plateau.update(0.95, lr).has_value());
    auto fired = plateau.update(0.96, lr);
    REQUIRE(fired.has_value());
    CHECK(*fired == doctest::Approx(0.05));

    PlateauLrSchedule at_floor(0.5, 1, 0.0, 1e-7);
    CHECK_FALSE(at_floor.update(1.0, 1e-7).has_value());
    CHECK_FALSE(at_floor.update(1.0, 1e-7).has_value()); // cannot go below the floor
}

TEST_CASE("training history CSV: header and row shape") {
    TrainingHistory history;
    history.rows.push_back({1, 0.001, 0.6, 0.7, 0.65, 0.68, 0.91});
    history.rows.push_back({2, 0.0005, 0.5, 0.8, 0.55, 0.75, 0.95});
    auto csv = history.to_csv();
    CHECK(csv.find("epoch,lr,train_loss,train_acc,val_loss,val_acc,val_auc\n") == 0);
    CHECK(csv.find("\n1,0.001,") != std::string::npos);
    CHECK(csv.find("\n2,0.0005,") != std::string::npos);
}

TEST_CASE("checkpoint_name formatting") {
    CHECK(checkpoint_name(7) == "ckpt_epoch_007");
    CHECK(checkpoint_name(123) == "ckpt_epoch_123");
}

namespace {

/// Tiny disk-vs-noise corpus on disk for real training runs.
struct MicroCorpus {
    fs::path root;
    DatasetManifest manifest;
};

MicroCorpus make_micro_corpus(int per_class, int size, std::uint64_t seed,
                              const std::string& name) {
    MicroCorpus corpus;
    corpus.root = fs::temp_directory_path() / name;
    fs::create_directories(corpus.root / "images");
    std::vector<PatientRecord> records;
    CounterRng rng(seed, 0);
    for (int i = 0; i < 2 * per_class; ++i) {
        const bool bright = i < per_class;
        ImageTensor img = ImageTensor::zeros(1, size, size);
        for (auto& v : img.values) v = static_cast<float>(rng.next_uniform(0.0, 0.3));
        if (bright) {
            const int cx = 4 + static_cast<int>(rng.next_below(size - 8));
            const int cy = 4 + static_cast<int>(rng.next_below(size - 8));
            for (int y = cy - 3; y <= cy + 3; ++y)
                for (int x = cx - 3; x <= cx + 3; ++x)
                    if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= 9)
                        img.at(0, y, x) = 0.9f;
        }
        const std::string ref = "images/m" + std::to_string(i) + ".png";
        encode_png(img, (corpus.root / ref).string());
        PatientRecord r;
        r.image_ref = ref;
        r.label = bright ? Label::covid : Label::normal;
        r.country = "SYN";
        r.age = 30.0;
        r.sex = Sex::female;
        r.modality = Modality::xray;
        r.source = "micro";
        records.push_back(std::move(r));
    }
    corpus.manifest = DatasetManifest(std::move(records));
    return corpus;
}

ModelSpec micro_spec(int size) {
    ModelSpec spec;
    spec.backbone.name = "SyntheticTiny";
    spec.input = nn::Shape{3, size, size};
    spec.head.dense_units = 8;
    spec.head.dropout_rate = 0.2;
    spec.head.l2_strength = 1e-4;
    return spec;
}

} // namespace

TEST_CASE("train: checkpoints per epoch, history length, reload reproduces val loss") {
    auto corpus = make_micro_corpus(24, 24, 1, "tlb_trainer_corpus");
    auto spec = micro_spec(24);
    auto model = build_model(spec, 3);
    auto loss = build_loss(2);
    auto optimizer = build_optimizer({nn::OptimizerFamily::adam, 2e-3, 0.0});

    ImageDataset data(corpus.manifest, corpus.root.string(), spec.input, 2, true);
    BatchingConfig batching;
    batching.batch_size = 16;
    batching.shuffle_buffer = 64;
    TrainConfig config;
    config.max_epochs = 4;
    config.checkpoint_dir = (fs::temp_directory_path() / "tlb_trainer_ckpts").string();
    fs::remove_all(config.checkpoint_dir);
    config.seed = 42;

    auto outcome = train(*model, spec, *loss, *optimizer, data, data, batching, config);
    CHECK(outcome.history.rows.size() <= 4);
    const std::size_t epochs_run = outcome.history.rows.size();
    for (std::size_t e = 1; e <= epochs_run; ++e)
        CHECK(fs::exists(fs::path(config.checkpoint_dir) / checkpoint_name(static_cast<int>(e))));

    // reloading the epoch-k checkpoint reproduces history row k's val loss
    for (std::size_t e = 1; e <= epochs_run; ++e) {
        auto ckpt = load_checkpoint(
            (fs::path(config.checkpoint_dir) / checkpoint_name(static_cast<int>(e))).string());
        auto pass = evaluate_pass(*ckpt.model, *loss, data, batching.batch_size);
        CHECK(std::abs(pass.loss - outcome.history.rows[e - 1].val_loss) < 1e-5);
    }

    // history invariants
    for (std::size_t e = 1; e < epochs_run; ++e) {
        const double prev = outcome.history.rows[e - 1].lr;
        const double cur = outcome.history.rows[e].lr;
        CHECK((cur == prev || cur == doctest::Approx(prev * config.lr_reduce_factor)));
    }

    // restored model equals the best epoch's checkpoint on the val metric
    double best_val = outcome.history.rows[0].val_loss;
    int best_epoch = 1;
    for (std::size_t e = 0; e < epochs_run; ++e) {
        if (outcome.history.rows[e].val_loss < best_val) {
            best_val = outcome.history.rows[e].val_loss;
            best_epoch = static_cast<int>(e + 1);
        }
    }
    CHECK(outcome.best_epoch == best_epoch);
    auto restored = evaluate_pass(*model, *loss, data, batching.batch_size);
    CHECK(std::abs(restored.loss - best_val) < 1e-5);
}

TEST_CASE("train: two seeded runs are identical; the metric improves on the micro task") {
    auto corpus = make_micro_corpus(32, 24, 2, "tlb_trainer_det");
    auto spec = micro_spec(24);
    BatchingConfig batching;
    batching.batch_size = 16;

    auto run = [&](const std::string& tag) {
        auto model = build_model(spec, 7);
        auto loss = build_loss(2);
        auto optimizer = build_optimizer({nn::OptimizerFamily::adam_decoupled_wd, 3e-3, 1e-5});
        ImageDataset data(corpus.manifest, corpus.root.string(), spec.input, 2, true);
        TrainConfig config;
        config.max_epochs = 3;
        config.checkpoint_dir = (fs::temp_directory_path() / ("tlb_det_" + tag)).string();
        fs::remove_all(config.checkpoint_dir);
        config.seed = 42;
        return train(*model, spec, *loss, *optimizer, data, data, batching, config);
    };
    auto a = run("a");
    auto b = run("b");
    REQUIRE(a.history.rows.size() == b.history.rows.size());
    for (std::size_t i = 0; i < a.history.rows.size(); ++i) {
        CHECK(a.history.rows[i].train_loss == doctest::Approx(b.history.rows[i].train_loss)
                                                  .epsilon(1e-12));
        CHECK(a.history.rows[i].val_loss == doctest::Approx(b.history.rows[i].val_loss)
                                                .epsilon(1e-12));
    }
    CHECK(a.history.rows.back().train_loss < a.history.rows.front().train_loss);
}

TEST_CASE("train: checkpoint retention keeps the last five plus the best") {
    auto corpus = make_micro_corpus(12, 16, 3, "tlb_trainer_retention");
    auto spec = micro_spec(16);
    auto model = build_model(spec, 9);
    auto loss = build_loss(2);
    auto optimizer = build_optimizer({nn::OptimizerFamily::sgd, 1e-4, 0.0});
    ImageDataset data(corpus.manifest, corpus.root.string(), spec.input, 2, true);
    BatchingConfig batching;
    batching.batch_size = 8;
    TrainConfig config;
    config.max_epochs = 9;
    config.early_stop_patience = 9; // run everything
    config.checkpoint_dir = (fs::temp_directory_path() / "tlb_retention_ckpts").string();
    fs::remove_all(config.checkpoint_dir);

    auto outcome = train(*model, spec, *loss, *optimizer, data, data, batching, config);
    const int last = static_cast<int>(outcome.history.rows.size());
    int kept = 0;
    for (int e = 1; e <= last; ++e)
        if (fs::exists(fs::path(config.checkpoint_dir) / checkpoint_name(e))) ++kept;
    CHECK(kept <= 6); // five most recent plus possibly an older best
    for (int e = last - 4; e <= last; ++e)
        CHECK(fs::exists(fs::path(config.checkpoint_dir) / checkpoint_name(e)));
    CHECK(fs::exists(fs::path(config.checkpoint_dir) / checkpoint_name(outcome.best_epoch)));
}

TEST_CASE("train config validation") {
    TrainConfig config;
    config.checkpoint_dir = "x";
    config.max_epochs = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = TrainConfig{};
    config.lr_reduce_factor = 1.0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = TrainConfig{};
    config.early_stop_patience = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("evaluate_pass: loss finite, accuracy and auc defined on a binary task") {
    auto corpus = make_micro_corpus(16, 16, 4, "tlb_eval_pass");
    auto spec = micro_spec(16);
    auto model = build_model(spec, 13);
    auto loss = build_loss(2);
    ImageDataset data(corpus.manifest, corpus.root.string(), spec.input, 2, false);
    auto pass = evaluate_pass(*model, *loss, data, 8);
    CHECK(std::isfinite(pass.loss));
    CHECK(pass.labels.size() == data.size());
    CHECK(pass.predictions.size() == data.size());
    CHECK(pass.scores.size() == data.size());
    CHECK(pass.auc.has_value());
}

TEST_CASE("set_global_seed is recorded and reused") {
    set_global_seed(1234);
    CHECK(global_seed() == 1234);
    set_global_seed(42);
    CHECK(global_seed() == 42);
}
