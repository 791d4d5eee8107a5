#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tlbench/modelzoo.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>

using namespace tlbench;
using nn::Mat;

TEST_CASE("num_freeze_layers: floor semantics on the published grid") {
    CHECK(num_freeze_layers(100, 0.20) == 20);
    CHECK(num_freeze_layers(41, 0.50) == 20);
    CHECK(num_freeze_layers(41, 0.0) == 0);
    CHECK(num_freeze_layers(999, 0.0) == 0);
    CHECK(num_freeze_layers(100, 1.0) == 100);
    CHECK_THROWS_AS(num_freeze_layers(100, -0.1), RangeError);
    CHECK_THROWS_AS(num_freeze_layers(100, 1.1), RangeError);

    // full grid: rates x published layer counts, expected values precomputed
    const double rates[6] = {0.01, 0.05, 0.10, 0.20, 0.50, 0.75};
    const int counts[6] = {41, 88, 121, 177, 237, 329};
    const int expected[6][6] = {
        // 0.01 0.05 0.10 0.20 0.50 0.75
        {0, 2, 4, 8, 20, 30},      // 41
        {0, 4, 8, 17, 44, 66},     // 88
        {1, 6, 12, 24, 60, 90},    // 121
        {1, 8, 17, 35, 88, 132},   // 177
        {2, 11, 23, 47, 118, 177}, // 237
        {3, 16, 32, 65, 164, 246}, // 329
    };
    for (int ci = 0; ci < 6; ++ci)
        for (int ri = 0; ri < 6; ++ri) {
            INFO("layers=", counts[ci], " rate=", rates[ri]);
            CHECK(num_freeze_layers(counts[ci], rates[ri]) == expected[ci][ri]);
        }
}

TEST_CASE("num_freeze_layers: monotone nondecreasing in the rate") {
    CounterRng rng(17, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        const int layers = 1 + static_cast<int>(rng.next_below(400));
        double a = rng.next_unit();
        double b = rng.next_unit();
        if (a > b) std::swap(a, b);
        CHECK(num_freeze_layers(layers, a) <= num_freeze_layers(layers, b));
        CHECK(num_freeze_layers(layers, a) >= 0);
        CHECK(num_freeze_layers(layers, b) <= layers);
    }
}

TEST_CASE("backbone registry: closed set with published layer counts") {
    const auto& registry = backbone_registry();
    CHECK(registry.size() == 10);
    CHECK(backbone_info("VGG16").layer_count == 41);
    CHECK(backbone_info("ResNet50").layer_count == 177);
    CHECK(backbone_info("DenseNet121").layer_count == 121);
    CHECK(backbone_info("EfficientNetB0").layer_count == 237);
    CHECK(backbone_info("EfficientNetV2B0").layer_count == 329);
    CHECK(backbone_info("ConvNeXtTiny").layer_count == 59);
    CHECK(backbone_info("SyntheticTiny").available_offline);
    CHECK_FALSE(backbone_info("DenseNet121").available_offline);
    CHECK_THROWS_AS(backbone_info("Xception"), RegistryError);
    CHECK_THROWS_AS(backbone_info("InceptionV3"), RegistryError);
}

TEST_CASE("build_model: binary head is a 1-unit sigmoid; K-class head is softmax") {
    ModelSpec spec;
    spec.backbone.name = "SyntheticTiny";
    spec.input = nn::Shape{3, 32, 32};
    spec.head.num_classes = 2;
    auto model = build_model(spec, 1);
    CHECK(model->output_shape().flat() == 1);
    CHECK(model->layer(model->layer_count() - 1).name() == "head.sigmoid");

    Mat x = Mat::Constant(spec.input.flat(), 5, 0.3);
    nn::StepCtx ctx;
    Mat out = model->forward(x, ctx);
    CHECK(out.rows() == 1);
    CHECK(out.cols() == 5);
    for (Eigen::Index b = 0; b < 5; ++b) {
        CHECK(out(0, b) > 0.0);
        CHECK(out(0, b) < 1.0);
    }

    spec.head.num_classes = 3;
    auto multi = build_model(spec, 1);
    CHECK(multi->output_shape().flat() == 3);
    CHECK(multi->layer(multi->layer_count() - 1).name() == "head.softmax");
    Mat mout = multi->forward(x, ctx);
    for (Eigen::Index b = 0; b < 5; ++b)
        CHECK(mout.col(b).sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("build_model: head follows gap -> bn -> dropout -> dense -> relu -> output") {
    ModelSpec spec;
    spec.backbone.name = "SyntheticTiny";
    spec.input = nn::Shape{3, 32, 32};
    auto model = build_model(spec, 1);
    const int backbone = model->backbone_layers();
    CHECK(backbone == 15);
    CHECK(model->layer(backbone + 0).name() == "head.gap");
    CHECK(model->layer(backbone + 1).name() == "head.bn");
    CHECK(model->layer(backbone + 2).name() == "head.dropout");
    CHECK(model->layer(backbone + 3).name() == "head.dense");
    CHECK(model->layer(backbone + 4).name() == "head.relu");
    CHECK(model->layer(backbone + 5).name() == "head.logits");
}

TEST_CASE("build_model: freeze_rate 1.0 leaves only the head trainable") {
    ModelSpec spec;
    spec.backbone.name = "SyntheticTiny";
    spec.input = nn::Shape{3, 32, 32};
    spec.freeze_rate = 1.0;
    auto model = build_model(spec, 1);
    for (int i = 0; i < model->backbone_layers(); ++i)
        CHECK_FALSE(model->layer(i).trainable());
    for (int i = model->backbone_layers(); i < model->layer_count(); ++i)
        CHECK(model->layer(i).trainable());
    // every backbone parameter excluded from the trainable set
    for (const auto& p : model->params(true)) CHECK(p.name.rfind("head.", 0) == 0);
}

TEST_CASE("trainable parameter count strictly drops past each layer boundary") {
    ModelSpec spec;
    spec.backbone.name = "SyntheticTiny";
    spec.input = nn::Shape{3, 32, 32};
    std::set<std::size_t> counts;
    std::size_t prev = 0;
    bool first = true;
    for (double rate : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
        spec.freeze_rate = rate;
        auto model = build_model(spec, 1);
        const std::size_t trainable = model->param_count(true);
        if (!first) CHECK(trainable <= prev);
        counts.insert(trainable);
        prev = trainable;
        first = false;
    }
    CHECK(counts.size() >= 4); // strictly decreases whenever a conv/bn boundary is crossed
}

TEST_CASE("build_model: unavailable backbones raise the SyntheticTiny hint") {
    ModelSpec spec;
    spec.backbone.name = "DenseNet121";
    CHECK_THROWS_WITH_AS(build_model(spec, 1), doctest::Contains("SyntheticTiny"),
                         BackboneUnavailableError);
    spec.backbone.name = "SyntheticTiny";
    spec.backbone.pretrained = true;
    CHECK_THROWS_AS(build_model(spec, 1), BackboneUnavailableError);
}

TEST_CASE("model spec for the published best architecture round-trips") {
    // DenseNet121 + dropout 0.3 + 128 dense units: describable and serializable
    // even though its weights cannot be fetched here.
    ModelSpec spec;
    spec.backbone.name = "DenseNet121";
    spec.backbone.pretrained = true;
    spec.freeze_rate = 0.2;
    spec.head.dropout_rate = 0.3;
    spec.head.dense_units = 128;
    auto text = model_spec_to_json(spec);
    auto parsed = model_spec_from_json(text);
    CHECK(parsed == spec);
    CHECK(backbone_info(parsed.backbone.name).layer_count == 121);
    CHECK(num_freeze_layers(backbone_info(parsed.backbone.name).layer_count, parsed.freeze_rate) ==
          24);
}

TEST_CASE("optimizer presets: manual and tuned settings") {
    auto manual = optimizer_preset("adamw_manual");
    CHECK(manual.family == nn::OptimizerFamily::adam_decoupled_wd);
    CHECK(manual.learning_rate == 5e-5);
    CHECK(manual.weight_decay == 1e-5);
    auto tuned = optimizer_preset("adamw_tuned");
    CHECK(tuned.learning_rate == 3.7758e-4);
    CHECK(tuned.weight_decay == 7.4855e-5);
    CHECK_THROWS_AS(optimizer_preset("nope"), RegistryError);
}

TEST_CASE("build_optimizer: family dispatch and validation") {
    for (auto family : {nn::OptimizerFamily::sgd, nn::OptimizerFamily::rmsprop,
                        nn::OptimizerFamily::adam, nn::OptimizerFamily::nadam,
                        nn::OptimizerFamily::adam_decoupled_wd}) {
        OptimizerSpec spec{family, 1e-3, 1e-4};
        auto opt = build_optimizer(spec);
        CHECK(opt->lr() == 1e-3);
    }
    CHECK_THROWS_AS(build_optimizer(OptimizerSpec{nn::OptimizerFamily::adam, -1.0, 0.0}),
                    ConfigError);
    CHECK_THROWS_AS(nn::optimizer_family_from_string("adagrad"), RegistryError);
}

TEST_CASE("checkpoints: save, reload, identical inference; provenance sidecar") {
    namespace fs = std::filesystem;
    ModelSpec spec;
    spec.backbone.name = "SyntheticTiny";
    spec.input = nn::Shape{3, 16, 16};
    spec.head.dense_units = 8;
    auto model = build_model(spec, 5);

    Mat x = Mat::Constant(spec.input.flat(), 2, 0.4);
    nn::StepCtx train_ctx{true, 1, 0};
    model->forward(x, train_ctx);

    const auto dir = fs::temp_directory_path() / "tlbench_ckpt_test";
    fs::create_directories(dir);
    const auto path = (dir / "ckpt_epoch_001").string();
    save_checkpoint(path, spec, *model, "{\"epoch\":1}");

    auto ckpt = load_checkpoint(path);
    CHECK(ckpt.spec == spec);
    CHECK(ckpt.metadata_json.find("\"epoch\":1") != std::string::npos);
    nn::StepCtx infer{false, 0, 0};
    Mat a = model->forward(x, infer);
    Mat b = ckpt.model->forward(x, infer);
    CHECK(a == b);

    OptimizerSpec opt = optimizer_preset("adamw_manual");
    const auto sidecar = (dir / "ckpt.provenance.json").string();
    write_provenance(sidecar, spec, opt, 42);
    std::ifstream in(sidecar);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"seed\": 42") != std::string::npos);
    CHECK(text.find("adam_decoupled_wd") != std::string::npos);

    CHECK_THROWS_AS(load_checkpoint((dir / "missing").string()), MissingArtifactError);
}

TEST_CASE("head config validation") {
    HeadConfig bad;
    bad.dropout_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = HeadConfig{};
    bad.num_classes = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = HeadConfig{};
    bad.dense_units = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}
