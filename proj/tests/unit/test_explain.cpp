#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tlbench/gradcam.hpp"
#include "tlbench/modelzoo.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

using namespace tlbench;
using nn::Mat;
namespace fs = std::filesystem;

namespace {

ModelSpec tiny_spec(int size) {
    ModelSpec spec;
    spec.backbone.name = "SyntheticTiny";
    spec.input = nn::Shape{3, size, size};
    spec.head.dense_units = 8;
    return spec;
}

ImageTensor noisy_image(int size, std::uint64_t seed) {
    CounterRng rng(seed, 0);
    ImageTensor img = ImageTensor::zeros(3, size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const float v = static_cast<float>(rng.next_unit());
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = v;
        }
    return img;
}

} // namespace

TEST_CASE("grad_cam: constant-output model yields the flagged all-zero map") {
    auto spec = tiny_spec(32);
    auto model = build_model(spec, 4);
    // zero the output layer: the logit becomes a constant in the input
    for (auto& p : model->params())
        if (p.name == "head.logits.weight") p.value->setZero();
    auto image = noisy_image(32, 5);
    auto heat = grad_cam(*model, image, 1);
    CHECK(heat.zero_gradient);
    for (float v : heat.values) CHECK(v == 0.0f);
}

TEST_CASE("grad_cam: map matches input shape, max is 1, no negatives") {
    auto spec = tiny_spec(32);
    auto model = build_model(spec, 6);
    auto image = noisy_image(32, 7);
    auto heat = grad_cam(*model, image, 1);
    CHECK(heat.height == 32);
    CHECK(heat.width == 32);
    REQUIRE(!heat.zero_gradient);
    float peak = 0.0f;
    for (float v : heat.values) {
        CHECK(v >= 0.0f);
        peak = std::max(peak, v);
    }
    CHECK(peak == 1.0f);
}

TEST_CASE("grad_cam: shape holds across input sizes and for both binary targets") {
    for (int size : {16, 24, 48}) {
        auto spec = tiny_spec(size);
        auto model = build_model(spec, 11);
        auto image = noisy_image(size, size);
        for (int target : {0, 1}) {
            auto heat = grad_cam(*model, image, target);
            CHECK(heat.height == size);
            CHECK(heat.width == size);
        }
    }
}

TEST_CASE("grad_cam: normalized map is invariant to positive scaling of the logit") {
    auto spec = tiny_spec(32);
    auto model = build_model(spec, 8);
    auto image = noisy_image(32, 9);
    auto base = grad_cam(*model, image, 1);

    for (auto& p : model->params()) {
        if (p.name == "head.logits.weight") *p.value *= 7.5;
        if (p.name == "head.logits.bias") *p.value *= 7.5;
    }
    auto scaled = grad_cam(*model, image, 1);
    REQUIRE(base.values.size() == scaled.values.size());
    for (std::size_t i = 0; i < base.values.size(); ++i)
        CHECK(base.values[i] == doctest::Approx(scaled.values[i]).epsilon(1e-5));
}

TEST_CASE("grad_cam: explicit layer selection and error paths") {
    auto spec = tiny_spec(32);
    auto model = build_model(spec, 10);
    auto image = noisy_image(32, 11);

    auto heat = grad_cam(*model, image, 1, "backbone.relu3");
    CHECK(heat.height == 32);

    CHECK_THROWS_AS(grad_cam(*model, image, 1, "no.such.layer"), LayerSelectionError);
    CHECK_THROWS_AS(grad_cam(*model, image, 1, "head.dense"), LayerSelectionError);
    CHECK_THROWS_AS(grad_cam(*model, image, 5), RangeError);

    ImageTensor wrong = ImageTensor::zeros(3, 16, 16);
    CHECK_THROWS_AS(grad_cam(*model, wrong, 1), ShapeError);
}

TEST_CASE("grad_cam: multiclass target seeds the chosen logit") {
    auto spec = tiny_spec(32);
    spec.head.num_classes = 3;
    auto model = build_model(spec, 13);
    auto image = noisy_image(32, 13);
    auto heat0 = grad_cam(*model, image, 0);
    auto heat2 = grad_cam(*model, image, 2);
    CHECK(heat0.height == 32);
    CHECK(heat2.height == 32);
    CHECK_THROWS_AS(grad_cam(*model, image, 3), RangeError);
}

TEST_CASE("overlay: alpha 0 reproduces the input exactly; alpha 1 is pure colormap") {
    auto image = noisy_image(24, 21);
    Heatmap heat;
    heat.height = 24;
    heat.width = 24;
    heat.values.assign(24 * 24, 0.0f);
    heat.values[24 * 12 + 12] = 1.0f;

    auto identity = render_overlay(image, heat, 0.0);
    CHECK(identity.values == image.values);

    auto pure = render_overlay(image, heat, 1.0);
    CHECK(pure.values != image.values);

    Heatmap wrong;
    wrong.height = 12;
    wrong.width = 24;
    wrong.values.assign(12 * 24, 0.0f);
    CHECK_THROWS_AS(render_overlay(image, wrong, 0.5), ShapeError);
    CHECK_THROWS_AS(render_overlay(image, heat, 1.5), RangeError);
}

TEST_CASE("overlay: files land on disk and re-decode to the blended pixels") {
    auto image = noisy_image(24, 33);
    Heatmap heat;
    heat.height = 24;
    heat.width = 24;
    heat.values.assign(24 * 24, 0.5f);
    heat.values[0] = 1.0f;

    const auto dir = fs::temp_directory_path() / "tlb_overlay";
    fs::create_directories(dir);
    const auto path = (dir / "overlay.png").string();
    overlay(image, heat, 0.4, path);
    CHECK(fs::exists(path));
    auto reloaded = decode_and_preprocess(path, 24, 24);
    CHECK(reloaded.height == 24);

    const auto heat_path = (dir / "heat.png").string();
    write_heatmap_png(heat, heat_path);
    CHECK(fs::exists(heat_path));
}

TEST_CASE("overlay golden fixture: alpha 0.4 render matches the frozen image") {
    // deterministic inputs -> render once, freeze, compare forever
    ImageTensor image = ImageTensor::zeros(3, 16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c)
                image.at(c, y, x) = static_cast<float>((y * 16 + x) % 256) / 255.0f;
    Heatmap heat;
    heat.height = 16;
    heat.width = 16;
    heat.values.assign(16 * 16, 0.0f);
    for (int y = 4; y < 12; ++y)
        for (int x = 4; x < 12; ++x)
            heat.values[y * 16 + x] = static_cast<float>(1.0 - (std::abs(y - 8) + std::abs(x - 8)) / 8.0);

    auto rendered = render_overlay(image, heat, 0.4);
    const std::string golden_path = std::string(TLBENCH_FIXTURES_DIR) + "/overlay_alpha04.png";
    if (!fs::exists(golden_path)) {
        // first run freezes the fixture (committed to the repo)
        encode_png(rendered, golden_path);
    }
    const auto tmp = (fs::temp_directory_path() / "tlb_overlay_now.png").string();
    encode_png(rendered, tmp);
    auto read_bytes = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        REQUIRE(in);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    CHECK(read_bytes(tmp) == read_bytes(golden_path));
}
