#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tlbench/modelzoo.hpp"
#include "tlbench/nn/loss.hpp"
#include "tlbench/nn/model.hpp"
#include "tlbench/nn/optimizers.hpp"

#include <cmath>
#include <sstream>

using namespace tlbench;
using nn::Mat;

namespace {

Mat random_input(int rows, int cols, std::uint64_t seed) {
    CounterRng rng(seed, 0);
    Mat m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.next_unit();
    return m;
}

/// Total loss (data + regularization) with a fixed stochastic context, so
/// finite differences perturb exactly one thing.
double loss_with(nn::Model& model, const nn::Loss& loss, const Mat& x, const Mat& y,
                 const nn::StepCtx& ctx) {
    const Mat& pred = model.forward(x, ctx);
    return loss.value(pred, y) + model.regularization_loss();
}

} // namespace

TEST_CASE("dense layer: forward affine map and shape bookkeeping") {
    nn::Model model(nn::Shape{3, 1, 1});
    model.add(std::make_unique<nn::Dense>("d", 2));
    model.build(1);
    auto params = model.params();
    REQUIRE(params.size() == 2);
    params[0].value->setZero();
    (*params[0].value)(0, 0) = 1.0;
    (*params[0].value)(0, 2) = -1.0;
    (*params[1].value)(0, 0) = 0.5;
    Mat x(3, 1);
    x << 1.0, 2.0, 3.0;
    nn::StepCtx ctx;
    Mat out = model.forward(x, ctx);
    CHECK(out(0, 0) == doctest::Approx(1.0 - 3.0 + 0.5));
}

TEST_CASE("softmax rows sum to one; sigmoid stays in (0,1)") {
    nn::Model model(nn::Shape{4, 1, 1});
    model.add(std::make_unique<nn::Dense>("d", 3));
    model.add(std::make_unique<nn::Softmax>("sm"));
    model.build(7);
    Mat x = random_input(4, 9, 11);
    nn::StepCtx ctx;
    Mat out = model.forward(x, ctx);
    for (Eigen::Index b = 0; b < out.cols(); ++b)
        CHECK(out.col(b).sum() == doctest::Approx(1.0).epsilon(1e-6));

    nn::Model bin(nn::Shape{4, 1, 1});
    bin.add(std::make_unique<nn::Dense>("d", 1));
    bin.add(std::make_unique<nn::Sigmoid>("sg"));
    bin.build(7);
    Mat bout = bin.forward(x, ctx);
    for (Eigen::Index b = 0; b < bout.cols(); ++b) {
        CHECK(bout(0, b) > 0.0);
        CHECK(bout(0, b) < 1.0);
    }
}

TEST_CASE("loss values: analytic spot checks") {
    nn::BinaryCrossEntropy bce;
    Mat p(1, 1), y(1, 1);
    p << 0.5;
    y << 1.0;
    CHECK(bce.value(p, y) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Mat perfect(1, 2), y2(1, 2);
    perfect << 1.0, 0.0;
    y2 << 1.0, 0.0;
    CHECK(bce.value(perfect, y2) == doctest::Approx(0.0).epsilon(1e-5));

    nn::CategoricalCrossEntropy cce;
    Mat p3 = Mat::Constant(3, 1, 1.0 / 3.0);
    Mat y3 = Mat::Zero(3, 1);
    y3(2, 0) = 1.0;
    CHECK(cce.value(p3, y3) == doctest::Approx(std::log(3.0)).epsilon(1e-12));

    Mat onehot = Mat::Zero(3, 1);
    onehot(2, 0) = 1.0;
    CHECK(cce.value(onehot, y3) == doctest::Approx(0.0).epsilon(1e-5));
}

TEST_CASE("build_loss dispatch") {
    CHECK(build_loss(2)->name() == "binary_cross_entropy");
    CHECK(build_loss(3)->name() == "categorical_cross_entropy");
    CHECK_THROWS_AS(build_loss(1), ConfigError);
}

TEST_CASE("gradient check: SyntheticTiny head parameters vs central differences") {
    ModelSpec spec;
    spec.backbone.name = "SyntheticTiny";
    spec.input = nn::Shape{3, 16, 16};
    spec.head.dense_units = 8;
    spec.head.dropout_rate = 0.25;
    spec.head.l2_strength = 1e-3;
    spec.head.num_classes = 2;
    spec.freeze_rate = 0.0;
    auto model = build_model(spec, 99);
    auto loss = build_loss(2);

    Mat x = random_input(spec.input.flat(), 4, 5);
    Mat y(1, 4);
    y << 1, 0, 1, 0;
    nn::StepCtx ctx{true, 31337, 7}; // dropout active, fixed mask via fixed tick

    model->zero_grads();
    const Mat& pred = model->forward(x, ctx);
    model->backward(loss->grad(pred, y));

    const double h = 1e-5;
    int checked = 0;
    for (auto& p : model->params()) {
        if (p.name.rfind("head.", 0) != 0) continue; // head parameters only
        Mat& value = *p.value;
        const Mat& grad = *p.grad;
        // probe a spread of entries per tensor
        const Eigen::Index count = value.size();
        for (Eigen::Index k = 0; k < count; k += std::max<Eigen::Index>(1, count / 7)) {
            const Eigen::Index i = k % value.rows();
            const Eigen::Index j = k / value.rows();
            const double saved = value(i, j);
            value(i, j) = saved + h;
            const double up = loss_with(*model, *loss, x, y, ctx);
            value(i, j) = saved - h;
            const double down = loss_with(*model, *loss, x, y, ctx);
            value(i, j) = saved;
            const double fd = (up - down) / (2.0 * h);
            const double analytic = grad(i, j);
            const double rel =
                std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-8});
            INFO(p.name, "[", i, ",", j, "] fd=", fd, " analytic=", analytic);
            CHECK(rel < 1e-3);
            ++checked;
        }
    }
    CHECK(checked >= 20);
}

TEST_CASE("gradient check: multiclass softmax head") {
    ModelSpec spec;
    spec.backbone.name = "SyntheticTiny";
    spec.input = nn::Shape{3, 16, 16};
    spec.head.dense_units = 6;
    spec.head.num_classes = 3;
    auto model = build_model(spec, 12);
    auto loss = build_loss(3);

    Mat x = random_input(spec.input.flat(), 4, 6);
    Mat y = nn::one_hot({0, 2, 1, 2}, 3);
    nn::StepCtx ctx{true, 5150, 3};

    model->zero_grads();
    const Mat& pred = model->forward(x, ctx);
    model->backward(loss->grad(pred, y));

    const double h = 1e-5;
    for (auto& p : model->params()) {
        if (p.name != "head.logits.weight" && p.name != "head.dense.weight") continue;
        Mat& value = *p.value;
        for (Eigen::Index k = 0; k < value.size(); k += std::max<Eigen::Index>(1, value.size() / 5)) {
            const Eigen::Index i = k % value.rows();
            const Eigen::Index j = k / value.rows();
            const double saved = value(i, j);
            value(i, j) = saved + h;
            const double up = loss_with(*model, *loss, x, y, ctx);
            value(i, j) = saved - h;
            const double down = loss_with(*model, *loss, x, y, ctx);
            value(i, j) = saved;
            const double fd = (up - down) / (2.0 * h);
            const double rel = std::abs(fd - (*p.grad)(i, j)) /
                               std::max({std::abs(fd), std::abs((*p.grad)(i, j)), 1e-8});
            CHECK(rel < 1e-3);
        }
    }
}

TEST_CASE("gradient flows through conv/pool/bn backbone too") {
    ModelSpec spec;
    spec.backbone.name = "SyntheticTiny";
    spec.input = nn::Shape{3, 16, 16};
    spec.head.dense_units = 4;
    auto model = build_model(spec, 3);
    auto loss = build_loss(2);

    Mat x = random_input(spec.input.flat(), 2, 8);
    Mat y(1, 2);
    y << 1, 0;
    nn::StepCtx ctx{true, 11, 1};
    model->zero_grads();
    const Mat& pred = model->forward(x, ctx);
    model->backward(loss->grad(pred, y));

    const double h = 1e-5;
    for (auto& p : model->params()) {
        if (p.name != "backbone.conv1.weight" && p.name != "backbone.bn2.gamma") continue;
        Mat& value = *p.value;
        for (Eigen::Index k : {0, 5}) {
            const Eigen::Index i = k % value.rows();
            const Eigen::Index j = k / value.rows();
            const double saved = value(i, j);
            value(i, j) = saved + h;
            const double up = loss_with(*model, *loss, x, y, ctx);
            value(i, j) = saved - h;
            const double down = loss_with(*model, *loss, x, y, ctx);
            value(i, j) = saved;
            const double fd = (up - down) / (2.0 * h);
            const double rel = std::abs(fd - (*p.grad)(i, j)) /
                               std::max({std::abs(fd), std::abs((*p.grad)(i, j)), 1e-8});
            CHECK(rel < 1e-3);
        }
    }
}

TEST_CASE("optimizers: sgd step, adamw decay direction, wd=0 equals adam") {
    // single scalar parameter
    Mat w = Mat::Constant(1, 1, 1.0);
    Mat g = Mat::Constant(1, 1, 0.5);
    std::vector<nn::ParamRef> params{{"w", &w, &g, true}};

    SUBCASE("sgd: w -= lr * g") {
        nn::Sgd sgd(0.1);
        sgd.step(params);
        CHECK(w(0, 0) == doctest::Approx(1.0 - 0.05));
    }
    SUBCASE("adamw with wd=0 matches adam over a 10-step fixture") {
        Mat wa = Mat::Constant(3, 2, 0.7), ga(3, 2);
        Mat wb = wa;
        Mat gb(3, 2);
        std::vector<nn::ParamRef> pa{{"w", &wa, &ga, true}};
        std::vector<nn::ParamRef> pb{{"w", &wb, &gb, true}};
        nn::Adam adam(1e-3);
        nn::Adam adamw(1e-3, 0.9, 0.999, 1e-7, /*decoupled_wd=*/0.0);
        CounterRng rng(8, 0);
        for (int step = 0; step < 10; ++step) {
            for (Eigen::Index i = 0; i < ga.size(); ++i) {
                const double v = rng.next_symmetric(1.0);
                ga(i / 2, i % 2) = v;
                gb(i / 2, i % 2) = v;
            }
            adam.step(pa);
            adamw.step(pb);
        }
        for (Eigen::Index i = 0; i < wa.rows(); ++i)
            for (Eigen::Index j = 0; j < wa.cols(); ++j)
                CHECK(std::abs(wa(i, j) - wb(i, j)) < 1e-7);
    }
    SUBCASE("adamw with wd>0 shrinks parameters beyond the gradient step") {
        Mat w1 = Mat::Constant(1, 1, 1.0), g1 = Mat::Zero(1, 1);
        std::vector<nn::ParamRef> p1{{"w", &w1, &g1, true}};
        nn::Adam adamw(1e-2, 0.9, 0.999, 1e-7, 0.1);
        adamw.step(p1);
        CHECK(w1(0, 0) == doctest::Approx(1.0 - 1e-2 * 0.1 * 1.0));
    }
    SUBCASE("frozen parameters are skipped") {
        Mat wf = Mat::Constant(1, 1, 2.0), gf = Mat::Constant(1, 1, 1.0);
        std::vector<nn::ParamRef> pf{{"w", &wf, &gf, false}};
        nn::Sgd sgd(0.5);
        sgd.step(pf);
        CHECK(wf(0, 0) == 2.0);
    }
}

TEST_CASE("optimizer families all reduce a quadratic") {
    for (auto family : {nn::OptimizerFamily::sgd, nn::OptimizerFamily::rmsprop,
                        nn::OptimizerFamily::adam, nn::OptimizerFamily::nadam,
                        nn::OptimizerFamily::adam_decoupled_wd}) {
        OptimizerSpec spec{family, 0.05, 1e-4};
        auto opt = build_optimizer(spec);
        Mat w = Mat::Constant(1, 1, 3.0);
        Mat g(1, 1);
        std::vector<nn::ParamRef> params{{"w", &w, &g, true}};
        for (int step = 0; step < 200; ++step) {
            g(0, 0) = 2.0 * w(0, 0); // d/dw of w^2
            opt->step(params);
        }
        INFO("family ", nn::to_string(family));
        CHECK(std::abs(w(0, 0)) < 1.0);
    }
}

TEST_CASE("dropout: identity at inference, masked and rescaled in training") {
    nn::Dropout drop("d", 0.5);
    drop.build(nn::Shape{10, 1, 1});
    Mat x = Mat::Constant(10, 20, 1.0);
    Mat out;
    nn::StepCtx infer{false, 1, 0};
    drop.forward(x, out, infer);
    CHECK(out == x);

    nn::StepCtx train_ctx{true, 1, 0};
    drop.forward(x, out, train_ctx);
    int zeros = 0, doubled = 0;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double v = out(i % 10, i / 10);
        if (v == 0.0) ++zeros;
        else if (std::abs(v - 2.0) < 1e-12) ++doubled;
    }
    CHECK(zeros + doubled == 200);
    CHECK(zeros > 50);
    CHECK(doubled > 50);

    // same tick -> same mask; different tick -> different mask
    Mat again;
    drop.forward(x, again, train_ctx);
    CHECK(again == out);
    nn::StepCtx other{true, 1, 1};
    drop.forward(x, again, other);
    CHECK(again != out);
}

TEST_CASE("batch norm: normalizes activations and updates running stats") {
    nn::BatchNorm bn("bn");
    bn.build(nn::Shape{2, 1, 1});
    CounterRng rng(4, 0);
    bn.init(rng);
    Mat x(2, 50);
    CounterRng data(9, 0);
    for (Eigen::Index j = 0; j < 50; ++j) {
        x(0, j) = 5.0 + data.next_normal();
        x(1, j) = -3.0 + 2.0 * data.next_normal();
    }
    Mat out;
    nn::StepCtx train_ctx{true, 0, 0};
    bn.forward(x, out, train_ctx);
    for (int c = 0; c < 2; ++c) {
        const double mean = out.row(c).mean();
        CHECK(std::abs(mean) < 1e-10);
    }
    // after many training passes, inference stats approach the batch stats
    // (momentum 0.9 leaves ~0.9^n of the init; n=100 puts that below 1e-4)
    for (int i = 0; i < 100; ++i) bn.forward(x, out, train_ctx);
    nn::StepCtx infer{false, 0, 0};
    Mat eval_out;
    bn.forward(x, eval_out, infer);
    CHECK(std::abs(eval_out.row(0).mean()) < 0.05);
}

TEST_CASE("model state save/load round-trips bit-exactly") {
    ModelSpec spec;
    spec.backbone.name = "SyntheticTiny";
    spec.input = nn::Shape{3, 16, 16};
    auto model = build_model(spec, 21);
    Mat x = random_input(spec.input.flat(), 3, 2);
    nn::StepCtx train_ctx{true, 2, 0};
    model->forward(x, train_ctx); // move BN running stats off init

    std::stringstream buffer;
    model->save_state(buffer);
    auto clone = build_model(spec, 22); // different init
    clone->load_state(buffer);

    nn::StepCtx infer{false, 0, 0};
    Mat a = model->forward(x, infer);
    Mat b = clone->forward(x, infer);
    CHECK(a == b);
}

TEST_CASE("one_hot encodes and rejects out-of-range labels") {
    Mat y = nn::one_hot({0, 2, 1}, 3);
    CHECK(y(0, 0) == 1.0);
    CHECK(y(2, 1) == 1.0);
    CHECK(y(1, 2) == 1.0);
    CHECK(y.sum() == 3.0);
    CHECK_THROWS_AS(nn::one_hot({3}, 3), RangeError);
}
