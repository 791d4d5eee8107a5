#include "tlbench/gradcam.hpp"

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>

namespace tlbench {

namespace {

int find_feature_layer(const nn::Model& model, const std::string& layer_name) {
    if (!layer_name.empty()) {
        const int idx = model.index_of(layer_name);
        if (idx < 0) throw LayerSelectionError("no layer named '" + layer_name + "'");
        if (!model.layer(idx).out_shape().spatial())
            throw LayerSelectionError(fmt::format(
                "layer '{}' output {} is not spatial; Grad-CAM needs a feature map",
                layer_name, model.layer(idx).out_shape().str()));
        return idx;
    }
    for (int i = model.layer_count() - 1; i >= 0; --i)
        if (model.layer(i).out_shape().spatial()) return i;
    throw LayerSelectionError("model has no spatial feature layer");
}

/// Index of the pre-activation logits: the layer feeding the final
/// sigmoid/softmax (or the last layer itself when no activation follows).
int find_logit_layer(const nn::Model& model) {
    const int last = model.layer_count() - 1;
    const auto* as_sigmoid = dynamic_cast<const nn::Sigmoid*>(&model.layer(last));
    const auto* as_softmax = dynamic_cast<const nn::Softmax*>(&model.layer(last));
    return (as_sigmoid || as_softmax) ? last - 1 : last;
}

} // namespace

Heatmap grad_cam(nn::Model& model, const ImageTensor& image, int target_class,
                 const std::string& layer_name) {
    const nn::Shape& in_shape = model.input_shape();
    if (image.channels != in_shape.c || image.height != in_shape.h ||
        image.width != in_shape.w)
        throw ShapeError(fmt::format("image {}x{}x{} does not match model input {}",
                                     image.channels, image.height, image.width, in_shape.str()));
    const int feature_idx = find_feature_layer(model, layer_name);
    const int logit_idx = find_logit_layer(model);
    if (feature_idx > logit_idx)
        throw LayerSelectionError("feature layer sits above the logits");

    nn::Mat x(in_shape.flat(), 1);
    for (std::size_t i = 0; i < image.values.size(); ++i)
        x(static_cast<Eigen::Index>(i), 0) = image.values[i];

    nn::StepCtx ctx{false, 0, 0};
    model.forward(x, ctx);

    const nn::Mat& logits = model.activation(logit_idx);
    nn::Mat seed = nn::Mat::Zero(logits.rows(), 1);
    if (logits.rows() == 1) {
        if (target_class != 0 && target_class != 1)
            throw RangeError("binary Grad-CAM target must be 0 or 1");
        seed(0, 0) = target_class == 1 ? 1.0 : -1.0;
    } else {
        if (target_class < 0 || target_class >= logits.rows())
            throw RangeError(fmt::format("target class {} out of [0,{})", target_class,
                                         logits.rows()));
        seed(target_class, 0) = 1.0;
    }

    model.zero_grads();
    // d(target logit) / d(feature map): backprop from the logits down to the
    // layer above the feature map.
    nn::Mat dfeat = model.backward_between(logit_idx, feature_idx + 1, seed);

    const nn::Shape fshape = model.layer(feature_idx).out_shape();
    const int hw = fshape.h * fshape.w;
    const nn::Mat& feat = model.activation(feature_idx);

    // Channel weights: spatial mean of the gradient.
    std::vector<float> cam(static_cast<std::size_t>(hw), 0.0f);
    for (int c = 0; c < fshape.c; ++c) {
        const double* g = dfeat.col(0).data() + static_cast<std::ptrdiff_t>(c) * hw;
        const double* a = feat.col(0).data() + static_cast<std::ptrdiff_t>(c) * hw;
        double w = 0.0;
        for (int i = 0; i < hw; ++i) w += g[i];
        w /= hw;
        for (int i = 0; i < hw; ++i) cam[i] += static_cast<float>(w * a[i]);
    }
    for (float& v : cam) v = std::max(v, 0.0f);

    Heatmap heat;
    heat.height = image.height;
    heat.width = image.width;
    heat.values = resize_bilinear(cam, fshape.h, fshape.w, image.height, image.width);
    for (float& v : heat.values) v = std::max(v, 0.0f);

    const float peak = *std::max_element(heat.values.begin(), heat.values.end());
    if (peak <= 0.0f) {
        std::fill(heat.values.begin(), heat.values.end(), 0.0f);
        heat.zero_gradient = true;
    } else {
        for (float& v : heat.values) v /= peak;
    }
    return heat;
}

ImageTensor render_overlay(const ImageTensor& image, const Heatmap& heatmap, double alpha) {
    if (image.height != heatmap.height || image.width != heatmap.width)
        throw ShapeError("overlay: image and heatmap shapes differ");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw RangeError("overlay alpha must lie in [0,1]");

    cv::Mat heat_u8(image.height, image.width, CV_8UC1);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            heat_u8.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(
                std::lround(std::clamp(heatmap.at(y, x), 0.0f, 1.0f) * 255.0f));
    cv::Mat colored;
    cv::applyColorMap(heat_u8, colored, cv::COLORMAP_JET); // BGR

    ImageTensor out = ImageTensor::zeros(3, image.height, image.width);
    for (int y = 0; y < image.height; ++y) {
        const cv::Vec3b* row = colored.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double map_v = row[x][2 - c] / 255.0; // BGR -> RGB
                const double img_v = image.channels == 3 ? image.at(c, y, x) : image.at(0, y, x);
                out.at(c, y, x) = static_cast<float>((1.0 - alpha) * img_v + alpha * map_v);
            }
        }
    }
    return out;
}

void overlay(const ImageTensor& image, const Heatmap& heatmap, double alpha,
             const std::string& out_path) {
    encode_png(render_overlay(image, heatmap, alpha), out_path);
}

void write_heatmap_png(const Heatmap& heatmap, const std::string& out_path) {
    ImageTensor img = ImageTensor::zeros(1, heatmap.height, heatmap.width);
    img.values.assign(heatmap.values.begin(), heatmap.values.end());
    encode_png(img, out_path);
}

} // namespace tlbench
