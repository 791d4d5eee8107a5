#pragma once

#include "tlbench/image.hpp"
#include "tlbench/nn/model.hpp"

#include <string>

namespace tlbench {

/// Heatmap aligned to the input image; values in [0,1], max exactly 1 unless
/// the map is identically zero (zero_gradient set).
struct Heatmap {
    int height = 0;
    int width = 0;
    std::vector<float> values;
    bool zero_gradient = false;

    float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Gradient-weighted class activation map over `layer_name`'s feature map
/// (default: the last spatial layer before the head). For binary models the
/// target score is the pre-sigmoid logit (target 1) or its negation
/// (target 0); multi-class targets seed the chosen pre-softmax logit.
/// Channel weights are spatial means of the gradient; the weighted sum is
/// rectified, bilinearly upsampled to the input size, and normalized by its
/// maximum.
Heatmap grad_cam(nn::Model& model, const ImageTensor& image, int target_class,
                 const std::string& layer_name = "");

/// Blend a JET-colormapped heatmap over the image and write a PNG;
/// alpha 0 reproduces the input exactly, alpha 1 is the pure colormap.
void overlay(const ImageTensor& image, const Heatmap& heatmap, double alpha,
             const std::string& out_path);

/// In-memory variant for tests.
ImageTensor render_overlay(const ImageTensor& image, const Heatmap& heatmap, double alpha);

void write_heatmap_png(const Heatmap& heatmap, const std::string& out_path);

} // namespace tlbench
