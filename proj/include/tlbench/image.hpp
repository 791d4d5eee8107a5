#pragma once

#include "tlbench/errors.hpp"

#include <string>
#include <vector>

namespace tlbench {

/// Float image in CHW layout, values in [0,1]. After preprocessing the three
/// channels are identical (grayscale replicated for pretrained-backbone input
/// compatibility).
struct ImageTensor {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> values; // c*(h*w) + y*w + x

    static ImageTensor zeros(int channels, int height, int width) {
        ImageTensor t;
        t.height = height;
        t.width = width;
        t.channels = channels;
        t.values.assign(static_cast<std::size_t>(channels) * height * width, 0.0f);
        return t;
    }

    float& at(int c, int y, int x) {
        return values[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return values[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
};

/// Decode PNG/JPEG, convert to luminance, rescale to [0,1], bilinearly resize
/// to (target_h, target_w) and replicate to 3 channels. Undecodable input
/// raises DecodeError carrying the image_ref.
ImageTensor decode_and_preprocess(const std::string& image_ref, int target_h, int target_w);

/// As above but keeping the source resolution (used when materializing
/// augmented copies at native size).
ImageTensor decode_grayscale(const std::string& image_ref);

/// Write as 8-bit PNG (single channel when all channels are identical).
void encode_png(const ImageTensor& image, const std::string& path);

/// Half-pixel-center bilinear resample of one channel plane.
std::vector<float> resize_bilinear(const std::vector<float>& src, int src_h, int src_w,
                                   int dst_h, int dst_w);

} // namespace tlbench
