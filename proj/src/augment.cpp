#include "tlbench/augment.hpp"

#include <algorithm>
#include <cmath>

namespace tlbench {

void AugmentationPolicy::validate() const {
    if (rotation_degrees < 0 || zoom_fraction < 0 || contrast_fraction < 0 ||
        translation_fraction < 0)
        throw ConfigError("augmentation magnitudes must be nonnegative");
    if (zoom_fraction >= 1.0) throw ConfigError("zoom_fraction must be below 1");
}

AugmentationDraw sample_augmentation(const AugmentationPolicy& policy, CounterRng& rng) {
    policy.validate();
    AugmentationDraw d;
    // Fixed draw order keeps streams aligned across policies.
    const bool coin = rng.next_bool();
    d.flip = policy.horizontal_flip && coin;
    d.rotation_deg = rng.next_symmetric(policy.rotation_degrees);
    d.zoom = rng.next_symmetric(policy.zoom_fraction);
    d.translate_x = rng.next_symmetric(policy.translation_fraction);
    d.translate_y = rng.next_symmetric(policy.translation_fraction);
    d.contrast = rng.next_symmetric(policy.contrast_fraction);
    return d;
}

namespace {

/// Sample one plane at (sx, sy) with bilinear weights; coordinates are clamped
/// to the valid rectangle, which realizes nearest-edge fill.
inline float sample_clamped(const float* plane, int h, int w, double sy, double sx) {
    sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
    sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
    const int y0 = static_cast<int>(sy);
    const int x0 = static_cast<int>(sx);
    const int y1 = std::min(y0 + 1, h - 1);
    const int x1 = std::min(x0 + 1, w - 1);
    const double wy = sy - y0;
    const double wx = sx - x0;
    const double top = plane[y0 * w + x0] * (1.0 - wx) + plane[y0 * w + x1] * wx;
    const double bot = plane[y1 * w + x0] * (1.0 - wx) + plane[y1 * w + x1] * wx;
    return static_cast<float>(top * (1.0 - wy) + bot * wy);
}

} // namespace

ImageTensor apply_augmentation(const ImageTensor& image, const AugmentationDraw& draw) {
    const int h = image.height, w = image.width, ch = image.channels;
    ImageTensor flipped = image;
    if (draw.flip) {
        for (int c = 0; c < ch; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) flipped.at(c, y, x) = image.at(c, y, w - 1 - x);
    }

    ImageTensor out = ImageTensor::zeros(ch, h, w);
    const bool identity_warp =
        draw.rotation_deg == 0.0 && draw.zoom == 0.0 && draw.translate_x == 0.0 &&
        draw.translate_y == 0.0;
    if (identity_warp) {
        out.values = flipped.values;
    } else {
        // Inverse map: source = C + S^-1 R^-1 (dest - C - T).
        const double theta = draw.rotation_deg * M_PI / 180.0;
        const double cos_t = std::cos(theta), sin_t = std::sin(theta);
        const double scale = 1.0 + draw.zoom;
        const double inv_scale = 1.0 / scale;
        const double cx = (w - 1) * 0.5, cy = (h - 1) * 0.5;
        const double tx = draw.translate_x * w, ty = draw.translate_y * h;
        for (int c = 0; c < ch; ++c) {
            const float* plane = flipped.values.data() + c * flipped.plane_size();
            for (int y = 0; y < h; ++y) {
                const double dy = y - cy - ty;
                for (int x = 0; x < w; ++x) {
                    const double dx = x - cx - tx;
                    const double sx = cx + inv_scale * (cos_t * dx + sin_t * dy);
                    const double sy = cy + inv_scale * (-sin_t * dx + cos_t * dy);
                    out.at(c, y, x) = sample_clamped(plane, h, w, sy, sx);
                }
            }
        }
    }

    if (draw.contrast != 0.0) {
        const double gain = 1.0 + draw.contrast;
        for (int c = 0; c < ch; ++c) {
            float* plane = out.values.data() + c * out.plane_size();
            double mean = 0.0;
            for (std::size_t i = 0; i < out.plane_size(); ++i) mean += plane[i];
            mean /= static_cast<double>(out.plane_size());
            for (std::size_t i = 0; i < out.plane_size(); ++i)
                plane[i] = static_cast<float>(mean + (plane[i] - mean) * gain);
        }
    }
    for (float& v : out.values) v = std::clamp(v, 0.0f, 1.0f);
    return out;
}

} // namespace tlbench
