#pragma once

#include "tlbench/image.hpp"
#include "tlbench/rng.hpp"

#include <cstdint>

namespace tlbench {

/// Symmetric ranges for the stochastic transforms; each application samples
/// parameters uniformly within them.
struct AugmentationPolicy {
    bool horizontal_flip = true;
    double rotation_degrees = 15.0;
    double zoom_fraction = 0.10;
    double contrast_fraction = 0.10;
    double translation_fraction = 0.05;
    std::uint64_t seed = 42;

    void validate() const; // nonnegative magnitudes

    bool operator==(const AugmentationPolicy&) const = default;
};

/// Concrete parameters for one application.
struct AugmentationDraw {
    bool flip = false;
    double rotation_deg = 0.0;
    double zoom = 0.0;        // scale factor is 1 + zoom
    double translate_x = 0.0; // fraction of width
    double translate_y = 0.0; // fraction of height
    double contrast = 0.0;    // out = mean + (v - mean) * (1 + contrast)
};

/// Draw one parameter set. The stream is keyed by the caller via rng, which for
/// reproducibility should be CounterRng(policy.seed, image_index, epoch).
AugmentationDraw sample_augmentation(const AugmentationPolicy& policy, CounterRng& rng);

/// Flip, then one affine warp (rotation+zoom+translation about the center,
/// bilinear sampling, nearest-edge fill), then contrast; output is clamped to
/// [0,1] and keeps the input shape. The all-zero draw is an exact identity.
ImageTensor apply_augmentation(const ImageTensor& image, const AugmentationDraw& draw);

inline ImageTensor apply_augmentation(const ImageTensor& image, const AugmentationPolicy& policy,
                                      CounterRng& rng) {
    return apply_augmentation(image, sample_augmentation(policy, rng));
}

} // namespace tlbench
