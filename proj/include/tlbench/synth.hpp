#pragma once

#include "tlbench/records.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tlbench {

/// Two-class benchmark corpus: class A carries a bright soft-edged ellipse
/// ("opacity") over background noise, class B is noise only. Metadata
/// (country, age, sex, modality) is sampled from the configured
/// distributions, with controllable missing-value fractions so the curation
/// pipeline has real work to do.
struct SynthConfig {
    std::size_t count = 2000;
    int image_size = 64;
    double class_a_fraction = 0.55;
    std::vector<std::string> countries = {"CHN", "FRA", "IRN", "RUS", "ESP", "USA"};
    std::vector<double> country_weights = {}; // empty = uniform
    double missing_age_fraction = 0.05;
    double missing_sex_fraction = 0.05;
    std::uint64_t seed = 7;
    std::string out_dir;

    // geometry and intensity of the class-A ellipse
    double min_axis = 10.0;
    double max_axis = 18.0;
    double min_brightness = 0.60;
    double max_brightness = 0.95;
    double noise_level = 0.35; // background is uniform noise in [0, noise_level]

    void validate() const;
    bool operator==(const SynthConfig&) const = default;
};

struct EllipseRegion {
    double cx = 0, cy = 0;   // center, pixels
    double ax = 1, ay = 1;   // semi-axes, pixels
    double angle_rad = 0;

    bool contains(double x, double y) const;
};

struct SynthResult {
    std::string manifest_path;
    std::string geometry_path;
    std::size_t class_a = 0;
    std::size_t class_b = 0;
};

/// Writes images/ + manifest.csv + geometry.json under config.out_dir.
/// Class counts follow the floor/ceil split of count * class_a_fraction;
/// the whole corpus is a pure function of the seed.
SynthResult generate_synth_corpus(const SynthConfig& config);

/// Per-image ellipse regions (class-A images only), keyed by image_ref.
std::map<std::string, EllipseRegion> load_geometry(const std::string& path);

} // namespace tlbench
