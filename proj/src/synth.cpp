#include "tlbench/synth.hpp"

#include "tlbench/image.hpp"
#include "tlbench/manifest_io.hpp"
#include "tlbench/rng.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace tlbench {

using nlohmann::json;

void SynthConfig::validate() const {
    if (count == 0) throw ConfigError("synth count must be positive");
    if (image_size < 16) throw ConfigError("synth image_size must be >= 16");
    if (!(class_a_fraction >= 0.0 && class_a_fraction <= 1.0))
        throw ConfigError("class_a_fraction must lie in [0,1]");
    if (countries.empty()) throw ConfigError("synth needs at least one country");
    if (!country_weights.empty() && country_weights.size() != countries.size())
        throw ConfigError("country_weights length must match countries");
    if (!(min_axis > 0 && max_axis >= min_axis)) throw ConfigError("bad ellipse axis range");
    if (out_dir.empty()) throw ConfigError("synth out_dir must be set");
}

bool EllipseRegion::contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double c = std::cos(angle_rad), s = std::sin(angle_rad);
    const double u = (dx * c + dy * s) / ax;
    const double v = (-dx * s + dy * c) / ay;
    return u * u + v * v <= 1.0;
}

namespace {

std::size_t pick_weighted(const std::vector<double>& cumulative, double u) {
    for (std::size_t i = 0; i < cumulative.size(); ++i)
        if (u < cumulative[i]) return i;
    return cumulative.size() - 1;
}

} // namespace

SynthResult generate_synth_corpus(const SynthConfig& config) {
    config.validate();
    const fs::path root(config.out_dir);
    fs::create_directories(root / "images");

    std::vector<double> cumulative;
    {
        double total = 0.0;
        for (std::size_t i = 0; i < config.countries.size(); ++i)
            total += config.country_weights.empty() ? 1.0 : config.country_weights[i];
        double run = 0.0;
        for (std::size_t i = 0; i < config.countries.size(); ++i) {
            run += (config.country_weights.empty() ? 1.0 : config.country_weights[i]) / total;
            cumulative.push_back(run);
        }
    }

    const std::size_t n_a = static_cast<std::size_t>(
        std::llround(static_cast<double>(config.count) * config.class_a_fraction));
    const int size = config.image_size;

    std::vector<PatientRecord> records;
    records.reserve(config.count);
    json geometry;
    geometry["images"] = json::object();

    for (std::size_t i = 0; i < config.count; ++i) {
        CounterRng rng(config.seed, i);
        const bool class_a = i < n_a;
        const std::string ref = fmt::format("images/img_{:05}.png", i);

        ImageTensor img = ImageTensor::zeros(1, size, size);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                img.at(0, y, x) = static_cast<float>(rng.next_uniform(0.0, config.noise_level));

        if (class_a) {
            EllipseRegion e;
            e.ax = rng.next_uniform(config.min_axis, config.max_axis);
            e.ay = rng.next_uniform(config.min_axis, config.max_axis);
            const double margin = std::max(e.ax, e.ay) + 2.0;
            e.cx = rng.next_uniform(margin, size - margin);
            e.cy = rng.next_uniform(margin, size - margin);
            e.angle_rad = rng.next_uniform(0.0, M_PI);
            const double brightness =
                rng.next_uniform(config.min_brightness, config.max_brightness);

            const double c = std::cos(e.angle_rad), s = std::sin(e.angle_rad);
            for (int y = 0; y < size; ++y) {
                for (int x = 0; x < size; ++x) {
                    const double dx = x - e.cx, dy = y - e.cy;
                    const double u = (dx * c + dy * s) / e.ax;
                    const double v = (-dx * s + dy * c) / e.ay;
                    const double d2 = u * u + v * v;
                    if (d2 <= 1.0) {
                        img.at(0, y, x) = static_cast<float>(brightness);
                    } else if (d2 <= 1.3225) { // soft rim out to 1.15x
                        const double d = std::sqrt(d2);
                        const double fade = (1.15 - d) / 0.15;
                        img.at(0, y, x) = std::max(
                            img.at(0, y, x), static_cast<float>(brightness * fade));
                    }
                }
            }
            geometry["images"][ref] = {{"cx", e.cx},
                                       {"cy", e.cy},
                                       {"ax", e.ax},
                                       {"ay", e.ay},
                                       {"angle_rad", e.angle_rad}};
        }
        encode_png(img, (root / ref).string());

        PatientRecord r;
        r.image_ref = ref;
        r.label = class_a ? Label::covid : Label::normal;
        r.country = config.countries[pick_weighted(cumulative, rng.next_unit())];
        if (rng.next_unit() >= config.missing_age_fraction)
            r.age = std::floor(rng.next_uniform(1.0, 96.0));
        if (rng.next_unit() >= config.missing_sex_fraction)
            r.sex = rng.next_bool() ? Sex::male : Sex::female;
        r.modality = rng.next_bool() ? Modality::ct : Modality::xray;
        r.source = "synthetic";
        records.push_back(std::move(r));
    }

    SynthResult result;
    result.class_a = n_a;
    result.class_b = config.count - n_a;
    result.manifest_path = (root / "manifest.csv").string();
    result.geometry_path = (root / "geometry.json").string();
    save_manifest(DatasetManifest(std::move(records)), result.manifest_path);
    std::ofstream geo(result.geometry_path);
    if (!geo) throw IoError("cannot write geometry file: " + result.geometry_path);
    geo << geometry.dump(2) << "\n";
    return result;
}

std::map<std::string, EllipseRegion> load_geometry(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("geometry file not found: " + path);
    json j = json::parse(in);
    std::map<std::string, EllipseRegion> out;
    for (const auto& [ref, e] : j.at("images").items()) {
        EllipseRegion region;
        region.cx = e.at("cx").get<double>();
        region.cy = e.at("cy").get<double>();
        region.ax = e.at("ax").get<double>();
        region.ay = e.at("ay").get<double>();
        region.angle_rad = e.at("angle_rad").get<double>();
        out[ref] = region;
    }
    return out;
}

} // namespace tlbench
