#include "tlbench/config.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace tlbench {

using nlohmann::json;

namespace {

void expect_keys(const json& j, const std::string& section,
                 std::initializer_list<const char*> allowed) {
    if (!j.is_object())
        throw ConfigError(fmt::format("config section '{}' must be an object", section));
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (key == k) {
                known = true;
                break;
            }
        if (!known)
            throw ConfigError(fmt::format("unknown key '{}' in config section '{}'", key,
                                          section.empty() ? "<root>" : section));
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("bad value for '{}': {}", key, e.what()));
    }
}

std::string join_under(const std::string& base, const std::string& leaf) {
    return (fs::path(base) / leaf).string();
}

json split_to_json(const SplitSpec& s) {
    std::vector<std::string> keys;
    for (auto k : s.strata_keys) keys.push_back(to_string(k));
    return {{"fractions", s.fractions}, {"strata", keys}, {"seed", s.seed}};
}

SplitSpec split_from_json(const json& j, std::uint64_t fallback_seed) {
    expect_keys(j, "data.split", {"fractions", "strata", "seed"});
    SplitSpec s;
    if (j.contains("fractions")) {
        auto f = j.at("fractions").get<std::vector<double>>();
        if (f.size() == 2) f.push_back(0.0);
        if (f.size() != 3) throw ConfigError("split fractions must list 2 or 3 values");
        s.fractions = {f[0], f[1], f[2]};
    }
    if (j.contains("strata")) {
        s.strata_keys.clear();
        for (const auto& k : j.at("strata"))
            s.strata_keys.push_back(strata_key_from_string(k.get<std::string>()));
    }
    s.seed = get_or<std::uint64_t>(j, "seed", fallback_seed);
    return s;
}

} // namespace

void RunConfig::validate() const {
    data.split.validate();
    pipeline.batching.validate();
    pipeline.augmentation.validate();
    if (pipeline.image_height < 8 || pipeline.image_width < 8)
        throw ConfigError("pipeline.image_size must be at least 8x8");
    backbone_info(model.spec.backbone.name); // known name
    model.spec.head.validate();
    if (!(model.spec.freeze_rate >= 0.0 && model.spec.freeze_rate <= 1.0))
        throw RangeError("model.freeze_rate outside [0,1]");
    model.optimizer.validate();
    train.validate();
    if (tune.max_epochs < 1) throw ConfigError("tune.max_epochs must be >= 1");
    if (tune.eta < 2) throw ConfigError("tune.eta must be >= 2");
    if (tune.workers < 1) throw ConfigError("tune.workers must be >= 1");
    tune.space.validate();
    if (!(eval.threshold >= 0.0 && eval.threshold <= 1.0))
        throw ConfigError("eval.threshold must lie in [0,1]");
    if (!(explain.alpha >= 0.0 && explain.alpha <= 1.0))
        throw ConfigError("explain.alpha must lie in [0,1]");
    synth.validate();
}

RunConfig RunConfig::from_json_text(const std::string& text,
                                    std::optional<std::uint64_t> seed_override,
                                    std::optional<std::string> out_override) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
    }
    expect_keys(j, "", {"seed", "out_dir", "data", "synth", "pipeline", "model", "train", "tune",
                        "eval", "explain"});

    RunConfig c;
    c.seed = seed_override ? *seed_override : get_or<std::uint64_t>(j, "seed", 42);
    c.out_dir = out_override ? *out_override : get_or<std::string>(j, "out_dir", "runs/out");

    // data
    {
        const json d = j.value("data", json::object());
        expect_keys(d, "data",
                    {"manifest", "image_root", "impute_strategy", "min_country_samples",
                     "country_caps", "split"});
        c.data.manifest = get_or<std::string>(d, "manifest", "");
        c.data.image_root = get_or<std::string>(d, "image_root", "");
        c.data.impute_strategy = impute_strategy_from_string(
            get_or<std::string>(d, "impute_strategy", "country_median"));
        c.data.min_country_samples = get_or<std::size_t>(d, "min_country_samples", 100);
        if (d.contains("country_caps"))
            for (const auto& [country, cap] : d.at("country_caps").items())
                c.data.country_caps[country] = cap.get<std::size_t>();
        c.data.split = split_from_json(d.value("split", json::object()),
                                       derive_seed(c.seed, "split"));
    }

    // synth
    {
        const json s = j.value("synth", json::object());
        expect_keys(s, "synth",
                    {"count", "image_size", "class_a_fraction", "countries", "country_weights",
                     "missing_age_fraction", "missing_sex_fraction", "seed", "out_dir",
                     "min_axis", "max_axis", "min_brightness", "max_brightness", "noise_level"});
        c.synth.count = get_or<std::size_t>(s, "count", 2000);
        c.synth.image_size = get_or<int>(s, "image_size", 64);
        c.synth.class_a_fraction = get_or<double>(s, "class_a_fraction", 0.55);
        if (s.contains("countries"))
            c.synth.countries = s.at("countries").get<std::vector<std::string>>();
        if (s.contains("country_weights"))
            c.synth.country_weights = s.at("country_weights").get<std::vector<double>>();
        c.synth.missing_age_fraction = get_or<double>(s, "missing_age_fraction", 0.05);
        c.synth.missing_sex_fraction = get_or<double>(s, "missing_sex_fraction", 0.05);
        c.synth.seed = get_or<std::uint64_t>(s, "seed", derive_seed(c.seed, "synth"));
        c.synth.out_dir = get_or<std::string>(s, "out_dir", join_under(c.out_dir, "corpus"));
        c.synth.min_axis = get_or<double>(s, "min_axis", 10.0);
        c.synth.max_axis = get_or<double>(s, "max_axis", 18.0);
        c.synth.min_brightness = get_or<double>(s, "min_brightness", 0.60);
        c.synth.max_brightness = get_or<double>(s, "max_brightness", 0.95);
        c.synth.noise_level = get_or<double>(s, "noise_level", 0.35);
    }

    // pipeline
    {
        const json p = j.value("pipeline", json::object());
        expect_keys(p, "pipeline", {"image_size", "batch", "augmentation", "balancing"});
        if (p.contains("image_size")) {
            const json& sz = p.at("image_size");
            if (sz.is_number_integer()) {
                c.pipeline.image_height = c.pipeline.image_width = sz.get<int>();
            } else {
                auto v = sz.get<std::vector<int>>();
                if (v.size() != 2) throw ConfigError("pipeline.image_size must be N or [H,W]");
                c.pipeline.image_height = v[0];
                c.pipeline.image_width = v[1];
            }
        }
        const json b = p.value("batch", json::object());
        expect_keys(b, "pipeline.batch", {"batch_size", "shuffle_buffer", "seed", "cache"});
        c.pipeline.batching.batch_size = get_or<std::size_t>(b, "batch_size", 128);
        c.pipeline.batching.shuffle_buffer = get_or<std::size_t>(b, "shuffle_buffer", 10000);
        c.pipeline.batching.seed =
            get_or<std::uint64_t>(b, "seed", derive_seed(c.seed, "batches"));
        c.pipeline.batching.cache = get_or<bool>(b, "cache", true);

        const json a = p.value("augmentation", json::object());
        expect_keys(a, "pipeline.augmentation",
                    {"horizontal_flip", "rotation_degrees", "zoom_fraction", "contrast_fraction",
                     "translation_fraction", "seed"});
        c.pipeline.augmentation.horizontal_flip = get_or<bool>(a, "horizontal_flip", true);
        c.pipeline.augmentation.rotation_degrees = get_or<double>(a, "rotation_degrees", 15.0);
        c.pipeline.augmentation.zoom_fraction = get_or<double>(a, "zoom_fraction", 0.10);
        c.pipeline.augmentation.contrast_fraction = get_or<double>(a, "contrast_fraction", 0.10);
        c.pipeline.augmentation.translation_fraction =
            get_or<double>(a, "translation_fraction", 0.05);
        c.pipeline.augmentation.seed =
            get_or<std::uint64_t>(a, "seed", derive_seed(c.seed, "augment"));

        const json bal = p.value("balancing", json::object());
        expect_keys(bal, "pipeline.balancing", {"targets", "allow_downsampling", "staging_dir"});
        if (bal.contains("targets"))
            for (const auto& [label, target] : bal.at("targets").items())
                c.pipeline.balancing.targets[label_from_string(label)] =
                    target.get<std::size_t>();
        c.pipeline.balancing.allow_downsampling = get_or<bool>(bal, "allow_downsampling", false);
        c.pipeline.balancing.staging_dir =
            get_or<std::string>(bal, "staging_dir", join_under(c.out_dir, "staging"));
    }

    // model
    {
        const json m = j.value("model", json::object());
        expect_keys(m, "model", {"name", "backbone", "freeze_rate", "head", "optimizer",
                                 "bn_inference_when_frozen"});
        const json bb = m.value("backbone", json::object());
        expect_keys(bb, "model.backbone", {"name", "pretrained"});
        c.model.spec.backbone.name = get_or<std::string>(bb, "name", "SyntheticTiny");
        c.model.spec.backbone.pretrained = get_or<bool>(bb, "pretrained", false);
        c.model.spec.freeze_rate = get_or<double>(m, "freeze_rate", 0.0);
        const json h = m.value("head", json::object());
        expect_keys(h, "model.head", {"dropout_rate", "dense_units", "l2_strength",
                                      "num_classes"});
        c.model.spec.head.dropout_rate = get_or<double>(h, "dropout_rate", 0.3);
        c.model.spec.head.dense_units = get_or<int>(h, "dense_units", 128);
        c.model.spec.head.l2_strength = get_or<double>(h, "l2_strength", 1e-4);
        c.model.spec.head.num_classes = get_or<int>(h, "num_classes", 2);
        c.model.spec.bn_inference_when_frozen = get_or<bool>(m, "bn_inference_when_frozen", true);
        const json o = m.value("optimizer", json::object());
        expect_keys(o, "model.optimizer", {"family", "learning_rate", "weight_decay", "preset"});
        if (o.contains("preset")) {
            c.model.optimizer = optimizer_preset(o.at("preset").get<std::string>());
        } else {
            c.model.optimizer.family = nn::optimizer_family_from_string(
                get_or<std::string>(o, "family", "adam_decoupled_wd"));
            c.model.optimizer.learning_rate = get_or<double>(o, "learning_rate", 5e-5);
            c.model.optimizer.weight_decay = get_or<double>(o, "weight_decay", 1e-5);
        }
        c.model.name = get_or<std::string>(m, "name", c.model.spec.backbone.name);
    }
    c.model.spec.input =
        nn::Shape{3, c.pipeline.image_height, c.pipeline.image_width};

    // train
    {
        const json t = j.value("train", json::object());
        expect_keys(t, "train",
                    {"max_epochs", "early_stop_patience", "restore_best", "lr_reduce_factor",
                     "lr_reduce_patience", "min_delta", "min_lr", "keep_last_checkpoints",
                     "checkpoint_dir", "seed"});
        c.train.max_epochs = get_or<int>(t, "max_epochs", 30);
        c.train.early_stop_patience = get_or<int>(t, "early_stop_patience", 3);
        c.train.early_stop_restore_best = get_or<bool>(t, "restore_best", true);
        c.train.lr_reduce_factor = get_or<double>(t, "lr_reduce_factor", 0.5);
        c.train.lr_reduce_patience = get_or<int>(t, "lr_reduce_patience", 2);
        c.train.min_delta = get_or<double>(t, "min_delta", 0.0);
        c.train.min_lr = get_or<double>(t, "min_lr", 1e-7);
        c.train.keep_last_checkpoints = get_or<int>(t, "keep_last_checkpoints", 5);
        c.train.checkpoint_dir =
            get_or<std::string>(t, "checkpoint_dir", join_under(c.out_dir, "checkpoints"));
        c.train.seed = get_or<std::uint64_t>(t, "seed", derive_seed(c.seed, "train"));
    }

    // tune
    {
        const json t = j.value("tune", json::object());
        expect_keys(t, "tune", {"max_epochs", "eta", "workers", "dir", "space"});
        c.tune.max_epochs = get_or<int>(t, "max_epochs", 30);
        c.tune.eta = get_or<int>(t, "eta", 3);
        c.tune.workers = get_or<int>(t, "workers", 1);
        c.tune.dir = get_or<std::string>(t, "dir", join_under(c.out_dir, "tuning"));
        const json s = t.value("space", json::object());
        expect_keys(s, "tune.space",
                    {"dropout_rates", "dense_units", "learning_rates", "weight_decays",
                     "freeze_rates", "optimizers", "continuous_rates", "lr_bounds",
                     "wd_bounds"});
        auto& space = c.tune.space;
        if (s.contains("dropout_rates"))
            space.dropout_rates = s.at("dropout_rates").get<std::vector<double>>();
        if (s.contains("dense_units"))
            space.dense_units = s.at("dense_units").get<std::vector<int>>();
        if (s.contains("learning_rates"))
            space.learning_rates = s.at("learning_rates").get<std::vector<double>>();
        if (s.contains("weight_decays"))
            space.weight_decays = s.at("weight_decays").get<std::vector<double>>();
        if (s.contains("freeze_rates"))
            space.freeze_rates = s.at("freeze_rates").get<std::vector<double>>();
        if (s.contains("optimizers")) {
            space.optimizers.clear();
            for (const auto& name : s.at("optimizers"))
                space.optimizers.push_back(
                    nn::optimizer_family_from_string(name.get<std::string>()));
        }
        space.continuous_rates = get_or<bool>(s, "continuous_rates", true);
        if (s.contains("lr_bounds")) {
            auto v = s.at("lr_bounds").get<std::vector<double>>();
            if (v.size() != 2) throw ConfigError("tune.space.lr_bounds must list [lo, hi]");
            space.lr_bounds[0] = v[0];
            space.lr_bounds[1] = v[1];
        }
        if (s.contains("wd_bounds")) {
            auto v = s.at("wd_bounds").get<std::vector<double>>();
            if (v.size() != 2) throw ConfigError("tune.space.wd_bounds must list [lo, hi]");
            space.wd_bounds[0] = v[0];
            space.wd_bounds[1] = v[1];
        }
    }

    // eval
    {
        const json e = j.value("eval", json::object());
        expect_keys(e, "eval", {"threshold", "report_dir", "checkpoint"});
        c.eval.threshold = get_or<double>(e, "threshold", 0.5);
        c.eval.report_dir = get_or<std::string>(e, "report_dir", join_under(c.out_dir, "reports"));
        c.eval.checkpoint = get_or<std::string>(e, "checkpoint", "");
    }

    // explain
    {
        const json e = j.value("explain", json::object());
        expect_keys(e, "explain", {"image", "checkpoint", "layer", "target_class", "alpha",
                                   "heatmap_out", "overlay_out"});
        c.explain.image = get_or<std::string>(e, "image", "");
        c.explain.checkpoint = get_or<std::string>(e, "checkpoint", "");
        c.explain.layer = get_or<std::string>(e, "layer", "");
        c.explain.target_class = get_or<int>(e, "target_class", 1);
        c.explain.alpha = get_or<double>(e, "alpha", 0.4);
        c.explain.heatmap_out =
            get_or<std::string>(e, "heatmap_out", join_under(c.out_dir, "explain/heatmap.png"));
        c.explain.overlay_out =
            get_or<std::string>(e, "overlay_out", join_under(c.out_dir, "explain/overlay.png"));
    }

    c.validate();
    return c;
}

RunConfig RunConfig::from_file(const std::string& path, std::optional<std::uint64_t> seed_override,
                               std::optional<std::string> out_override) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text, seed_override, out_override);
}

std::string RunConfig::to_json_text() const {
    json j;
    j["seed"] = seed;
    j["out_dir"] = out_dir;

    json caps = json::object();
    for (const auto& [country, cap] : data.country_caps) caps[country] = cap;
    j["data"] = {{"manifest", data.manifest},
                 {"image_root", data.image_root},
                 {"impute_strategy", to_string(data.impute_strategy)},
                 {"min_country_samples", data.min_country_samples},
                 {"country_caps", caps},
                 {"split", split_to_json(data.split)}};

    j["synth"] = {{"count", synth.count},
                  {"image_size", synth.image_size},
                  {"class_a_fraction", synth.class_a_fraction},
                  {"countries", synth.countries},
                  {"country_weights", synth.country_weights},
                  {"missing_age_fraction", synth.missing_age_fraction},
                  {"missing_sex_fraction", synth.missing_sex_fraction},
                  {"seed", synth.seed},
                  {"out_dir", synth.out_dir},
                  {"min_axis", synth.min_axis},
                  {"max_axis", synth.max_axis},
                  {"min_brightness", synth.min_brightness},
                  {"max_brightness", synth.max_brightness},
                  {"noise_level", synth.noise_level}};

    json targets = json::object();
    for (const auto& [label, target] : pipeline.balancing.targets)
        targets[to_string(label)] = target;
    j["pipeline"] = {
        {"image_size", {pipeline.image_height, pipeline.image_width}},
        {"batch",
         {{"batch_size", pipeline.batching.batch_size},
          {"shuffle_buffer", pipeline.batching.shuffle_buffer},
          {"seed", pipeline.batching.seed},
          {"cache", pipeline.batching.cache}}},
        {"augmentation",
         {{"horizontal_flip", pipeline.augmentation.horizontal_flip},
          {"rotation_degrees", pipeline.augmentation.rotation_degrees},
          {"zoom_fraction", pipeline.augmentation.zoom_fraction},
          {"contrast_fraction", pipeline.augmentation.contrast_fraction},
          {"translation_fraction", pipeline.augmentation.translation_fraction},
          {"seed", pipeline.augmentation.seed}}},
        {"balancing",
         {{"targets", targets},
          {"allow_downsampling", pipeline.balancing.allow_downsampling},
          {"staging_dir", pipeline.balancing.staging_dir}}}};

    j["model"] = {{"name", model.name},
                  {"backbone",
                   {{"name", model.spec.backbone.name},
                    {"pretrained", model.spec.backbone.pretrained}}},
                  {"freeze_rate", model.spec.freeze_rate},
                  {"head",
                   {{"dropout_rate", model.spec.head.dropout_rate},
                    {"dense_units", model.spec.head.dense_units},
                    {"l2_strength", model.spec.head.l2_strength},
                    {"num_classes", model.spec.head.num_classes}}},
                  {"bn_inference_when_frozen", model.spec.bn_inference_when_frozen},
                  {"optimizer",
                   {{"family", nn::to_string(model.optimizer.family)},
                    {"learning_rate", model.optimizer.learning_rate},
                    {"weight_decay", model.optimizer.weight_decay}}}};

    j["train"] = {{"max_epochs", train.max_epochs},
                  {"early_stop_patience", train.early_stop_patience},
                  {"restore_best", train.early_stop_restore_best},
                  {"lr_reduce_factor", train.lr_reduce_factor},
                  {"lr_reduce_patience", train.lr_reduce_patience},
                  {"min_delta", train.min_delta},
                  {"min_lr", train.min_lr},
                  {"keep_last_checkpoints", train.keep_last_checkpoints},
                  {"checkpoint_dir", train.checkpoint_dir},
                  {"seed", train.seed}};

    std::vector<std::string> optimizer_names;
    for (auto f : tune.space.optimizers) optimizer_names.push_back(nn::to_string(f));
    j["tune"] = {{"max_epochs", tune.max_epochs},
                 {"eta", tune.eta},
                 {"workers", tune.workers},
                 {"dir", tune.dir},
                 {"space",
                  {{"dropout_rates", tune.space.dropout_rates},
                   {"dense_units", tune.space.dense_units},
                   {"learning_rates", tune.space.learning_rates},
                   {"weight_decays", tune.space.weight_decays},
                   {"freeze_rates", tune.space.freeze_rates},
                   {"optimizers", optimizer_names},
                   {"continuous_rates", tune.space.continuous_rates},
                   {"lr_bounds", {tune.space.lr_bounds[0], tune.space.lr_bounds[1]}},
                   {"wd_bounds", {tune.space.wd_bounds[0], tune.space.wd_bounds[1]}}}}};

    j["eval"] = {{"threshold", eval.threshold},
                 {"report_dir", eval.report_dir},
                 {"checkpoint", eval.checkpoint}};

    j["explain"] = {{"image", explain.image},
                    {"checkpoint", explain.checkpoint},
                    {"layer", explain.layer},
                    {"target_class", explain.target_class},
                    {"alpha", explain.alpha},
                    {"heatmap_out", explain.heatmap_out},
                    {"overlay_out", explain.overlay_out}};

    return j.dump(2);
}

} // namespace tlbench
