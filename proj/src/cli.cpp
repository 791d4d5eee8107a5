#include "tlbench/cli.hpp"

#include "tlbench/balance.hpp"
#include "tlbench/gradcam.hpp"
#include "tlbench/manifest_io.hpp"
#include "tlbench/plot.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace tlbench {

using nlohmann::json;

namespace {

std::string curated_dir(const RunConfig& config) {
    return (fs::path(config.out_dir) / "curated").string();
}

DatasetManifest load_required_manifest(const std::string& path, const std::string& producer) {
    if (!fs::exists(path))
        throw MissingArtifactError(
            fmt::format("required manifest '{}' is missing; run `tlbench {}` first", path,
                        producer));
    return load_manifest(path);
}

std::string staging_dir(const RunConfig& config) {
    if (const char* env = std::getenv("TLBENCH_STAGING_DIR"); env && *env) return env;
    return config.pipeline.balancing.staging_dir;
}

std::vector<std::string> class_names_for(int num_classes) {
    if (num_classes == 2) return {"normal", "covid"}; // covid is the positive class (index 1)
    return {"covid", "normal", "other_pneumonia"};
}

} // namespace

SynthResult cmd_synth(const RunConfig& config) {
    SynthResult result = generate_synth_corpus(config.synth);
    std::cout << fmt::format("synth: wrote {} images ({} opacity / {} noise) under {}\n",
                             config.synth.count, result.class_a, result.class_b,
                             config.synth.out_dir);
    return result;
}

CurateOutputs cmd_curate(const RunConfig& config) {
    if (config.data.manifest.empty())
        throw ConfigError("data.manifest must point at a manifest CSV");
    DatasetManifest manifest = load_required_manifest(config.data.manifest, "synth");

    CurationLog log;
    manifest = impute_age(manifest, config.data.impute_strategy, &log);
    manifest = impute_sex(manifest, &log);
    manifest = assign_age_groups(manifest, &log);
    manifest = drop_low_sample_countries(manifest, config.data.min_country_samples, &log);
    manifest = undersample(manifest, config.data.country_caps,
                           derive_seed(config.seed, "undersample"), &log);
    SplitResult split = stratified_split(manifest, config.data.split, &log);

    const std::string dir = curated_dir(config);
    fs::create_directories(dir);
    CurateOutputs out;
    out.curated_manifest = (fs::path(dir) / "curated.csv").string();
    out.train_manifest = (fs::path(dir) / "train.csv").string();
    out.val_manifest = (fs::path(dir) / "val.csv").string();
    out.test_manifest = (fs::path(dir) / "test.csv").string();
    out.log_path = (fs::path(dir) / "curation.log").string();
    save_manifest(manifest, out.curated_manifest);
    save_manifest(split.train, out.train_manifest);
    save_manifest(split.val, out.val_manifest);
    save_manifest(split.test, out.test_manifest);
    log.write(out.log_path);
    out.train_size = split.train.size();
    out.val_size = split.val.size();
    out.test_size = split.test.size();
    std::cout << fmt::format("curate: {} records -> splits {}/{}/{} under {}\n", manifest.size(),
                             out.train_size, out.val_size, out.test_size, dir);
    for (const auto& w : split.warnings) std::cout << "curate: warning: " << w << "\n";
    return out;
}

namespace {

struct LoadedSplits {
    DatasetManifest train;
    DatasetManifest val;
};

LoadedSplits load_train_val(const RunConfig& config, CurationLog* log) {
    const std::string dir = curated_dir(config);
    LoadedSplits splits;
    splits.train = load_required_manifest((fs::path(dir) / "train.csv").string(), "curate");
    splits.val = load_required_manifest((fs::path(dir) / "val.csv").string(), "curate");

    // Materialize the balancing plan on the training split when targets are set.
    if (!config.pipeline.balancing.targets.empty()) {
        BalancingPlan plan =
            plan_balancing(splits.train, config.pipeline.balancing.targets,
                           config.pipeline.balancing.allow_downsampling);
        ExecutePlanOptions options;
        options.image_root = config.data.image_root;
        options.staging_dir = staging_dir(config);
        options.seed = derive_seed(config.seed, "balance");
        splits.train = execute_plan(splits.train, plan, config.pipeline.augmentation, options,
                                    log);
    }
    return splits;
}

TrialOutcome run_training_trial(const RunConfig& config, const LoadedSplits& splits,
                                const TrialConfig& trial, int budget_epochs, std::uint64_t seed,
                                const std::string& checkpoint_dir) {
    ModelSpec spec = config.model.spec;
    spec.head.dropout_rate = trial.dropout_rate;
    spec.head.dense_units = trial.dense_units;
    spec.freeze_rate = trial.freeze_rate;
    OptimizerSpec opt_spec{trial.optimizer, trial.learning_rate, trial.weight_decay};

    auto model = build_model(spec, seed);
    auto loss = build_loss(spec.head.num_classes);
    auto optimizer = build_optimizer(opt_spec);

    ImageDataset train_data(splits.train, config.data.image_root, spec.input,
                            spec.head.num_classes, config.pipeline.batching.cache);
    ImageDataset val_data(splits.val, config.data.image_root, spec.input, spec.head.num_classes,
                          config.pipeline.batching.cache);

    TrainConfig tc = config.train;
    tc.max_epochs = budget_epochs;
    tc.checkpoint_dir = checkpoint_dir;
    tc.seed = seed;

    TrainOutcome outcome =
        train(*model, spec, *loss, *optimizer, train_data, val_data, config.pipeline.batching, tc);
    TrialOutcome result;
    result.epochs_run = static_cast<int>(outcome.history.rows.size());
    double best_acc = 0.0;
    for (const auto& row : outcome.history.rows) best_acc = std::max(best_acc, row.val_acc);
    result.objective = best_acc;
    return result;
}

} // namespace

TrainOutputs cmd_train(const RunConfig& config) {
    CurationLog log;
    LoadedSplits splits = load_train_val(config, &log);

    auto model = build_model(config.model.spec, config.train.seed);
    auto loss = build_loss(config.model.spec.head.num_classes);
    auto optimizer = build_optimizer(config.model.optimizer);

    ImageDataset train_data(splits.train, config.data.image_root, config.model.spec.input,
                            config.model.spec.head.num_classes, config.pipeline.batching.cache);
    ImageDataset val_data(splits.val, config.data.image_root, config.model.spec.input,
                          config.model.spec.head.num_classes, config.pipeline.batching.cache);

    BatchStream stream = make_batches(train_data.manifest(), config.pipeline.batching, true);
    std::cout << "train: " << stream.summary() << "\n";
    for (const auto& line : log.lines()) std::cout << "train: " << line << "\n";

    TrainOutcome outcome = train(*model, config.model.spec, *loss, *optimizer, train_data,
                                 val_data, config.pipeline.batching, config.train);

    TrainOutputs out;
    out.checkpoint_dir = config.train.checkpoint_dir;
    out.best_epoch = outcome.best_epoch;
    out.history = outcome.history;
    out.best_checkpoint = (fs::path(config.train.checkpoint_dir) / "ckpt_best").string();
    fs::copy_file(outcome.best_checkpoint, out.best_checkpoint,
                  fs::copy_options::overwrite_existing);
    out.history_csv = (fs::path(config.out_dir) / "history.csv").string();
    outcome.history.write_csv(out.history_csv);
    out.accuracy_png = (fs::path(config.out_dir) / "curves_accuracy.png").string();
    out.loss_png = (fs::path(config.out_dir) / "curves_loss.png").string();
    render_history_curves(outcome.history, "accuracy", out.accuracy_png);
    render_history_curves(outcome.history, "loss", out.loss_png);
    out.provenance = out.best_checkpoint + ".provenance.json";
    write_provenance(out.provenance, config.model.spec, config.model.optimizer,
                     config.train.seed);
    std::cout << fmt::format("train: {} epochs, best epoch {} (val loss {:.6f}); best "
                             "checkpoint {}\n",
                             outcome.history.rows.size(), outcome.best_epoch,
                             outcome.best_val_loss, out.best_checkpoint);
    return out;
}

TuneOutputs cmd_tune(const RunConfig& config) {
    LoadedSplits splits = load_train_val(config, nullptr);
    const auto schedule = hyperband_schedule(config.tune.max_epochs, config.tune.eta);

    fs::create_directories(config.tune.dir);
    TrialRunner runner = [&](const TrialConfig& trial, int budget, std::uint64_t seed) {
        const std::string trial_dir =
            (fs::path(config.tune.dir) / fmt::format("trial_{:016x}", seed)).string();
        return run_training_trial(config, splits, trial, budget, seed, trial_dir);
    };

    SearchOptions options;
    options.seed = derive_seed(config.seed, "tune");
    options.log_dir = config.tune.dir;
    options.workers = config.tune.workers;
    SearchResult result = run_search(config.tune.space, runner, schedule, options);

    TuneOutputs out;
    out.dir = config.tune.dir;
    out.best = result.best;
    out.best_objective = result.best_objective;
    out.executed_trials = result.trials.size();
    out.best_json = (fs::path(config.tune.dir) / "best.json").string();
    std::ofstream best(out.best_json);
    if (!best) throw IoError("cannot write " + out.best_json);
    json j = json::parse(result.best.to_json());
    j["objective"] = result.best_objective;
    j["trial_id"] = result.best_trial_id;
    best << j.dump(2) << "\n";
    std::cout << fmt::format("tune: {} rung executions; best objective {:.4f} from trial {}\n",
                             out.executed_trials, out.best_objective, result.best_trial_id);
    return out;
}

EvalOutputs cmd_evaluate(const RunConfig& config) {
    std::string ckpt_path = config.eval.checkpoint;
    if (ckpt_path.empty())
        ckpt_path = (fs::path(config.train.checkpoint_dir) / "ckpt_best").string();
    if (!fs::exists(ckpt_path))
        throw MissingArtifactError(fmt::format(
            "checkpoint '{}' is missing; run `tlbench train` first", ckpt_path));

    const std::string test_path = (fs::path(curated_dir(config)) / "test.csv").string();
    DatasetManifest test_manifest = load_required_manifest(test_path, "curate");
    if (test_manifest.empty())
        throw EmptyDatasetError("test split is empty; curate with a nonzero test fraction");

    Checkpoint ckpt = load_checkpoint(ckpt_path, config.train.seed);
    const int num_classes = ckpt.spec.head.num_classes;
    ImageDataset test_data(test_manifest, config.data.image_root, ckpt.spec.input, num_classes,
                           config.pipeline.batching.cache);
    auto loss = build_loss(num_classes);
    EvalPass pass = evaluate_pass(*ckpt.model, *loss, test_data,
                                  config.pipeline.batching.batch_size, config.eval.threshold);

    EvalOutputs out;
    out.report.model_name = config.model.name;
    out.report.threshold = config.eval.threshold;
    out.report.seed = config.seed;
    out.report.class_names = class_names_for(num_classes);
    out.report.confusion = confusion(pass.labels, pass.predictions, num_classes);
    out.report.metrics = scalar_metrics(out.report.confusion, averaging_mode(num_classes));
    if (num_classes == 2) {
        try {
            out.report.roc = roc_and_auc(pass.labels, pass.scores);
            out.report.metrics.auc = out.report.roc->auc;
        } catch (const UndefinedMetricError& e) {
            out.report.warnings.push_back(e.what());
        }
    } else if (pass.auc) {
        out.report.metrics.auc = pass.auc;
    }
    json prov;
    prov["config"] = json::parse(config.to_json_text());
    prov["checkpoint"] = ckpt_path;
    prov["model_spec"] = json::parse(model_spec_to_json(ckpt.spec));
    out.report.provenance_json = prov.dump();

    out.report_dir = (fs::path(config.eval.report_dir) / config.model.name).string();
    write_report_dir(out.report, out.report_dir);
    std::cout << fmt::format(
        "evaluate: {} test records; accuracy {:.5f}, auc {}; report in {}\n",
        test_manifest.size(), out.report.metrics.accuracy,
        out.report.metrics.auc ? fmt::format("{:.5f}", *out.report.metrics.auc) : "n/a",
        out.report_dir);
    return out;
}

ExplainOutputs cmd_explain(const RunConfig& config) {
    if (config.explain.image.empty())
        throw ConfigError("explain.image must point at an input image");
    std::string ckpt_path = config.explain.checkpoint;
    if (ckpt_path.empty())
        ckpt_path = (fs::path(config.train.checkpoint_dir) / "ckpt_best").string();
    if (!fs::exists(ckpt_path))
        throw MissingArtifactError(fmt::format(
            "checkpoint '{}' is missing; run `tlbench train` first", ckpt_path));
    if (!fs::exists(config.explain.image))
        throw MissingArtifactError("input image not found: " + config.explain.image);

    Checkpoint ckpt = load_checkpoint(ckpt_path, config.train.seed);
    ImageTensor image = decode_and_preprocess(config.explain.image, ckpt.spec.input.h,
                                              ckpt.spec.input.w);
    Heatmap heat = grad_cam(*ckpt.model, image, config.explain.target_class,
                            config.explain.layer);

    ExplainOutputs out;
    out.zero_gradient = heat.zero_gradient;
    out.heatmap_png = config.explain.heatmap_out;
    out.overlay_png = config.explain.overlay_out;
    fs::create_directories(fs::path(out.heatmap_png).parent_path());
    fs::create_directories(fs::path(out.overlay_png).parent_path());
    write_heatmap_png(heat, out.heatmap_png);
    overlay(image, heat, config.explain.alpha, out.overlay_png);
    std::cout << fmt::format("explain: wrote {} and {}{}\n", out.heatmap_png, out.overlay_png,
                             heat.zero_gradient ? " (zero-gradient map)" : "");
    return out;
}

ReportOutputs cmd_report(const RunConfig& config) {
    const fs::path dir(config.eval.report_dir);
    std::vector<LeaderboardRow> rows;
    if (fs::exists(dir)) {
        std::vector<fs::path> metric_files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            const fs::path metrics_path = entry.path() / "metrics.json";
            if (entry.is_directory() && fs::exists(metrics_path))
                metric_files.push_back(metrics_path);
        }
        std::sort(metric_files.begin(), metric_files.end());
        for (const auto& path : metric_files)
            rows.push_back(leaderboard_row(read_metrics_json(path.string())));
    }
    if (rows.empty())
        throw MissingArtifactError(fmt::format(
            "no reports found under '{}'; run `tlbench evaluate` first", dir.string()));

    std::sort(rows.begin(), rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
        if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
        return a.model < b.model;
    });

    ReportOutputs out;
    out.rows = rows;
    out.leaderboard_csv = (dir / "leaderboard.csv").string();
    out.summary_md = (dir / "summary.md").string();
    write_leaderboard_csv(rows, out.leaderboard_csv);
    std::ofstream md(out.summary_md);
    if (!md) throw IoError("cannot write " + out.summary_md);
    md << render_summary_markdown(rows);
    std::cout << fmt::format("report: {} models -> {}\n", rows.size(), out.leaderboard_csv);
    return out;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"transfer-learning benchmark harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> out_override;
    std::uint64_t seed_value = 0;
    std::string out_value;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--seed", seed_value, "override the top-level seed")
            ->each([&](const std::string&) { seed_override = seed_value; });
        cmd->add_option("--out", out_value, "override the output directory")
            ->each([&](const std::string&) { out_override = out_value; });
        return cmd;
    };

    auto* synth = add_common(app.add_subcommand("synth", "generate the synthetic corpus"));
    auto* curate = add_common(app.add_subcommand("curate", "impute, filter, split"));
    auto* train_cmd = add_common(app.add_subcommand("train", "fine-tune the configured model"));
    auto* tune = add_common(app.add_subcommand("tune", "Hyperband search"));
    auto* evaluate = add_common(app.add_subcommand("evaluate", "score a checkpoint"));
    auto* explain = add_common(app.add_subcommand("explain", "Grad-CAM heatmap + overlay"));
    auto* report = add_common(app.add_subcommand("report", "aggregate the leaderboard"));

    std::string explain_image, explain_ckpt, explain_layer, heatmap_out, overlay_out;
    explain->add_option("--image", explain_image, "input image path");
    explain->add_option("--checkpoint", explain_ckpt, "checkpoint path");
    explain->add_option("--layer", explain_layer, "feature layer name");
    explain->add_option("--heatmap-out", heatmap_out, "heatmap PNG path");
    explain->add_option("--overlay-out", overlay_out, "overlay PNG path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig config = RunConfig::from_file(config_path, seed_override, out_override);
        set_global_seed(config.seed);
        if (synth->parsed()) cmd_synth(config);
        if (curate->parsed()) cmd_curate(config);
        if (train_cmd->parsed()) cmd_train(config);
        if (tune->parsed()) cmd_tune(config);
        if (evaluate->parsed()) cmd_evaluate(config);
        if (explain->parsed()) {
            if (!explain_image.empty()) config.explain.image = explain_image;
            if (!explain_ckpt.empty()) config.explain.checkpoint = explain_ckpt;
            if (!explain_layer.empty()) config.explain.layer = explain_layer;
            if (!heatmap_out.empty()) config.explain.heatmap_out = heatmap_out;
            if (!overlay_out.empty()) config.explain.overlay_out = overlay_out;
            cmd_explain(config);
        }
        if (report->parsed()) cmd_report(config);
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace tlbench
