#pragma once

#include "tlbench/config.hpp"
#include "tlbench/report_io.hpp"
#include "tlbench/synth.hpp"
#include "tlbench/tuner.hpp"

#include <string>
#include <vector>

namespace tlbench {

struct CurateOutputs {
    std::string curated_manifest;
    std::string train_manifest;
    std::string val_manifest;
    std::string test_manifest;
    std::string log_path;
    std::size_t train_size = 0, val_size = 0, test_size = 0;
};

struct TrainOutputs {
    std::string checkpoint_dir;
    std::string best_checkpoint;
    std::string history_csv;
    std::string accuracy_png;
    std::string loss_png;
    std::string provenance;
    TrainingHistory history;
    int best_epoch = 0;
};

struct TuneOutputs {
    std::string dir;
    std::string best_json;
    TrialConfig best;
    double best_objective = 0.0;
    std::size_t executed_trials = 0;
};

struct EvalOutputs {
    std::string report_dir;
    EvalReport report;
};

struct ExplainOutputs {
    std::string heatmap_png;
    std::string overlay_png;
    bool zero_gradient = false;
};

struct ReportOutputs {
    std::string leaderboard_csv;
    std::string summary_md;
    std::vector<LeaderboardRow> rows;
};

SynthResult cmd_synth(const RunConfig& config);
CurateOutputs cmd_curate(const RunConfig& config);
TrainOutputs cmd_train(const RunConfig& config);
TuneOutputs cmd_tune(const RunConfig& config);
EvalOutputs cmd_evaluate(const RunConfig& config);
ExplainOutputs cmd_explain(const RunConfig& config);
ReportOutputs cmd_report(const RunConfig& config);

/// Entry point behind main(): parses
///   tlbench <curate|synth|train|tune|evaluate|explain|report> --config <path>
///           [--seed N] [--out DIR] ...
/// Exit codes: 0 success, 1 domain error, 2 usage error.
int run_cli(int argc, const char* const* argv);

} // namespace tlbench
