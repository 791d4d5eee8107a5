#pragma once

#include "tlbench/metrics.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tlbench {

/// Everything one evaluation produces, with provenance for reproduction.
struct EvalReport {
    std::string model_name;
    MetricReport metrics;
    ConfusionMatrix confusion{2};
    std::optional<RocCurve> roc;
    double threshold = 0.5;
    std::uint64_t seed = 42;
    std::vector<std::string> class_names;
    std::string provenance_json = "{}";
    std::vector<std::string> warnings;
};

/// Writes metrics.json, report.txt, confusion.png and (when present) roc.png.
void write_report_dir(const EvalReport& report, const std::string& dir);

/// Structured form round-trips losslessly through metrics.json.
EvalReport read_metrics_json(const std::string& path);

LeaderboardRow leaderboard_row(const EvalReport& report);

void write_leaderboard_csv(const std::vector<LeaderboardRow>& rows, const std::string& path);

std::string render_summary_markdown(const std::vector<LeaderboardRow>& rows);

} // namespace tlbench
