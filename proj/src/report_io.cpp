#include "tlbench/report_io.hpp"

#include "tlbench/plot.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace tlbench {

using nlohmann::json;

void write_report_dir(const EvalReport& report, const std::string& dir) {
    fs::create_directories(dir);

    json j;
    j["model"] = report.model_name;
    j["threshold"] = report.threshold;
    j["seed"] = report.seed;
    j["averaging"] = to_string(report.metrics.averaging);
    j["accuracy"] = report.metrics.accuracy;
    j["precision"] = report.metrics.precision;
    j["recall"] = report.metrics.recall;
    j["f1"] = report.metrics.f1;
    if (report.metrics.auc) j["auc"] = *report.metrics.auc;
    else j["auc"] = nullptr;
    j["degenerate"] = report.metrics.degenerate;
    j["class_names"] = report.class_names;

    const int k = report.confusion.num_classes();
    json cm = json::array();
    for (int i = 0; i < k; ++i) {
        json row = json::array();
        for (int c = 0; c < k; ++c) row.push_back(report.confusion.at(i, c));
        cm.push_back(row);
    }
    j["confusion"] = cm;

    json per_class = json::array();
    for (const auto& c : report.metrics.per_class)
        per_class.push_back({{"class", c.class_index},
                             {"precision", c.precision},
                             {"recall", c.recall},
                             {"f1", c.f1},
                             {"support", c.support},
                             {"degenerate", c.degenerate}});
    j["per_class"] = per_class;

    if (report.roc)
        j["roc"] = {{"fpr", report.roc->fpr}, {"tpr", report.roc->tpr}};
    j["warnings"] = report.warnings;
    j["provenance"] = json::parse(report.provenance_json);

    std::ofstream out(fs::path(dir) / "metrics.json");
    if (!out) throw IoError("cannot write metrics.json in " + dir);
    out << j.dump(2) << "\n";

    std::ofstream txt(fs::path(dir) / "report.txt");
    if (!txt) throw IoError("cannot write report.txt in " + dir);
    txt << format_classification_report(report.metrics, report.class_names);
    for (const auto& w : report.warnings) txt << "warning: " << w << "\n";

    render_confusion_png(report.confusion, report.class_names,
                         (fs::path(dir) / "confusion.png").string());
    if (report.roc) render_roc_png(*report.roc, (fs::path(dir) / "roc.png").string());
}

EvalReport read_metrics_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("metrics file not found: " + path);
    json j = json::parse(in);

    EvalReport report;
    report.model_name = j.at("model").get<std::string>();
    report.threshold = j.at("threshold").get<double>();
    report.seed = j.at("seed").get<std::uint64_t>();
    report.class_names = j.at("class_names").get<std::vector<std::string>>();

    const auto& cm = j.at("confusion");
    const int k = static_cast<int>(cm.size());
    report.confusion = ConfusionMatrix(k);
    for (int i = 0; i < k; ++i)
        for (int c = 0; c < k; ++c) report.confusion.at(i, c) = cm.at(i).at(c).get<std::int64_t>();

    report.metrics.averaging =
        j.at("averaging").get<std::string>() == "binary" ? Averaging::binary : Averaging::macro;
    report.metrics.accuracy = j.at("accuracy").get<double>();
    report.metrics.precision = j.at("precision").get<double>();
    report.metrics.recall = j.at("recall").get<double>();
    report.metrics.f1 = j.at("f1").get<double>();
    if (!j.at("auc").is_null()) report.metrics.auc = j.at("auc").get<double>();
    report.metrics.degenerate = j.at("degenerate").get<bool>();
    for (const auto& c : j.at("per_class")) {
        PerClassMetrics m;
        m.class_index = c.at("class").get<int>();
        m.precision = c.at("precision").get<double>();
        m.recall = c.at("recall").get<double>();
        m.f1 = c.at("f1").get<double>();
        m.support = c.at("support").get<std::int64_t>();
        m.degenerate = c.at("degenerate").get<bool>();
        report.metrics.per_class.push_back(m);
    }
    if (j.contains("roc") && !j.at("roc").is_null()) {
        RocCurve roc;
        roc.fpr = j.at("roc").at("fpr").get<std::vector<double>>();
        roc.tpr = j.at("roc").at("tpr").get<std::vector<double>>();
        roc.auc = report.metrics.auc.value_or(0.0);
        report.roc = std::move(roc);
    }
    report.warnings = j.at("warnings").get<std::vector<std::string>>();
    report.provenance_json = j.at("provenance").dump();
    return report;
}

LeaderboardRow leaderboard_row(const EvalReport& report) {
    LeaderboardRow row;
    row.model = report.model_name;
    row.accuracy = report.metrics.accuracy;
    row.precision = report.metrics.precision;
    row.recall = report.metrics.recall;
    row.f1 = report.metrics.f1;
    row.auc = report.metrics.auc.value_or(0.0);
    return row;
}

void write_leaderboard_csv(const std::vector<LeaderboardRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write leaderboard: " + path);
    out << format_leaderboard_csv(rows);
}

std::string render_summary_markdown(const std::vector<LeaderboardRow>& rows) {
    std::string out = "# Model leaderboard\n\n";
    out += "| Model | Accuracy | Precision | Recall | F1 | AUC |\n";
    out += "|---|---|---|---|---|---|\n";
    for (const auto& r : rows)
        out += fmt::format("| {} | {:.5f} | {:.5f} | {:.5f} | {:.5f} | {:.5f} |\n", r.model,
                           r.accuracy, r.precision, r.recall, r.f1, r.auc);
    return out;
}

} // namespace tlbench
