#include "tlbench/batching.hpp"
#include "tlbench/cli.hpp"
#include "tlbench/config.hpp"
#include "tlbench/curation.hpp"
#include "tlbench/manifest_io.hpp"
#include "tlbench/metrics.hpp"
#include "tlbench/modelzoo.hpp"
#include "tlbench/synth.hpp"
#include "tlbench/tuner.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace tlbench;

namespace {

py::dict counts_to_dict(const ManifestCounts& counts) {
    py::dict by_label, by_country, by_age_group;
    for (const auto& [label, n] : counts.by_label) by_label[to_string(label).c_str()] = n;
    for (const auto& [country, n] : counts.by_country) by_country[country.c_str()] = n;
    for (const auto& [group, n] : counts.by_age_group) by_age_group[to_string(group).c_str()] = n;
    py::dict d;
    d["total"] = counts.total;
    d["by_label"] = by_label;
    d["by_country"] = by_country;
    d["by_age_group"] = by_age_group;
    d["missing_age"] = counts.missing_age;
    d["missing_sex"] = counts.missing_sex;
    return d;
}

py::dict report_to_dict(const MetricReport& report) {
    py::dict d;
    d["accuracy"] = report.accuracy;
    d["precision"] = report.precision;
    d["recall"] = report.recall;
    d["f1"] = report.f1;
    d["averaging"] = to_string(report.averaging);
    d["degenerate"] = report.degenerate;
    if (report.auc) d["auc"] = *report.auc;
    py::list per_class;
    for (const auto& c : report.per_class) {
        py::dict pc;
        pc["class"] = c.class_index;
        pc["precision"] = c.precision;
        pc["recall"] = c.recall;
        pc["f1"] = c.f1;
        pc["support"] = c.support;
        per_class.append(pc);
    }
    d["per_class"] = per_class;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "transfer-learning benchmark harness (C++ core)";

    py::register_exception<Error>(m, "TlbenchError");

    m.def("steps_per_epoch", &steps_per_epoch, py::arg("n"), py::arg("batch_size"));
    m.def("num_freeze_layers", &num_freeze_layers, py::arg("layer_count"),
          py::arg("freeze_rate"));
    m.def(
        "age_group", [](double age) { return to_string(age_group_for(age)); }, py::arg("age"));

    m.def(
        "manifest_summary",
        [](const std::string& path) { return counts_to_dict(load_manifest(path).counts()); },
        py::arg("path"), "Load a manifest CSV and return its tallies.");

    m.def(
        "confusion_metrics",
        [](const std::vector<int>& y_true, const std::vector<int>& y_pred, int num_classes) {
            ConfusionMatrix cm = confusion(y_true, y_pred, num_classes);
            return report_to_dict(scalar_metrics(cm, averaging_mode(num_classes)));
        },
        py::arg("y_true"), py::arg("y_pred"), py::arg("num_classes") = 2);

    m.def(
        "binary_confusion_metrics",
        [](std::int64_t tp, std::int64_t tn, std::int64_t fp, std::int64_t fn) {
            ConfusionMatrix cm = ConfusionMatrix::binary(tp, tn, fp, fn);
            return report_to_dict(scalar_metrics(cm, Averaging::binary));
        },
        py::arg("tp"), py::arg("tn"), py::arg("fp"), py::arg("fn"));

    m.def(
        "roc_auc",
        [](const std::vector<int>& y_true, const std::vector<double>& scores) {
            RocCurve curve = roc_and_auc(y_true, scores);
            py::dict d;
            d["fpr"] = curve.fpr;
            d["tpr"] = curve.tpr;
            d["auc"] = curve.auc;
            return d;
        },
        py::arg("y_true"), py::arg("scores"));

    m.def(
        "predict_labels", [](const std::vector<double>& scores,
                             double threshold) { return predict_labels_binary(scores, threshold); },
        py::arg("scores"), py::arg("threshold") = 0.5);

    m.def(
        "hyperband_schedule",
        [](int max_epochs, int eta) {
            py::list brackets;
            for (const auto& bracket : hyperband_schedule(max_epochs, eta)) {
                py::dict b;
                b["s"] = bracket.s;
                py::list rungs;
                for (const auto& rung : bracket.rungs) {
                    py::dict r;
                    r["configs"] = rung.configs;
                    r["epochs"] = rung.epochs;
                    rungs.append(r);
                }
                b["rungs"] = rungs;
                brackets.append(b);
            }
            return brackets;
        },
        py::arg("max_epochs") = 30, py::arg("eta") = 3);

    m.def(
        "generate_synth_corpus",
        [](const std::string& out_dir, std::size_t count, int image_size, double class_a_fraction,
           std::uint64_t seed) {
            SynthConfig config;
            config.out_dir = out_dir;
            config.count = count;
            config.image_size = image_size;
            config.class_a_fraction = class_a_fraction;
            config.seed = seed;
            SynthResult r = generate_synth_corpus(config);
            py::dict d;
            d["manifest"] = r.manifest_path;
            d["geometry"] = r.geometry_path;
            d["class_a"] = r.class_a;
            d["class_b"] = r.class_b;
            return d;
        },
        py::arg("out_dir"), py::arg("count") = 2000, py::arg("image_size") = 64,
        py::arg("class_a_fraction") = 0.55, py::arg("seed") = 7);

    m.def("backbone_names", [] {
        std::vector<std::string> names;
        for (const auto& info : backbone_registry()) names.push_back(info.name);
        return names;
    });
    m.def(
        "backbone_layer_count",
        [](const std::string& name) { return backbone_info(name).layer_count; },
        py::arg("name"));

    m.def("reference_leaderboard_csv", [] { return format_leaderboard_csv(reference_results()); });

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::vector<const char*> argv;
            argv.push_back("tlbench");
            for (const auto& a : args) argv.push_back(a.c_str());
            return run_cli(static_cast<int>(argv.size()), argv.data());
        },
        py::arg("args"), "Invoke the CLI in-process; returns the exit code.");
}
