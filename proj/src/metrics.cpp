#include "tlbench/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tlbench {

std::string to_string(Averaging a) { return a == Averaging::binary ? "binary" : "macro"; }

Averaging averaging_mode(int num_classes) {
    if (num_classes < 2) throw ConfigError("averaging_mode requires at least 2 classes");
    return num_classes == 2 ? Averaging::binary : Averaging::macro;
}

ConfusionMatrix::ConfusionMatrix(int num_classes) : k_(num_classes) {
    if (num_classes < 2) throw ConfigError("confusion matrix needs at least 2 classes");
    cells_.assign(static_cast<std::size_t>(k_) * k_, 0);
}

ConfusionMatrix ConfusionMatrix::binary(std::int64_t tp, std::int64_t tn, std::int64_t fp,
                                        std::int64_t fn) {
    ConfusionMatrix cm(2);
    cm.at(1, 1) = tp;
    cm.at(0, 0) = tn;
    cm.at(0, 1) = fp;
    cm.at(1, 0) = fn;
    return cm;
}

std::int64_t ConfusionMatrix::at(int t, int p) const {
    if (t < 0 || t >= k_ || p < 0 || p >= k_) throw RangeError("confusion index out of range");
    return cells_[static_cast<std::size_t>(t) * k_ + p];
}

std::int64_t& ConfusionMatrix::at(int t, int p) {
    if (t < 0 || t >= k_ || p < 0 || p >= k_) throw RangeError("confusion index out of range");
    return cells_[static_cast<std::size_t>(t) * k_ + p];
}

std::int64_t ConfusionMatrix::total() const {
    return std::accumulate(cells_.begin(), cells_.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::trace() const {
    std::int64_t sum = 0;
    for (int i = 0; i < k_; ++i) sum += at(i, i);
    return sum;
}

std::int64_t ConfusionMatrix::at2(int t, int p) const {
    if (k_ != 2) throw ShapeError("binary aliases require a 2x2 confusion matrix");
    return at(t, p);
}

ConfusionMatrix confusion(const std::vector<int>& true_labels,
                          const std::vector<int>& predicted_labels, int num_classes) {
    if (true_labels.size() != predicted_labels.size())
        throw ShapeError(fmt::format("label lists differ in length: {} vs {}", true_labels.size(),
                                     predicted_labels.size()));
    ConfusionMatrix cm(num_classes);
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
        int t = true_labels[i];
        int p = predicted_labels[i];
        if (t < 0 || t >= num_classes)
            throw RangeError(fmt::format("true label {} out of [0,{})", t, num_classes));
        if (p < 0 || p >= num_classes)
            throw RangeError(fmt::format("predicted label {} out of [0,{})", p, num_classes));
        ++cm.at(t, p);
    }
    return cm;
}

std::vector<int> predict_labels_binary(const std::vector<double>& scores, double threshold) {
    std::vector<int> labels;
    labels.reserve(scores.size());
    for (double s : scores) {
        if (!(s >= 0.0 && s <= 1.0))
            throw ShapeError(fmt::format("binary score {} outside [0,1]", s));
        labels.push_back(s >= threshold ? 1 : 0);
    }
    return labels;
}

std::vector<int> predict_labels_multiclass(const std::vector<std::vector<double>>& scores,
                                           int num_classes) {
    std::vector<int> labels;
    labels.reserve(scores.size());
    for (const auto& row : scores) {
        if (static_cast<int>(row.size()) != num_classes)
            throw ShapeError(fmt::format("score row has {} entries, expected {}", row.size(),
                                         num_classes));
        double sum = std::accumulate(row.begin(), row.end(), 0.0);
        if (std::abs(sum - 1.0) > 1e-4)
            throw ShapeError(fmt::format("score row sums to {}, expected 1", sum));
        int best = 0;
        for (int k = 1; k < num_classes; ++k)
            if (row[k] > row[best]) best = k; // strict: lowest index wins ties
        labels.push_back(best);
    }
    return labels;
}

namespace {

PerClassMetrics per_class_metrics(const ConfusionMatrix& cm, int cls) {
    PerClassMetrics m;
    m.class_index = cls;
    std::int64_t tp = cm.at(cls, cls);
    std::int64_t fp = 0, fn = 0;
    for (int i = 0; i < cm.num_classes(); ++i) {
        if (i == cls) continue;
        fp += cm.at(i, cls);
        fn += cm.at(cls, i);
    }
    m.support = tp + fn;
    if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    else m.degenerate = true;
    if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    else m.degenerate = true;
    if (m.precision + m.recall > 0.0)
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    else m.degenerate = true;
    return m;
}

} // namespace

MetricReport scalar_metrics(const ConfusionMatrix& cm, Averaging averaging) {
    if (cm.total() <= 0) throw EmptyDatasetError("scalar_metrics over an empty confusion matrix");
    MetricReport report;
    report.averaging = averaging;
    report.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
    for (int cls = 0; cls < cm.num_classes(); ++cls) {
        report.per_class.push_back(per_class_metrics(cm, cls));
        report.degenerate = report.degenerate || report.per_class.back().degenerate;
    }
    if (averaging == Averaging::binary) {
        if (cm.num_classes() != 2) throw ShapeError("binary averaging requires 2 classes");
        const auto& pos = report.per_class[1];
        report.precision = pos.precision;
        report.recall = pos.recall;
        report.f1 = pos.f1;
    } else {
        double p = 0.0, r = 0.0, f = 0.0;
        for (const auto& c : report.per_class) {
            p += c.precision;
            r += c.recall;
            f += c.f1;
        }
        const double k = static_cast<double>(cm.num_classes());
        report.precision = p / k;
        report.recall = r / k;
        report.f1 = f / k;
    }
    return report;
}

RocCurve roc_and_auc(const std::vector<int>& true_labels, const std::vector<double>& scores) {
    if (true_labels.size() != scores.size())
        throw ShapeError("roc_and_auc: labels and scores differ in length");
    std::int64_t positives = 0, negatives = 0;
    for (int y : true_labels) {
        if (y == 1) ++positives;
        else if (y == 0) ++negatives;
        else throw RangeError("roc_and_auc expects binary labels in {0,1}");
    }
    if (positives == 0 || negatives == 0)
        throw UndefinedMetricError("roc_and_auc undefined with a single class present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.fpr.push_back(0.0);
    curve.tpr.push_back(0.0);
    curve.thresholds.push_back(std::numeric_limits<double>::infinity());

    const double np = static_cast<double>(positives);
    const double nn = static_cast<double>(negatives);
    std::int64_t tp = 0, fp = 0;
    double auc = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        // One curve point per distinct score: ties move diagonally, which is
        // exactly the half credit the rank statistic assigns them.
        const double threshold = scores[order[i]];
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == threshold) {
            if (true_labels[order[j]] == 1) ++tp;
            else ++fp;
            ++j;
        }
        double prev_fpr = curve.fpr.back();
        double prev_tpr = curve.tpr.back();
        double cur_fpr = static_cast<double>(fp) / nn;
        double cur_tpr = static_cast<double>(tp) / np;
        auc += (cur_fpr - prev_fpr) * (cur_tpr + prev_tpr) * 0.5;
        curve.fpr.push_back(cur_fpr);
        curve.tpr.push_back(cur_tpr);
        curve.thresholds.push_back(threshold);
        i = j;
    }
    curve.auc = auc;
    return curve;
}

std::string format_classification_report(const MetricReport& report,
                                         const std::vector<std::string>& class_names) {
    if (class_names.size() != report.per_class.size())
        throw ShapeError("class name count does not match per-class metrics");
    std::size_t width = 12;
    for (const auto& name : class_names) width = std::max(width, name.size() + 2);

    std::string out = fmt::format("{:>{}}  {:>9}  {:>9}  {:>9}  {:>9}\n", "", width, "precision",
                                  "recall", "f1-score", "support");
    std::int64_t total_support = 0;
    for (std::size_t i = 0; i < report.per_class.size(); ++i) {
        const auto& c = report.per_class[i];
        total_support += c.support;
        out += fmt::format("{:>{}}  {:>9.4f}  {:>9.4f}  {:>9.4f}  {:>9}\n", class_names[i], width,
                           c.precision, c.recall, c.f1, c.support);
    }
    out += "\n";
    out += fmt::format("{:>{}}  {:>9}  {:>9}  {:>9.4f}  {:>9}\n", "accuracy", width, "", "",
                       report.accuracy, total_support);
    out += fmt::format("{:>{}}  {:>9.4f}  {:>9.4f}  {:>9.4f}  {:>9}\n",
                       to_string(report.averaging) + " avg", width, report.precision,
                       report.recall, report.f1, total_support);
    if (report.auc) out += fmt::format("{:>{}}  {:>9.4f}\n", "auc", width, *report.auc);
    if (report.degenerate)
        out += fmt::format("{:>{}}  zero-denominator metrics reported as 0\n", "note", width);
    return out;
}

std::vector<std::string> consistency_warnings(const ConfusionMatrix& cm, double claimed_accuracy,
                                              double claimed_precision, double claimed_recall,
                                              double claimed_f1, double tolerance) {
    MetricReport computed = scalar_metrics(cm, averaging_mode(cm.num_classes()));
    std::vector<std::string> warnings;
    auto check = [&](const char* name, double got, double claimed) {
        if (std::abs(got - claimed) > tolerance)
            warnings.push_back(fmt::format(
                "consistency: {} computed from the confusion matrix is {:.6f} but the "
                "claimed value is {:.6f} (difference {:.2e} exceeds {:.0e})",
                name, got, claimed, std::abs(got - claimed), tolerance));
    };
    check("accuracy", computed.accuracy, claimed_accuracy);
    check("precision", computed.precision, claimed_precision);
    check("recall", computed.recall, claimed_recall);
    check("f1", computed.f1, claimed_f1);
    return warnings;
}

std::string format_leaderboard_csv(const std::vector<LeaderboardRow>& rows) {
    std::string out = "Model,Accuracy,Precision,Recall,F1,AUC\n";
    for (const auto& r : rows)
        out += fmt::format("{},{:.5f},{:.5f},{:.5f},{:.5f},{:.5f}\n", r.model, r.accuracy,
                           r.precision, r.recall, r.f1, r.auc);
    return out;
}

const std::vector<LeaderboardRow>& reference_results() {
    static const std::vector<LeaderboardRow> rows = {
        {"EfficientNetB0", 0.46219, 0.46219, 1.00000, 0.63218, 0.33122},
        {"EfficientNetV2B0", 0.46219, 0.46219, 1.00000, 0.63218, 0.63435},
        {"MobileNet", 0.54307, 0.50287, 0.99546, 0.66819, 0.93268},
        {"ConvNeXtTiny", 0.46219, 0.46219, 1.00000, 0.63218, 0.50726},
        {"ResNet50", 0.92542, 0.87885, 0.97273, 0.92341, 0.99033},
        {"VGG16", 0.93487, 0.91087, 0.95227, 0.93111, 0.98431},
        {"NASNetMobile", 0.95798, 0.93290, 0.97955, 0.95565, 0.99619},
        {"MobileNetV2", 0.97370, 0.96874, 0.97773, 0.97321, 0.97990},
        {"DenseNet121", 0.98004, 0.96882, 0.98864, 0.97863, 0.99830},
    };
    return rows;
}

} // namespace tlbench
