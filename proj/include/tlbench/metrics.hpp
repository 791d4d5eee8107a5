#pragma once

#include "tlbench/errors.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tlbench {

enum class Averaging { binary, macro };

std::string to_string(Averaging a);

/// binary for 2 classes, macro otherwise.
Averaging averaging_mode(int num_classes);

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
  public:
    explicit ConfusionMatrix(int num_classes);
    /// Binary convenience: positives are class 1.
    static ConfusionMatrix binary(std::int64_t tp, std::int64_t tn, std::int64_t fp,
                                  std::int64_t fn);

    int num_classes() const { return k_; }
    std::int64_t at(int true_class, int predicted_class) const;
    std::int64_t& at(int true_class, int predicted_class);
    std::int64_t total() const;
    std::int64_t trace() const;

    // Binary aliases (throw unless k == 2).
    std::int64_t tp() const { return at2(1, 1); }
    std::int64_t tn() const { return at2(0, 0); }
    std::int64_t fp() const { return at2(0, 1); }
    std::int64_t fn() const { return at2(1, 0); }

  private:
    std::int64_t at2(int t, int p) const;
    int k_;
    std::vector<std::int64_t> cells_;
};

/// Count (true, predicted) pairs into a KxK matrix. Labels must lie in [0, K).
ConfusionMatrix confusion(const std::vector<int>& true_labels,
                          const std::vector<int>& predicted_labels, int num_classes);

/// Binary: label = 1 iff score >= threshold. scores.size() == n.
std::vector<int> predict_labels_binary(const std::vector<double>& scores,
                                       double threshold = 0.5);

/// Multi-class: arg-max per row (lowest index wins exact ties). Rows must sum
/// to 1 within 1e-4.
std::vector<int> predict_labels_multiclass(const std::vector<std::vector<double>>& scores,
                                           int num_classes);

struct PerClassMetrics {
    int class_index = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;
    bool degenerate = false; // a zero denominator was reported as 0
};

struct MetricReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::optional<double> auc;
    Averaging averaging = Averaging::binary;
    std::vector<PerClassMetrics> per_class;
    bool degenerate = false;
};

/// Accuracy/precision/recall/F1 from a confusion matrix. Binary averaging uses
/// the positive class (index 1); macro averages per-class values unweighted.
/// Zero denominators yield 0 with the degenerate flag set, never an exception.
MetricReport scalar_metrics(const ConfusionMatrix& cm, Averaging averaging);

struct RocCurve {
    std::vector<double> fpr; // monotone nondecreasing, starts 0, ends 1
    std::vector<double> tpr;
    double auc = 0.0;
    std::vector<double> thresholds; // score at each added point (fpr[0] has +inf)
};

/// ROC by sweeping every distinct score threshold; AUC by trapezoid rule
/// (equal to the rank statistic with ties counted one half).
/// Requires both classes present; otherwise UndefinedMetricError.
RocCurve roc_and_auc(const std::vector<int>& true_labels, const std::vector<double>& scores);

/// sklearn-style per-class table plus macro/weighted rows.
std::string format_classification_report(const MetricReport& report,
                                         const std::vector<std::string>& class_names);

/// Compare metrics computed from a confusion matrix against externally claimed
/// values; one warning per metric that disagrees beyond the tolerance.
std::vector<std::string> consistency_warnings(const ConfusionMatrix& cm, double claimed_accuracy,
                                              double claimed_precision, double claimed_recall,
                                              double claimed_f1, double tolerance = 1e-4);

struct LeaderboardRow {
    std::string model;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
};

/// Render "Model,Accuracy,Precision,Recall,F1,AUC" with 5-decimal values,
/// preserving row order.
std::string format_leaderboard_csv(const std::vector<LeaderboardRow>& rows);

/// Published reference metrics for the nine backbone families, bundled as
/// formatting fixtures for report tests and `tlbench report` demos.
const std::vector<LeaderboardRow>& reference_results();

} // namespace tlbench
