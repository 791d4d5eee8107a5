#pragma once

#include "tlbench/metrics.hpp"
#include "tlbench/trainer.hpp"

#include <string>
#include <vector>

namespace tlbench {

/// Train/val accuracy or loss against epoch. metric is "accuracy" or "loss".
void render_history_curves(const TrainingHistory& history, const std::string& metric,
                           const std::string& path);

/// Confusion matrix heatmap with per-cell count annotations.
void render_confusion_png(const ConfusionMatrix& cm, const std::vector<std::string>& class_names,
                          const std::string& path);

/// ROC polyline with the chance diagonal and the AUC in the title.
void render_roc_png(const RocCurve& curve, const std::string& path);

} // namespace tlbench
