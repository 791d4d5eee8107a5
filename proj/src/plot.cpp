#include "tlbench/plot.hpp"

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>

namespace tlbench {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 540;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 30;
constexpr int kMarginTop = 50;
constexpr int kMarginBottom = 60;

const cv::Scalar kWhite(255, 255, 255);
const cv::Scalar kBlack(30, 30, 30);
const cv::Scalar kGrey(200, 200, 200);
const cv::Scalar kBlue(180, 110, 40);   // BGR
const cv::Scalar kOrange(60, 140, 235); // BGR

struct Axes {
    double x_min, x_max, y_min, y_max;
    cv::Point map(double x, double y) const {
        const double px = kMarginLeft + (x - x_min) / (x_max - x_min) *
                                            (kWidth - kMarginLeft - kMarginRight);
        const double py = kHeight - kMarginBottom - (y - y_min) / (y_max - y_min) *
                                                        (kHeight - kMarginTop - kMarginBottom);
        return {static_cast<int>(std::lround(px)), static_cast<int>(std::lround(py))};
    }
};

void draw_frame(cv::Mat& canvas, const Axes& ax, const std::string& title,
                const std::string& x_label, const std::string& y_label) {
    canvas.setTo(kWhite);
    for (int i = 0; i <= 5; ++i) {
        const double fy = ax.y_min + (ax.y_max - ax.y_min) * i / 5.0;
        const cv::Point a = ax.map(ax.x_min, fy), b = ax.map(ax.x_max, fy);
        cv::line(canvas, a, b, kGrey, 1, cv::LINE_AA);
        cv::putText(canvas, fmt::format("{:.3g}", fy), {6, a.y + 4}, cv::FONT_HERSHEY_SIMPLEX,
                    0.42, kBlack, 1, cv::LINE_AA);
    }
    for (int i = 0; i <= 5; ++i) {
        const double fx = ax.x_min + (ax.x_max - ax.x_min) * i / 5.0;
        const cv::Point a = ax.map(fx, ax.y_min);
        cv::line(canvas, a, ax.map(fx, ax.y_max), kGrey, 1, cv::LINE_AA);
        cv::putText(canvas, fmt::format("{:.3g}", fx), {a.x - 12, kHeight - kMarginBottom + 22},
                    cv::FONT_HERSHEY_SIMPLEX, 0.42, kBlack, 1, cv::LINE_AA);
    }
    cv::rectangle(canvas, ax.map(ax.x_min, ax.y_max), ax.map(ax.x_max, ax.y_min), kBlack, 1);
    cv::putText(canvas, title, {kMarginLeft, 30}, cv::FONT_HERSHEY_SIMPLEX, 0.65, kBlack, 1,
                cv::LINE_AA);
    cv::putText(canvas, x_label, {kWidth / 2 - 30, kHeight - 18}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
                kBlack, 1, cv::LINE_AA);
    cv::putText(canvas, y_label, {8, kMarginTop - 14}, cv::FONT_HERSHEY_SIMPLEX, 0.5, kBlack, 1,
                cv::LINE_AA);
}

void draw_series(cv::Mat& canvas, const Axes& ax, const std::vector<double>& xs,
                 const std::vector<double>& ys, const cv::Scalar& color) {
    for (std::size_t i = 1; i < xs.size(); ++i)
        cv::line(canvas, ax.map(xs[i - 1], ys[i - 1]), ax.map(xs[i], ys[i]), color, 2,
                 cv::LINE_AA);
    for (std::size_t i = 0; i < xs.size(); ++i)
        cv::circle(canvas, ax.map(xs[i], ys[i]), 3, color, cv::FILLED, cv::LINE_AA);
}

void save(const cv::Mat& canvas, const std::string& path) {
    if (!cv::imwrite(path, canvas)) throw IoError("cannot write plot: " + path);
}

} // namespace

void render_history_curves(const TrainingHistory& history, const std::string& metric,
                           const std::string& path) {
    if (history.rows.empty()) throw EmptyDatasetError("no history rows to plot");
    const bool accuracy = metric == "accuracy";
    if (!accuracy && metric != "loss")
        throw ConfigError("history metric must be 'accuracy' or 'loss'");

    std::vector<double> xs, train_ys, val_ys;
    for (const auto& r : history.rows) {
        xs.push_back(r.epoch);
        train_ys.push_back(accuracy ? r.train_acc : r.train_loss);
        val_ys.push_back(accuracy ? r.val_acc : r.val_loss);
    }
    double lo = std::min(*std::min_element(train_ys.begin(), train_ys.end()),
                         *std::min_element(val_ys.begin(), val_ys.end()));
    double hi = std::max(*std::max_element(train_ys.begin(), train_ys.end()),
                         *std::max_element(val_ys.begin(), val_ys.end()));
    if (hi - lo < 1e-9) hi = lo + 1.0;
    const double pad = (hi - lo) * 0.06;

    cv::Mat canvas(kHeight, kWidth, CV_8UC3);
    Axes ax{1.0, std::max(2.0, xs.back()), lo - pad, hi + pad};
    draw_frame(canvas, ax, fmt::format("training and validation {}", metric), "epoch", metric);
    draw_series(canvas, ax, xs, train_ys, kBlue);
    draw_series(canvas, ax, xs, val_ys, kOrange);
    cv::putText(canvas, "train", {kWidth - 150, kMarginTop + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
                kBlue, 1, cv::LINE_AA);
    cv::putText(canvas, "validation", {kWidth - 150, kMarginTop + 24}, cv::FONT_HERSHEY_SIMPLEX,
                0.5, kOrange, 1, cv::LINE_AA);
    save(canvas, path);
}

void render_confusion_png(const ConfusionMatrix& cm, const std::vector<std::string>& class_names,
                          const std::string& path) {
    const int k = cm.num_classes();
    if (static_cast<int>(class_names.size()) != k)
        throw ShapeError("class name count does not match confusion matrix");
    const int cell = 110, margin = 90;
    const int size = margin + k * cell + 30;
    cv::Mat canvas(size, size, CV_8UC3, kWhite);

    std::int64_t max_cell = 1;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) max_cell = std::max(max_cell, cm.at(i, j));

    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            const double frac = static_cast<double>(cm.at(i, j)) / static_cast<double>(max_cell);
            // light -> saturated blue
            const cv::Scalar fill(235 - 120 * frac, 225 - 140 * frac, 255 - 215 * frac);
            const cv::Rect rect(margin + j * cell, margin + i * cell, cell, cell);
            cv::rectangle(canvas, rect, fill, cv::FILLED);
            cv::rectangle(canvas, rect, kBlack, 1);
            const std::string text = std::to_string(cm.at(i, j));
            const cv::Scalar text_color = frac > 0.6 ? kWhite : kBlack;
            cv::putText(canvas, text,
                        {rect.x + cell / 2 - 12 * static_cast<int>(text.size()) / 2,
                         rect.y + cell / 2 + 6},
                        cv::FONT_HERSHEY_SIMPLEX, 0.6, text_color, 1, cv::LINE_AA);
        }
    }
    for (int i = 0; i < k; ++i) {
        cv::putText(canvas, class_names[i], {margin + i * cell + 10, margin - 12},
                    cv::FONT_HERSHEY_SIMPLEX, 0.5, kBlack, 1, cv::LINE_AA);
        cv::putText(canvas, class_names[i], {6, margin + i * cell + cell / 2 + 4},
                    cv::FONT_HERSHEY_SIMPLEX, 0.5, kBlack, 1, cv::LINE_AA);
    }
    cv::putText(canvas, "predicted", {margin + (k * cell) / 2 - 40, 28},
                cv::FONT_HERSHEY_SIMPLEX, 0.55, kBlack, 1, cv::LINE_AA);
    cv::putText(canvas, "true", {6, 28}, cv::FONT_HERSHEY_SIMPLEX, 0.55, kBlack, 1, cv::LINE_AA);
    save(canvas, path);
}

void render_roc_png(const RocCurve& curve, const std::string& path) {
    cv::Mat canvas(kHeight, kWidth, CV_8UC3);
    Axes ax{0.0, 1.0, 0.0, 1.0};
    draw_frame(canvas, ax, fmt::format("ROC curve (AUC = {:.5f})", curve.auc),
               "false positive rate", "true positive rate");
    cv::line(canvas, ax.map(0, 0), ax.map(1, 1), kGrey, 1, cv::LINE_AA);
    std::vector<double> xs(curve.fpr.begin(), curve.fpr.end());
    std::vector<double> ys(curve.tpr.begin(), curve.tpr.end());
    draw_series(canvas, ax, xs, ys, kBlue);
    save(canvas, path);
}

} // namespace tlbench
