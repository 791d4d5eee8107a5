#include "tlbench/nn/loss.hpp"

#include <cmath>

namespace tlbench::nn {

namespace {
constexpr double kEps = 1e-7;

inline double clip(double p) { return std::min(1.0 - kEps, std::max(kEps, p)); }
} // namespace

double BinaryCrossEntropy::value(const Mat& pred, const Mat& target) const {
    if (pred.rows() != 1 || target.rows() != 1 || pred.cols() != target.cols())
        throw ShapeError("binary cross-entropy expects (1,B) predictions and targets");
    double sum = 0.0;
    for (Eigen::Index b = 0; b < pred.cols(); ++b) {
        const double p = clip(pred(0, b));
        const double y = target(0, b);
        sum += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    }
    return sum / static_cast<double>(pred.cols());
}

Mat BinaryCrossEntropy::grad(const Mat& pred, const Mat& target) const {
    Mat g(pred.rows(), pred.cols());
    const double n = static_cast<double>(pred.cols());
    for (Eigen::Index b = 0; b < pred.cols(); ++b) {
        const double p = clip(pred(0, b));
        const double y = target(0, b);
        g(0, b) = (-(y / p) + (1.0 - y) / (1.0 - p)) / n;
    }
    return g;
}

double CategoricalCrossEntropy::value(const Mat& pred, const Mat& target) const {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw ShapeError("categorical cross-entropy expects matching (K,B) matrices");
    double sum = 0.0;
    for (Eigen::Index b = 0; b < pred.cols(); ++b)
        for (Eigen::Index k = 0; k < pred.rows(); ++k)
            if (target(k, b) != 0.0) sum += -target(k, b) * std::log(clip(pred(k, b)));
    return sum / static_cast<double>(pred.cols());
}

Mat CategoricalCrossEntropy::grad(const Mat& pred, const Mat& target) const {
    Mat g = Mat::Zero(pred.rows(), pred.cols());
    const double n = static_cast<double>(pred.cols());
    for (Eigen::Index b = 0; b < pred.cols(); ++b)
        for (Eigen::Index k = 0; k < pred.rows(); ++k)
            if (target(k, b) != 0.0) g(k, b) = -target(k, b) / clip(pred(k, b)) / n;
    return g;
}

Mat one_hot(const std::vector<int>& labels, int num_classes) {
    Mat out = Mat::Zero(num_classes, static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw RangeError("one_hot label out of range");
        out(labels[i], static_cast<Eigen::Index>(i)) = 1.0;
    }
    return out;
}

} // namespace tlbench::nn
