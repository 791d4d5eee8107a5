#pragma once

#include "tlbench/nn/layers.hpp"

#include <memory>

namespace tlbench::nn {

/// Loss over predicted probabilities (one sample per column). Targets share
/// the prediction layout: (1,B) binary labels or (K,B) one-hot columns.
class Loss {
  public:
    virtual ~Loss() = default;
    virtual double value(const Mat& pred, const Mat& target) const = 0;
    virtual Mat grad(const Mat& pred, const Mat& target) const = 0;
    virtual std::string name() const = 0;
};

/// -mean(y log p + (1-y) log(1-p)); probabilities clipped to [1e-7, 1-1e-7].
class BinaryCrossEntropy : public Loss {
  public:
    double value(const Mat& pred, const Mat& target) const override;
    Mat grad(const Mat& pred, const Mat& target) const override;
    std::string name() const override { return "binary_cross_entropy"; }
};

/// -mean over samples of sum_k y_k log p_k, same clipping.
class CategoricalCrossEntropy : public Loss {
  public:
    double value(const Mat& pred, const Mat& target) const override;
    Mat grad(const Mat& pred, const Mat& target) const override;
    std::string name() const override { return "categorical_cross_entropy"; }
};

/// One-hot encode integer class labels into a (K,B) matrix.
Mat one_hot(const std::vector<int>& labels, int num_classes);

} // namespace tlbench::nn
