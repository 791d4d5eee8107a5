#pragma once

#include "tlbench/nn/layers.hpp"

#include <memory>

namespace tlbench::nn {

enum class OptimizerFamily { sgd, rmsprop, adam, nadam, adam_decoupled_wd };

std::string to_string(OptimizerFamily f);
OptimizerFamily optimizer_family_from_string(const std::string& s);

/// Gradient step over a fixed parameter list. State slots bind to parameter
/// order on the first step; non-trainable entries are skipped.
class Optimizer {
  public:
    explicit Optimizer(double lr) : lr_(lr) {
        if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    }
    virtual ~Optimizer() = default;

    void step(const std::vector<ParamRef>& params);

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    virtual std::string describe() const = 0;

  protected:
    virtual void apply(std::size_t slot, Mat& value, const Mat& grad) = 0;
    virtual void bind(const std::vector<ParamRef>& params);

    double lr_;
    std::int64_t t_ = 0; // completed steps
    bool bound_ = false;
    std::size_t slots_ = 0;
};

class Sgd : public Optimizer {
  public:
    using Optimizer::Optimizer;
    std::string describe() const override;

  protected:
    void apply(std::size_t, Mat& value, const Mat& grad) override;
};

class RmsProp : public Optimizer {
  public:
    explicit RmsProp(double lr, double rho = 0.9, double eps = 1e-7);
    std::string describe() const override;

  protected:
    void bind(const std::vector<ParamRef>& params) override;
    void apply(std::size_t slot, Mat& value, const Mat& grad) override;

  private:
    double rho_, eps_;
    std::vector<Mat> v_;
};

class Adam : public Optimizer {
  public:
    /// decoupled_wd > 0 turns this into the decoupled-weight-decay variant:
    /// parameters shrink by lr*wd directly, outside the gradient path.
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-7,
         double decoupled_wd = 0.0, bool nesterov = false);
    std::string describe() const override;

  protected:
    void bind(const std::vector<ParamRef>& params) override;
    void apply(std::size_t slot, Mat& value, const Mat& grad) override;

  private:
    double beta1_, beta2_, eps_, wd_;
    bool nesterov_;
    std::vector<Mat> m_, v_;
};

} // namespace tlbench::nn
