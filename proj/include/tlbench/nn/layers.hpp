#pragma once

#include "tlbench/errors.hpp"
#include "tlbench/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace tlbench::nn {

using Mat = Eigen::MatrixXd;

/// Activation shape for one sample: channels x height x width.
/// Dense features use {c, 1, 1}. Batches store one flattened sample per
/// column in channel-major order (channel planes contiguous, row-major
/// within a plane).
struct Shape {
    int c = 0;
    int h = 1;
    int w = 1;
    int flat() const { return c * h * w; }
    bool spatial() const { return h > 1 || w > 1; }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

/// Per-forward stochastic context. `tick` must be unique per optimization
/// step so dropout masks are reproducible irrespective of execution order.
struct StepCtx {
    bool training = false;
    std::uint64_t seed = 42;
    std::uint64_t tick = 0;
};

struct ParamRef {
    std::string name;
    Mat* value = nullptr;
    Mat* grad = nullptr;
    bool trainable = true;
};

class Layer {
  public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;

    const std::string& name() const { return name_; }
    const Shape& in_shape() const { return in_shape_; }
    const Shape& out_shape() const { return out_shape_; }

    /// Resolve shapes; called once when the model is built.
    void build(const Shape& in) {
        in_shape_ = in;
        out_shape_ = infer(in);
    }
    virtual Shape infer(const Shape& in) = 0;
    virtual void init(CounterRng&) {}

    virtual void forward(const Mat& in, Mat& out, const StepCtx& ctx) = 0;
    /// Gradients w.r.t. the input; parameter gradients are accumulated into
    /// the layer's grad buffers. `in`/`out` are the activations of the last
    /// forward pass (owned by the model).
    virtual void backward(const Mat& in, const Mat& out, const Mat& dout, Mat& din) = 0;

    virtual std::vector<ParamRef> params() { return {}; }
    virtual double regularization() const { return 0.0; }
    virtual void zero_grads();

    bool trainable() const { return trainable_; }
    void set_trainable(bool t) { trainable_ = t; }

    std::size_t param_count() const;

    virtual void save_state(std::ostream&) const {}
    virtual void load_state(std::istream&) {}

    /// Stream id used by stochastic layers (set by the model at build time).
    void set_stream_id(std::uint64_t id) { stream_id_ = id; }

  protected:
    std::string name_;
    Shape in_shape_{}, out_shape_{};
    bool trainable_ = true;
    std::uint64_t stream_id_ = 0;
};

/// 3x3 (or any odd k) same-padding convolution, stride 1, He-normal init.
class Conv2d : public Layer {
  public:
    Conv2d(std::string name, int out_channels, int kernel = 3);
    Shape infer(const Shape& in) override;
    void init(CounterRng& rng) override;
    void forward(const Mat& in, Mat& out, const StepCtx& ctx) override;
    void backward(const Mat& in, const Mat& out, const Mat& dout, Mat& din) override;
    std::vector<ParamRef> params() override;
    void save_state(std::ostream&) const override;
    void load_state(std::istream&) override;

  private:
    void im2col(const double* sample, Mat& patches) const;
    int out_channels_, kernel_;
    Mat weight_, bias_, dweight_, dbias_;
    mutable Mat patches_, sample_out_; // scratch
};

class ReLU : public Layer {
  public:
    explicit ReLU(std::string name) : Layer(std::move(name)) {}
    Shape infer(const Shape& in) override { return in; }
    void forward(const Mat& in, Mat& out, const StepCtx& ctx) override;
    void backward(const Mat& in, const Mat& out, const Mat& dout, Mat& din) override;
};

/// 2x2 max pooling, stride 2 (floor on odd dims).
class MaxPool2 : public Layer {
  public:
    explicit MaxPool2(std::string name) : Layer(std::move(name)) {}
    Shape infer(const Shape& in) override;
    void forward(const Mat& in, Mat& out, const StepCtx& ctx) override;
    void backward(const Mat& in, const Mat& out, const Mat& dout, Mat& din) override;

  private:
    Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic> argmax_;
};

/// Per-channel batch normalization (over batch x spatial positions for
/// feature maps, over the batch for dense features). eps follows Keras
/// (1e-3); the running-average momentum defaults to 0.9 so inference
/// statistics converge within the few hundred steps a desk-scale run takes.
class BatchNorm : public Layer {
  public:
    explicit BatchNorm(std::string name, double momentum = 0.9, double eps = 1e-3);
    Shape infer(const Shape& in) override { return in; }
    void init(CounterRng& rng) override;
    void forward(const Mat& in, Mat& out, const StepCtx& ctx) override;
    void backward(const Mat& in, const Mat& out, const Mat& dout, Mat& din) override;
    std::vector<ParamRef> params() override;
    void save_state(std::ostream&) const override;
    void load_state(std::istream&) override;

    /// Frozen backbones keep batch-norm in inference mode during fine-tuning;
    /// the model toggles this when applying the freeze policy.
    void set_use_running_stats(bool v) { use_running_stats_ = v; }

  private:
    double momentum_, eps_;
    bool use_running_stats_ = false;
    Mat gamma_, beta_, dgamma_, dbeta_;
    Mat running_mean_, running_var_;
    Mat batch_mean_, batch_inv_std_; // cached from last training forward
    bool last_used_batch_stats_ = false;
};

class GlobalAvgPool : public Layer {
  public:
    explicit GlobalAvgPool(std::string name) : Layer(std::move(name)) {}
    Shape infer(const Shape& in) override { return Shape{in.c, 1, 1}; }
    void forward(const Mat& in, Mat& out, const StepCtx& ctx) override;
    void backward(const Mat& in, const Mat& out, const Mat& dout, Mat& din) override;
};

/// Inverted dropout; the mask is a counter-based function of
/// (ctx.seed, layer stream id, ctx.tick).
class Dropout : public Layer {
  public:
    Dropout(std::string name, double rate);
    Shape infer(const Shape& in) override { return in; }
    void forward(const Mat& in, Mat& out, const StepCtx& ctx) override;
    void backward(const Mat& in, const Mat& out, const Mat& dout, Mat& din) override;
    double rate() const { return rate_; }

  private:
    double rate_;
    Mat mask_;
    bool identity_ = true;
};

enum class DenseInit { he_normal, glorot_uniform };

class Dense : public Layer {
  public:
    Dense(std::string name, int units, double l2 = 0.0,
          DenseInit init = DenseInit::he_normal);
    Shape infer(const Shape& in) override;
    void init(CounterRng& rng) override;
    void forward(const Mat& in, Mat& out, const StepCtx& ctx) override;
    void backward(const Mat& in, const Mat& out, const Mat& dout, Mat& din) override;
    std::vector<ParamRef> params() override;
    double regularization() const override;
    void save_state(std::ostream&) const override;
    void load_state(std::istream&) override;

  private:
    int units_;
    double l2_;
    DenseInit init_mode_;
    Mat weight_, bias_, dweight_, dbias_;
};

class Sigmoid : public Layer {
  public:
    explicit Sigmoid(std::string name) : Layer(std::move(name)) {}
    Shape infer(const Shape& in) override { return in; }
    void forward(const Mat& in, Mat& out, const StepCtx& ctx) override;
    void backward(const Mat& in, const Mat& out, const Mat& dout, Mat& din) override;
};

class Softmax : public Layer {
  public:
    explicit Softmax(std::string name) : Layer(std::move(name)) {}
    Shape infer(const Shape& in) override { return in; }
    void forward(const Mat& in, Mat& out, const StepCtx& ctx) override;
    void backward(const Mat& in, const Mat& out, const Mat& dout, Mat& din) override;
};

} // namespace tlbench::nn
