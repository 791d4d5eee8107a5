#pragma once

#include "tlbench/nn/layers.hpp"

#include <iosfwd>
#include <memory>

namespace tlbench::nn {

/// Sequential network. The model owns per-layer activations from the last
/// forward pass, which backward and Grad-CAM style partial backprop read.
/// Instances are not thread-safe; clone via save/load for parallel use.
class Model {
  public:
    explicit Model(Shape input_shape) : input_shape_(input_shape) {}

    Layer* add(std::unique_ptr<Layer> layer);

    /// Resolve shapes and initialize parameters. Must be called once, after
    /// all layers are added.
    void build(std::uint64_t seed);

    int layer_count() const { return static_cast<int>(layers_.size()); }
    Layer& layer(int index) { return *layers_.at(index); }
    const Layer& layer(int index) const { return *layers_.at(index); }
    int index_of(const std::string& layer_name) const; // -1 when absent

    const Shape& input_shape() const { return input_shape_; }
    const Shape& output_shape() const { return layers_.back()->out_shape(); }

    /// Leading layers that form the backbone (set by the model factory).
    void set_backbone_layers(int n) { backbone_layers_ = n; }
    int backbone_layers() const { return backbone_layers_; }

    /// Freeze the first `num_frozen` backbone layers. Frozen BatchNorm layers
    /// switch to running statistics when bn_inference_when_frozen is set.
    void apply_freeze(int num_frozen, bool bn_inference_when_frozen = true);

    const Mat& forward(const Mat& input, const StepCtx& ctx);

    /// Activation produced by layer `index` in the last forward pass.
    const Mat& activation(int index) const { return acts_.at(index + 1); }
    const Mat& last_input() const { return acts_.at(0); }

    void zero_grads();

    /// Backprop from the final output. Returns the gradient w.r.t. the input.
    Mat backward(const Mat& d_output);

    /// Backprop a seed gradient at the output of layer `from_index` down to
    /// (and including) layer `to_index`; returns the gradient w.r.t. the
    /// output of layer `to_index - 1` -- i.e. d(seed)/d(activation in) of
    /// to_index. Used for Grad-CAM (gradient at a feature map: to_index =
    /// feature layer + 1).
    Mat backward_between(int from_index, int to_index, const Mat& seed_grad);

    std::vector<ParamRef> params(bool trainable_only = false);
    std::size_t param_count(bool trainable_only = false) const;
    double regularization_loss() const;

    void save_state(std::ostream& out) const;
    void load_state(std::istream& in);

  private:
    Shape input_shape_;
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<Mat> acts_; // acts_[0] = input, acts_[i+1] = output of layer i
    int backbone_layers_ = 0;
    bool built_ = false;
};

} // namespace tlbench::nn
