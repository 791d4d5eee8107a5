#include "tlbench/nn/model.hpp"

#include <fmt/format.h>

#include <istream>
#include <ostream>

namespace tlbench::nn {

Layer* Model::add(std::unique_ptr<Layer> layer) {
    if (built_) throw ConfigError("cannot add layers to a built model");
    layers_.push_back(std::move(layer));
    return layers_.back().get();
}

void Model::build(std::uint64_t seed) {
    if (built_) throw ConfigError("model already built");
    if (layers_.empty()) throw ConfigError("model has no layers");
    Shape shape = input_shape_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->build(shape);
        layers_[i]->set_stream_id(i + 1);
        CounterRng rng(derive_seed(seed, 0x1417, i), 0);
        layers_[i]->init(rng);
        shape = layers_[i]->out_shape();
    }
    built_ = true;
}

int Model::index_of(const std::string& layer_name) const {
    for (std::size_t i = 0; i < layers_.size(); ++i)
        if (layers_[i]->name() == layer_name) return static_cast<int>(i);
    return -1;
}

void Model::apply_freeze(int num_frozen, bool bn_inference_when_frozen) {
    if (num_frozen < 0 || num_frozen > backbone_layers_)
        throw RangeError(fmt::format("freeze count {} outside [0,{}]", num_frozen,
                                     backbone_layers_));
    for (int i = 0; i < layer_count(); ++i) {
        const bool frozen = i < num_frozen;
        layers_[i]->set_trainable(!frozen);
        if (auto* bn = dynamic_cast<BatchNorm*>(layers_[i].get()))
            bn->set_use_running_stats(frozen && bn_inference_when_frozen);
    }
}

const Mat& Model::forward(const Mat& input, const StepCtx& ctx) {
    if (!built_) throw ConfigError("model not built");
    if (input.rows() != input_shape_.flat())
        throw ShapeError(fmt::format("model input has {} rows, expected {}", input.rows(),
                                     input_shape_.flat()));
    acts_.resize(layers_.size() + 1);
    acts_[0] = input;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->forward(acts_[i], acts_[i + 1], ctx);
    return acts_.back();
}

void Model::zero_grads() {
    for (auto& l : layers_) l->zero_grads();
}

Mat Model::backward(const Mat& d_output) {
    return backward_between(layer_count() - 1, 0, d_output);
}

Mat Model::backward_between(int from_index, int to_index, const Mat& seed_grad) {
    if (acts_.size() != layers_.size() + 1)
        throw ConfigError("backward requires a completed forward pass");
    if (from_index < to_index || from_index >= layer_count() || to_index < 0)
        throw RangeError("invalid backward layer range");
    Mat dout = seed_grad;
    Mat din;
    for (int i = from_index; i >= to_index; --i) {
        layers_[i]->backward(acts_[i], acts_[i + 1], dout, din);
        dout.swap(din);
    }
    return dout;
}

std::vector<ParamRef> Model::params(bool trainable_only) {
    std::vector<ParamRef> out;
    for (auto& l : layers_)
        for (auto& p : l->params())
            if (!trainable_only || p.trainable) out.push_back(p);
    return out;
}

std::size_t Model::param_count(bool trainable_only) const {
    std::size_t n = 0;
    for (const auto& p : const_cast<Model*>(this)->params(trainable_only))
        n += static_cast<std::size_t>(p.value->size());
    return n;
}

double Model::regularization_loss() const {
    double sum = 0.0;
    for (const auto& l : layers_) sum += l->regularization();
    return sum;
}

void Model::save_state(std::ostream& out) const {
    const std::int64_t n = layer_count();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    for (const auto& l : layers_) {
        const std::string& name = l->name();
        const std::int64_t len = static_cast<std::int64_t>(name.size());
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(name.data(), len);
        l->save_state(out);
    }
}

void Model::load_state(std::istream& in) {
    std::int64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in || n != layer_count())
        throw ConfigError(fmt::format("checkpoint has {} layers, model has {}", n,
                                      layer_count()));
    for (const auto& l : layers_) {
        std::int64_t len = 0;
        in.read(reinterpret_cast<char*>(&len), sizeof(len));
        if (!in || len < 0 || len > 4096) throw IoError("corrupt checkpoint layer name");
        std::string name(static_cast<std::size_t>(len), '\0');
        in.read(name.data(), len);
        if (name != l->name())
            throw ConfigError(fmt::format("checkpoint layer '{}' does not match model layer "
                                          "'{}'",
                                          name, l->name()));
        l->load_state(in);
    }
}

} // namespace tlbench::nn
