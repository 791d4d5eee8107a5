#include "tlbench/nn/optimizers.hpp"

#include <fmt/format.h>

#include <cmath>

namespace tlbench::nn {

std::string to_string(OptimizerFamily f) {
    switch (f) {
    case OptimizerFamily::sgd: return "sgd";
    case OptimizerFamily::rmsprop: return "rmsprop";
    case OptimizerFamily::adam: return "adam";
    case OptimizerFamily::nadam: return "nadam";
    case OptimizerFamily::adam_decoupled_wd: return "adam_decoupled_wd";
    }
    return "?";
}

OptimizerFamily optimizer_family_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerFamily::sgd;
    if (s == "rmsprop") return OptimizerFamily::rmsprop;
    if (s == "adam") return OptimizerFamily::adam;
    if (s == "nadam") return OptimizerFamily::nadam;
    if (s == "adam_decoupled_wd" || s == "adamw") return OptimizerFamily::adam_decoupled_wd;
    throw RegistryError("unknown optimizer family: '" + s + "'");
}

void Optimizer::bind(const std::vector<ParamRef>&) {}

void Optimizer::step(const std::vector<ParamRef>& params) {
    if (!bound_) {
        bind(params);
        bound_ = true;
        slots_ = params.size();
    }
    if (params.size() != slots_)
        throw ConfigError("optimizer was bound to a different parameter list");
    ++t_;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].trainable) continue;
        apply(i, *params[i].value, *params[i].grad);
    }
}

std::string Sgd::describe() const { return fmt::format("sgd(lr={})", lr_); }

void Sgd::apply(std::size_t, Mat& value, const Mat& grad) { value -= lr_ * grad; }

RmsProp::RmsProp(double lr, double rho, double eps) : Optimizer(lr), rho_(rho), eps_(eps) {}

std::string RmsProp::describe() const {
    return fmt::format("rmsprop(lr={}, rho={})", lr_, rho_);
}

void RmsProp::bind(const std::vector<ParamRef>& params) {
    v_.clear();
    for (const auto& p : params) v_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
}

void RmsProp::apply(std::size_t slot, Mat& value, const Mat& grad) {
    Mat& v = v_[slot];
    v = rho_ * v + (1.0 - rho_) * grad.cwiseProduct(grad);
    value.array() -= lr_ * grad.array() / (v.array().sqrt() + eps_);
}

Adam::Adam(double lr, double beta1, double beta2, double eps, double decoupled_wd, bool nesterov)
    : Optimizer(lr), beta1_(beta1), beta2_(beta2), eps_(eps), wd_(decoupled_wd),
      nesterov_(nesterov) {
    if (wd_ < 0.0) throw ConfigError("weight decay must be nonnegative");
}

std::string Adam::describe() const {
    if (nesterov_) return fmt::format("nadam(lr={})", lr_);
    if (wd_ > 0.0) return fmt::format("adamw(lr={}, wd={})", lr_, wd_);
    return fmt::format("adam(lr={})", lr_);
}

void Adam::bind(const std::vector<ParamRef>& params) {
    m_.clear();
    v_.clear();
    for (const auto& p : params) {
        m_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
        v_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
    }
}

void Adam::apply(std::size_t slot, Mat& value, const Mat& grad) {
    if (wd_ > 0.0) value -= (lr_ * wd_) * value; // decoupled decay
    Mat& m = m_[slot];
    Mat& v = v_[slot];
    m = beta1_ * m + (1.0 - beta1_) * grad;
    v = beta2_ * v + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double t = static_cast<double>(t_);
    const double bias1 = 1.0 - std::pow(beta1_, t);
    const double bias2 = 1.0 - std::pow(beta2_, t);
    Mat v_hat = v / bias2;
    if (nesterov_) {
        // Nesterov momentum applied to the bias-corrected first moment.
        const double bias1_next = 1.0 - std::pow(beta1_, t + 1.0);
        Mat m_bar = (beta1_ / bias1_next) * m + ((1.0 - beta1_) / bias1) * grad;
        value.array() -= lr_ * m_bar.array() / (v_hat.array().sqrt() + eps_);
    } else {
        Mat m_hat = m / bias1;
        value.array() -= lr_ * m_hat.array() / (v_hat.array().sqrt() + eps_);
    }
}

} // namespace tlbench::nn
