#include "tlbench/nn/layers.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

namespace tlbench::nn {

std::string Shape::str() const { return fmt::format("{}x{}x{}", c, h, w); }

namespace {

void write_mat(std::ostream& out, const Mat& m) {
    std::int64_t rows = m.rows(), cols = m.cols();
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * m.size()));
}

void read_mat(std::istream& in, Mat& m) {
    std::int64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    if (!in || rows != m.rows() || cols != m.cols())
        throw ConfigError(fmt::format("checkpoint tensor is {}x{}, expected {}x{}", rows, cols,
                                      m.rows(), m.cols()));
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!in) throw IoError("truncated checkpoint tensor");
}

Mat he_normal(Eigen::Index rows, Eigen::Index cols, double fan_in, CounterRng& rng) {
    Mat m(rows, cols);
    const double stddev = std::sqrt(2.0 / fan_in);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = stddev * rng.next_normal();
    return m;
}

Mat glorot_uniform(Eigen::Index rows, Eigen::Index cols, double fan_in, double fan_out,
                   CounterRng& rng) {
    Mat m(rows, cols);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.next_uniform(-limit, limit);
    return m;
}

} // namespace

void Layer::zero_grads() {
    for (auto& p : params())
        if (p.grad) p.grad->setZero();
}

std::size_t Layer::param_count() const {
    std::size_t n = 0;
    for (const auto& p : const_cast<Layer*>(this)->params())
        if (p.value) n += static_cast<std::size_t>(p.value->size());
    return n;
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::string name, int out_channels, int kernel)
    : Layer(std::move(name)), out_channels_(out_channels), kernel_(kernel) {
    if (out_channels < 1) throw ConfigError("conv needs at least one output channel");
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("conv kernel must be odd");
}

Shape Conv2d::infer(const Shape& in) {
    if (!in.spatial() && kernel_ > 1)
        throw ConfigError(fmt::format("conv '{}' needs a spatial input, got {}", name_, in.str()));
    weight_ = Mat::Zero(out_channels_, in.c * kernel_ * kernel_);
    bias_ = Mat::Zero(out_channels_, 1);
    dweight_ = weight_;
    dbias_ = bias_;
    return Shape{out_channels_, in.h, in.w};
}

void Conv2d::init(CounterRng& rng) {
    weight_ = he_normal(weight_.rows(), weight_.cols(),
                        static_cast<double>(in_shape_.c * kernel_ * kernel_), rng);
    bias_.setZero();
}

void Conv2d::im2col(const double* sample, Mat& patches) const {
    const int h = in_shape_.h, w = in_shape_.w, cin = in_shape_.c;
    const int pad = kernel_ / 2;
    const int hw = h * w;
    patches.setZero();
    for (int c = 0; c < cin; ++c) {
        const double* plane = sample + static_cast<std::ptrdiff_t>(c) * hw;
        for (int ky = 0; ky < kernel_; ++ky) {
            for (int kx = 0; kx < kernel_; ++kx) {
                const int row = (c * kernel_ + ky) * kernel_ + kx;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - pad;
                    if (sy < 0 || sy >= h) continue;
                    const int x_lo = std::max(0, pad - kx);
                    const int x_hi = std::min(w, w + pad - kx);
                    if (x_lo >= x_hi) continue;
                    // patches is col-major: walking x at fixed row strides by rows().
                    const double* src = plane + static_cast<std::ptrdiff_t>(sy) * w + x_lo + kx -
                                        pad;
                    double* dst_base = const_cast<double*>(patches.data());
                    const Eigen::Index stride = patches.rows();
                    double* dst = dst_base + row + static_cast<std::ptrdiff_t>(y) * w * stride +
                                  static_cast<std::ptrdiff_t>(x_lo) * stride;
                    for (int x = x_lo; x < x_hi; ++x) {
                        *dst = *src++;
                        dst += stride;
                    }
                }
            }
        }
    }
}

void Conv2d::forward(const Mat& in, Mat& out, const StepCtx&) {
    const int hw = in_shape_.h * in_shape_.w;
    const Eigen::Index batch = in.cols();
    out.resize(static_cast<Eigen::Index>(out_channels_) * hw, batch);
    patches_.resize(static_cast<Eigen::Index>(in_shape_.c) * kernel_ * kernel_, hw);
    for (Eigen::Index b = 0; b < batch; ++b) {
        im2col(in.col(b).data(), patches_);
        sample_out_.noalias() = weight_ * patches_;
        sample_out_.colwise() += bias_.col(0);
        Eigen::Map<Mat> view(out.col(b).data(), hw, out_channels_);
        view = sample_out_.transpose();
    }
}

void Conv2d::backward(const Mat& in, const Mat&, const Mat& dout, Mat& din) {
    const int hw = in_shape_.h * in_shape_.w;
    const int pad = kernel_ / 2;
    const Eigen::Index batch = in.cols();
    din.setZero(in.rows(), batch);
    Mat dsample(out_channels_, hw);
    Mat dpatches(weight_.cols(), hw);
    for (Eigen::Index b = 0; b < batch; ++b) {
        Eigen::Map<const Mat> dview(dout.col(b).data(), hw, out_channels_);
        dsample = dview.transpose();
        im2col(in.col(b).data(), patches_);
        dweight_.noalias() += dsample * patches_.transpose();
        dbias_ += dsample.rowwise().sum();
        dpatches.noalias() = weight_.transpose() * dsample;
        // col2im scatter-add
        double* dst_sample = din.col(b).data();
        for (int c = 0; c < in_shape_.c; ++c) {
            double* plane = dst_sample + static_cast<std::ptrdiff_t>(c) * hw;
            for (int ky = 0; ky < kernel_; ++ky) {
                for (int kx = 0; kx < kernel_; ++kx) {
                    const int row = (c * kernel_ + ky) * kernel_ + kx;
                    for (int y = 0; y < in_shape_.h; ++y) {
                        const int sy = y + ky - pad;
                        if (sy < 0 || sy >= in_shape_.h) continue;
                        const int x_lo = std::max(0, pad - kx);
                        const int x_hi = std::min(in_shape_.w, in_shape_.w + pad - kx);
                        for (int x = x_lo; x < x_hi; ++x) {
                            const int sx = x + kx - pad;
                            plane[sy * in_shape_.w + sx] +=
                                dpatches(row, static_cast<Eigen::Index>(y) * in_shape_.w + x);
                        }
                    }
                }
            }
        }
    }
}

std::vector<ParamRef> Conv2d::params() {
    return {{name_ + ".weight", &weight_, &dweight_, trainable_},
            {name_ + ".bias", &bias_, &dbias_, trainable_}};
}

void Conv2d::save_state(std::ostream& out) const {
    write_mat(out, weight_);
    write_mat(out, bias_);
}

void Conv2d::load_state(std::istream& in) {
    read_mat(in, weight_);
    read_mat(in, bias_);
}

// ---------------------------------------------------------------------------
// ReLU

void ReLU::forward(const Mat& in, Mat& out, const StepCtx&) { out = in.cwiseMax(0.0); }

void ReLU::backward(const Mat& in, const Mat&, const Mat& dout, Mat& din) {
    din = (in.array() > 0.0).cast<double>() * dout.array();
}

// ---------------------------------------------------------------------------
// MaxPool2

Shape MaxPool2::infer(const Shape& in) {
    if (in.h < 2 || in.w < 2)
        throw ConfigError(fmt::format("max pool '{}' needs h,w >= 2, got {}", name_, in.str()));
    return Shape{in.c, in.h / 2, in.w / 2};
}

void MaxPool2::forward(const Mat& in, Mat& out, const StepCtx&) {
    const int h = in_shape_.h, w = in_shape_.w, c = in_shape_.c;
    const int ho = out_shape_.h, wo = out_shape_.w;
    const Eigen::Index batch = in.cols();
    out.resize(static_cast<Eigen::Index>(c) * ho * wo, batch);
    argmax_.resize(out.rows(), batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
        const double* src = in.col(b).data();
        double* dst = out.col(b).data();
        for (int ch = 0; ch < c; ++ch) {
            const double* plane = src + static_cast<std::ptrdiff_t>(ch) * h * w;
            for (int y = 0; y < ho; ++y) {
                for (int x = 0; x < wo; ++x) {
                    int best = (2 * y) * w + 2 * x;
                    double best_v = plane[best];
                    const int candidates[3] = {(2 * y) * w + 2 * x + 1, (2 * y + 1) * w + 2 * x,
                                               (2 * y + 1) * w + 2 * x + 1};
                    for (int cand : candidates) {
                        if (plane[cand] > best_v) {
                            best_v = plane[cand];
                            best = cand;
                        }
                    }
                    const Eigen::Index oi =
                        (static_cast<Eigen::Index>(ch) * ho + y) * wo + x;
                    dst[oi] = best_v;
                    argmax_(oi, b) = ch * h * w + best;
                }
            }
        }
    }
}

void MaxPool2::backward(const Mat& in, const Mat&, const Mat& dout, Mat& din) {
    din.setZero(in.rows(), in.cols());
    for (Eigen::Index b = 0; b < dout.cols(); ++b)
        for (Eigen::Index i = 0; i < dout.rows(); ++i)
            din(argmax_(i, b), b) += dout(i, b);
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(std::string name, double momentum, double eps)
    : Layer(std::move(name)), momentum_(momentum), eps_(eps) {}

void BatchNorm::init(CounterRng&) {
    gamma_ = Mat::Ones(in_shape_.c, 1);
    beta_ = Mat::Zero(in_shape_.c, 1);
    dgamma_ = Mat::Zero(in_shape_.c, 1);
    dbeta_ = Mat::Zero(in_shape_.c, 1);
    running_mean_ = Mat::Zero(in_shape_.c, 1);
    running_var_ = Mat::Ones(in_shape_.c, 1);
}

void BatchNorm::forward(const Mat& in, Mat& out, const StepCtx& ctx) {
    const int c = in_shape_.c;
    const int hw = in_shape_.h * in_shape_.w;
    const Eigen::Index batch = in.cols();
    const double n = static_cast<double>(batch) * hw;
    out.resize(in.rows(), batch);

    last_used_batch_stats_ = ctx.training && !use_running_stats_;
    Mat mean(c, 1), var(c, 1);
    if (last_used_batch_stats_) {
        for (int ch = 0; ch < c; ++ch) {
            double sum = 0.0, sq = 0.0;
            for (Eigen::Index b = 0; b < batch; ++b) {
                const double* seg = in.col(b).data() + static_cast<std::ptrdiff_t>(ch) * hw;
                for (int i = 0; i < hw; ++i) {
                    sum += seg[i];
                    sq += seg[i] * seg[i];
                }
            }
            const double m = sum / n;
            mean(ch, 0) = m;
            var(ch, 0) = std::max(0.0, sq / n - m * m);
        }
        running_mean_ = momentum_ * running_mean_ + (1.0 - momentum_) * mean;
        running_var_ = momentum_ * running_var_ + (1.0 - momentum_) * var;
        batch_mean_ = mean;
        batch_inv_std_ = (var.array() + eps_).rsqrt();
    } else {
        mean = running_mean_;
        var = running_var_;
        batch_mean_ = mean;
        batch_inv_std_ = (var.array() + eps_).rsqrt();
    }

    for (Eigen::Index b = 0; b < batch; ++b) {
        const double* src = in.col(b).data();
        double* dst = out.col(b).data();
        for (int ch = 0; ch < c; ++ch) {
            const double scale = gamma_(ch, 0) * batch_inv_std_(ch, 0);
            const double shift = beta_(ch, 0) - scale * batch_mean_(ch, 0);
            const double* s = src + static_cast<std::ptrdiff_t>(ch) * hw;
            double* d = dst + static_cast<std::ptrdiff_t>(ch) * hw;
            for (int i = 0; i < hw; ++i) d[i] = scale * s[i] + shift;
        }
    }
}

void BatchNorm::backward(const Mat& in, const Mat&, const Mat& dout, Mat& din) {
    const int c = in_shape_.c;
    const int hw = in_shape_.h * in_shape_.w;
    const Eigen::Index batch = in.cols();
    const double n = static_cast<double>(batch) * hw;
    din.resize(in.rows(), batch);

    for (int ch = 0; ch < c; ++ch) {
        const double inv_std = batch_inv_std_(ch, 0);
        const double mean = batch_mean_(ch, 0);
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (Eigen::Index b = 0; b < batch; ++b) {
            const double* x = in.col(b).data() + static_cast<std::ptrdiff_t>(ch) * hw;
            const double* dy = dout.col(b).data() + static_cast<std::ptrdiff_t>(ch) * hw;
            for (int i = 0; i < hw; ++i) {
                sum_dy += dy[i];
                sum_dy_xhat += dy[i] * (x[i] - mean) * inv_std;
            }
        }
        dgamma_(ch, 0) += sum_dy_xhat;
        dbeta_(ch, 0) += sum_dy;

        const double g = gamma_(ch, 0);
        if (last_used_batch_stats_) {
            for (Eigen::Index b = 0; b < batch; ++b) {
                const double* x = in.col(b).data() + static_cast<std::ptrdiff_t>(ch) * hw;
                const double* dy = dout.col(b).data() + static_cast<std::ptrdiff_t>(ch) * hw;
                double* dx = din.col(b).data() + static_cast<std::ptrdiff_t>(ch) * hw;
                for (int i = 0; i < hw; ++i) {
                    const double xhat = (x[i] - mean) * inv_std;
                    dx[i] = g * inv_std * (dy[i] - sum_dy / n - xhat * sum_dy_xhat / n);
                }
            }
        } else {
            // Stats are constants: plain affine transform.
            for (Eigen::Index b = 0; b < batch; ++b) {
                const double* dy = dout.col(b).data() + static_cast<std::ptrdiff_t>(ch) * hw;
                double* dx = din.col(b).data() + static_cast<std::ptrdiff_t>(ch) * hw;
                for (int i = 0; i < hw; ++i) dx[i] = g * inv_std * dy[i];
            }
        }
    }
}

std::vector<ParamRef> BatchNorm::params() {
    return {{name_ + ".gamma", &gamma_, &dgamma_, trainable_},
            {name_ + ".beta", &beta_, &dbeta_, trainable_}};
}

void BatchNorm::save_state(std::ostream& out) const {
    write_mat(out, gamma_);
    write_mat(out, beta_);
    write_mat(out, running_mean_);
    write_mat(out, running_var_);
}

void BatchNorm::load_state(std::istream& in) {
    read_mat(in, gamma_);
    read_mat(in, beta_);
    read_mat(in, running_mean_);
    read_mat(in, running_var_);
}

// ---------------------------------------------------------------------------
// GlobalAvgPool

void GlobalAvgPool::forward(const Mat& in, Mat& out, const StepCtx&) {
    const int hw = in_shape_.h * in_shape_.w;
    const Eigen::Index batch = in.cols();
    out.resize(in_shape_.c, batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
        Eigen::Map<const Mat> view(in.col(b).data(), hw, in_shape_.c);
        out.col(b) = view.colwise().mean().transpose();
    }
}

void GlobalAvgPool::backward(const Mat& in, const Mat&, const Mat& dout, Mat& din) {
    const int hw = in_shape_.h * in_shape_.w;
    din.resize(in.rows(), in.cols());
    for (Eigen::Index b = 0; b < dout.cols(); ++b) {
        double* dst = din.col(b).data();
        for (int ch = 0; ch < in_shape_.c; ++ch) {
            const double v = dout(ch, b) / hw;
            std::fill(dst + static_cast<std::ptrdiff_t>(ch) * hw,
                      dst + static_cast<std::ptrdiff_t>(ch + 1) * hw, v);
        }
    }
}

// ---------------------------------------------------------------------------
// Dropout

Dropout::Dropout(std::string name, double rate) : Layer(std::move(name)), rate_(rate) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0,1)");
}

void Dropout::forward(const Mat& in, Mat& out, const StepCtx& ctx) {
    identity_ = !ctx.training || rate_ == 0.0;
    if (identity_) {
        out = in;
        return;
    }
    CounterRng rng(ctx.seed, stream_id_, ctx.tick);
    const double keep = 1.0 - rate_;
    mask_.resize(in.rows(), in.cols());
    for (Eigen::Index j = 0; j < in.cols(); ++j)
        for (Eigen::Index i = 0; i < in.rows(); ++i)
            mask_(i, j) = rng.next_unit() < keep ? 1.0 / keep : 0.0;
    out = in.cwiseProduct(mask_);
}

void Dropout::backward(const Mat&, const Mat&, const Mat& dout, Mat& din) {
    din = identity_ ? dout : dout.cwiseProduct(mask_);
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::string name, int units, double l2, DenseInit init)
    : Layer(std::move(name)), units_(units), l2_(l2), init_mode_(init) {
    if (units < 1) throw ConfigError("dense layer needs at least one unit");
    if (l2 < 0.0) throw ConfigError("l2 strength must be nonnegative");
}

Shape Dense::infer(const Shape& in) {
    weight_ = Mat::Zero(units_, in.flat());
    bias_ = Mat::Zero(units_, 1);
    dweight_ = weight_;
    dbias_ = bias_;
    return Shape{units_, 1, 1};
}

void Dense::init(CounterRng& rng) {
    const double fan_in = static_cast<double>(in_shape_.flat());
    weight_ = init_mode_ == DenseInit::he_normal
                  ? he_normal(units_, in_shape_.flat(), fan_in, rng)
                  : glorot_uniform(units_, in_shape_.flat(), fan_in, units_, rng);
    bias_.setZero();
}

void Dense::forward(const Mat& in, Mat& out, const StepCtx&) {
    out.noalias() = weight_ * in;
    out.colwise() += bias_.col(0);
}

void Dense::backward(const Mat& in, const Mat&, const Mat& dout, Mat& din) {
    dweight_.noalias() += dout * in.transpose();
    dbias_ += dout.rowwise().sum();
    if (l2_ > 0.0) dweight_ += 2.0 * l2_ * weight_;
    din.noalias() = weight_.transpose() * dout;
}

std::vector<ParamRef> Dense::params() {
    return {{name_ + ".weight", &weight_, &dweight_, trainable_},
            {name_ + ".bias", &bias_, &dbias_, trainable_}};
}

double Dense::regularization() const { return l2_ * weight_.array().square().sum(); }

void Dense::save_state(std::ostream& out) const {
    write_mat(out, weight_);
    write_mat(out, bias_);
}

void Dense::load_state(std::istream& in) {
    read_mat(in, weight_);
    read_mat(in, bias_);
}

// ---------------------------------------------------------------------------
// Activations

void Sigmoid::forward(const Mat& in, Mat& out, const StepCtx&) {
    out = in.unaryExpr([](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    });
}

void Sigmoid::backward(const Mat&, const Mat& out, const Mat& dout, Mat& din) {
    din = dout.array() * out.array() * (1.0 - out.array());
}

void Softmax::forward(const Mat& in, Mat& out, const StepCtx&) {
    out.resize(in.rows(), in.cols());
    for (Eigen::Index b = 0; b < in.cols(); ++b) {
        const double mx = in.col(b).maxCoeff();
        out.col(b) = (in.col(b).array() - mx).exp();
        out.col(b) /= out.col(b).sum();
    }
}

void Softmax::backward(const Mat&, const Mat& out, const Mat& dout, Mat& din) {
    din.resize(out.rows(), out.cols());
    for (Eigen::Index b = 0; b < out.cols(); ++b) {
        const double dot = out.col(b).dot(dout.col(b));
        din.col(b) = out.col(b).array() * (dout.col(b).array() - dot);
    }
}

} // namespace tlbench::nn
