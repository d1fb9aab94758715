// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

// Stateful layer wrappers over the kernels in nnkernel.hpp. A layer caches
// whatever its backward pass needs from the most recent forward call.

#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "yolic/nnkernel.hpp"
#include "yolic/tensor.hpp"

namespace yolic {

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;  // false for running statistics
};

struct RunContext {
  nn::Mode mode = nn::Mode::kEval;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

// Symbolic per-layer cost entry; FLOPs count one multiply-accumulate as 2.
struct LayerCost {
  std::string name;
  std::string kind;
  Shape output;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
};

template <typename T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  virtual Tensor<T> forward(const Tensor<T>& x, const RunContext& ctx) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual void collect(std::vector<Param<T>*>& /*out*/) {}
  // Leaf layers in execution order.
  virtual void flatten(std::vector<Layer*>& out) { out.push_back(this); }
  // Output shape for input shape `in` (batch 1), appending leaf costs.
  virtual Shape describe(const Shape& in, std::vector<LayerCost>& out) const = 0;

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

inline std::uint64_t numel_u64(const Shape& s) { return static_cast<std::uint64_t>(shape_numel(s)); }

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, int in, int out, int kernel, nn::Conv2dParams p, bool bias)
      : Layer<T>(std::move(name)), p_(p) {
    weight_ = {this->name() + ".weight", Tensor<T>({out, in / p.groups, kernel, kernel}), Tensor<T>(), true};
    if (bias) bias_ = Param<T>{this->name() + ".bias", Tensor<T>({out}), Tensor<T>(), true};
  }

  Tensor<T> forward(const Tensor<T>& x, const RunContext& /*ctx*/) override {
    input_ = x;
    return nn::conv2d<T>(x, weight_.value, has_bias() ? &bias_.value : nullptr, p_);
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    auto grads = nn::conv2d_backward<T>(input_, weight_.value, has_bias(), g, p_);
    accumulate(weight_.grad, grads.grad_weight);
    if (has_bias()) accumulate(bias_.grad, grads.grad_bias);
    return std::move(grads.grad_input);
  }

  void collect(std::vector<Param<T>*>& out) override {
    out.push_back(&weight_);
    if (has_bias()) out.push_back(&bias_);
  }

  Shape describe(const Shape& in, std::vector<LayerCost>& out) const override {
    const auto& w = weight_.value.shape();
    const int oh = nn::detail::out_size(in[2], w[2], p_.stride, p_.padding);
    const int ow = nn::detail::out_size(in[3], w[3], p_.stride, p_.padding);
    Shape o{in[0], w[0], oh, ow};
    const std::uint64_t k2 = static_cast<std::uint64_t>(w[2]) * w[3];
    const std::uint64_t flops = 2 * k2 * static_cast<std::uint64_t>(in[1]) * w[0] * oh * ow / p_.groups;
    out.push_back({this->name(), p_.groups == 1 ? "conv" : "dwconv", o,
                   numel_u64(w) + (has_bias() ? static_cast<std::uint64_t>(w[0]) : 0), flops});
    return o;
  }

  bool has_bias() const noexcept { return !bias_.value.empty(); }
  const nn::Conv2dParams& params() const noexcept { return p_; }
  Param<T>& weight() noexcept { return weight_; }
  Param<T>& bias() noexcept { return bias_; }

 private:
  static void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
    if (dst.empty()) dst = Tensor<T>(src.shape());
    dst += src;
  }

  nn::Conv2dParams p_;
  Param<T> weight_;
  Param<T> bias_;
  Tensor<T> input_;
};

template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  BatchNorm2d(std::string name, int channels) : Layer<T>(std::move(name)) {
    gamma_ = {this->name() + ".gamma", Tensor<T>({channels}, T{1}), Tensor<T>(), true};
    beta_ = {this->name() + ".beta", Tensor<T>({channels}), Tensor<T>(), true};
    mean_ = {this->name() + ".running_mean", Tensor<T>({channels}), Tensor<T>(), false};
    var_ = {this->name() + ".running_var", Tensor<T>({channels}, T{1}), Tensor<T>(), false};
  }

  Tensor<T> forward(const Tensor<T>& x, const RunContext& ctx) override {
    return nn::batchnorm2d<T>(x, gamma_.value, beta_.value, mean_.value, var_.value, ctx.mode, &cache_);
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    auto grads = nn::batchnorm2d_backward<T>(g, gamma_.value, cache_);
    if (gamma_.grad.empty()) gamma_.grad = Tensor<T>(gamma_.value.shape());
    if (beta_.grad.empty()) beta_.grad = Tensor<T>(beta_.value.shape());
    gamma_.grad += grads.grad_gamma;
    beta_.grad += grads.grad_beta;
    return std::move(grads.grad_input);
  }

  void collect(std::vector<Param<T>*>& out) override {
    out.insert(out.end(), {&gamma_, &beta_, &mean_, &var_});
  }

  Shape describe(const Shape& in, std::vector<LayerCost>& out) const override {
    // scale and shift per element
    out.push_back({this->name(), "bn", in, 2 * static_cast<std::uint64_t>(in[1]), 2 * numel_u64(in)});
    return in;
  }

  Param<T>& gamma() noexcept { return gamma_; }
  Param<T>& beta() noexcept { return beta_; }
  Param<T>& running_mean() noexcept { return mean_; }
  Param<T>& running_var() noexcept { return var_; }

 private:
  Param<T> gamma_, beta_, mean_, var_;
  nn::BatchNormCache<T> cache_;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Tensor<T> forward(const Tensor<T>& x, const RunContext&) override {
    output_ = nn::relu(x);
    return output_;
  }
  Tensor<T> backward(const Tensor<T>& g) override { return nn::relu_backward(g, output_); }
  Shape describe(const Shape& in, std::vector<LayerCost>& out) const override {
    out.push_back({this->name(), "relu", in, 0, numel_u64(in)});
    return in;
  }

 private:
  Tensor<T> output_;
};

template <typename T>
class MaxPool2d final : public Layer<T> {
 public:
  MaxPool2d(std::string name, int kernel, int stride, int padding)
      : Layer<T>(std::move(name)), kernel_(kernel), stride_(stride), padding_(padding) {}
  Tensor<T> forward(const Tensor<T>& x, const RunContext&) override {
    in_shape_ = x.shape();
    return nn::maxpool2d(x, kernel_, stride_, padding_, &argmax_);
  }
  Tensor<T> backward(const Tensor<T>& g) override { return nn::maxpool2d_backward(g, in_shape_, argmax_); }
  Shape describe(const Shape& in, std::vector<LayerCost>& out) const override {
    Shape o{in[0], in[1], nn::detail::out_size(in[2], kernel_, stride_, padding_),
            nn::detail::out_size(in[3], kernel_, stride_, padding_)};
    out.push_back({this->name(), "maxpool", o, 0, numel_u64(o)});
    return o;
  }

 private:
  int kernel_, stride_, padding_;
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Tensor<T> forward(const Tensor<T>& x, const RunContext&) override {
    in_shape_ = x.shape();
    return nn::global_avg_pool(x);
  }
  Tensor<T> backward(const Tensor<T>& g) override { return nn::global_avg_pool_backward(g, in_shape_); }
  Shape describe(const Shape& in, std::vector<LayerCost>& out) const override {
    Shape o{in[0], in[1]};
    out.push_back({this->name(), "gap", o, 0, numel_u64(o)});
    return o;
  }

 private:
  Shape in_shape_;
};

template <typename T>
class Dropout final : public Layer<T> {
 public:
  Dropout(std::string name, double rate, std::uint64_t layer_id)
      : Layer<T>(std::move(name)), rate_(rate), layer_id_(layer_id) {}
  Tensor<T> forward(const Tensor<T>& x, const RunContext& ctx) override {
    mode_ = ctx.mode;
    return nn::dropout(x, rate_, ctx.mode, nn::dropout_key(ctx.seed, layer_id_, ctx.step), &keep_);
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    if (mode_ == nn::Mode::kEval || rate_ == 0.0) return g;
    return nn::dropout_backward(g, rate_, keep_);
  }
  Shape describe(const Shape& in, std::vector<LayerCost>& out) const override {
    out.push_back({this->name(), "dropout", in, 0, 0});
    return in;
  }
  double rate() const noexcept { return rate_; }

 private:
  double rate_;
  std::uint64_t layer_id_;
  nn::Mode mode_ = nn::Mode::kEval;
  std::vector<std::uint8_t> keep_;
};

template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(std::string name, int in, int out) : Layer<T>(std::move(name)) {
    weight_ = {this->name() + ".weight", Tensor<T>({out, in}), Tensor<T>(), true};
    bias_ = {this->name() + ".bias", Tensor<T>({out}), Tensor<T>(), true};
  }
  Tensor<T> forward(const Tensor<T>& x, const RunContext&) override {
    input_ = x;
    return nn::linear(x, weight_.value, &bias_.value);
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    auto grads = nn::linear_backward(input_, weight_.value, true, g);
    if (weight_.grad.empty()) weight_.grad = Tensor<T>(weight_.value.shape());
    if (bias_.grad.empty()) bias_.grad = Tensor<T>(bias_.value.shape());
    weight_.grad += grads.grad_weight;
    bias_.grad += grads.grad_bias;
    return std::move(grads.grad_input);
  }
  void collect(std::vector<Param<T>*>& out) override { out.insert(out.end(), {&weight_, &bias_}); }
  Shape describe(const Shape& in, std::vector<LayerCost>& out) const override {
    const int o = weight_.value.dim(0), i = weight_.value.dim(1);
    Shape os{in[0], o};
    out.push_back({this->name(), "fc", os, static_cast<std::uint64_t>(o) * i + o, 2ULL * i * o});
    return os;
  }
  Param<T>& weight() noexcept { return weight_; }
  Param<T>& bias() noexcept { return bias_; }

 private:
  Param<T> weight_, bias_;
  Tensor<T> input_;
};

template <typename T>
class Sequential : public Layer<T> {
 public:
  using Layer<T>::Layer;

  Sequential& add(std::unique_ptr<Layer<T>> layer) {
    children_.push_back(std::move(layer));
    return *this;
  }

  Tensor<T> forward(const Tensor<T>& x, const RunContext& ctx) override {
    Tensor<T> h = x;
    for (auto& c : children_) h = c->forward(h, ctx);
    return h;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> h = g;
    for (auto it = children_.rbegin(); it != children_.rend(); ++it) h = (*it)->backward(h);
    return h;
  }
  void collect(std::vector<Param<T>*>& out) override {
    for (auto& c : children_) c->collect(out);
  }
  void flatten(std::vector<Layer<T>*>& out) override {
    for (auto& c : children_) c->flatten(out);
  }
  Shape describe(const Shape& in, std::vector<LayerCost>& out) const override {
    Shape s = in;
    for (const auto& c : children_) s = c->describe(s, out);
    return s;
  }

  std::size_t size() const noexcept { return children_.size(); }
  Layer<T>& child(std::size_t i) { return *children_[i]; }
  const Layer<T>& child(std::size_t i) const { return *children_[i]; }

 private:
  std::vector<std::unique_ptr<Layer<T>>> children_;
};

// ShuffleNet V2 unit. Stride 1: split channels in half, transform the second
// half, concatenate, shuffle. Stride 2: two transforming branches over the
// full input, concatenate, shuffle.
template <typename T>
class ShuffleUnit final : public Layer<T> {
 public:
  ShuffleUnit(std::string name, int stride, std::unique_ptr<Sequential<T>> branch1, std::unique_ptr<Sequential<T>> branch2)
      : Layer<T>(std::move(name)), stride_(stride), branch1_(std::move(branch1)), branch2_(std::move(branch2)) {}

  Tensor<T> forward(const Tensor<T>& x, const RunContext& ctx) override {
    Tensor<T> cat;
    if (stride_ == 1) {
      const int half = x.dim(1) / 2;
      cat = nn::concat_channels(nn::slice_channels(x, 0, half), branch2_->forward(nn::slice_channels(x, half, x.dim(1)), ctx));
    } else {
      cat = nn::concat_channels(branch1_->forward(x, ctx), branch2_->forward(x, ctx));
    }
    return nn::channel_shuffle(cat, 2);
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    const Tensor<T> gcat = nn::channel_shuffle_backward(g, 2);
    const int half = gcat.dim(1) / 2;
    const Tensor<T> g1 = nn::slice_channels(gcat, 0, half);
    const Tensor<T> g2 = nn::slice_channels(gcat, half, gcat.dim(1));
    if (stride_ == 1) return nn::concat_channels(g1, branch2_->backward(g2));
    Tensor<T> gx = branch1_->backward(g1);
    gx += branch2_->backward(g2);
    return gx;
  }

  void collect(std::vector<Param<T>*>& out) override {
    if (branch1_) branch1_->collect(out);
    branch2_->collect(out);
  }
  void flatten(std::vector<Layer<T>*>& out) override {
    if (branch1_) branch1_->flatten(out);
    branch2_->flatten(out);
  }
  Shape describe(const Shape& in, std::vector<LayerCost>& out) const override {
    if (stride_ == 1) {
      Shape half = in;
      half[1] = in[1] / 2;
      Shape b = branch2_->describe(half, out);
      b[1] += half[1];
      return b;
    }
    Shape a = branch1_->describe(in, out);
    const Shape b = branch2_->describe(in, out);
    a[1] += b[1];
    return a;
  }

 private:
  int stride_;
  std::unique_ptr<Sequential<T>> branch1_;
  std::unique_ptr<Sequential<T>> branch2_;
};

}  // namespace yolic
