// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

// The cell classifier: ShuffleNet V2 backbone plus a pooled multi-label head
// emitting N x (M + 1) sigmoid outputs, its BCE objective, the Adam training
// loop and the "yolic-weights/1" file format.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "yolic/common.hpp"
#include "yolic/image.hpp"
#include "yolic/labelkit.hpp"
#include "yolic/layers.hpp"
#include "yolic/nnkernel.hpp"
#include "yolic/tensor.hpp"

namespace yolic {

struct ModelSpec {
  std::string preset = "table1";
  int input_size = 224;
  std::vector<int> stage_repeats{4, 8, 4};
  // stem, stage2, stage3, stage4, final pointwise
  std::vector<int> stage_channels{24, 116, 232, 464, 1024};
  double dropout_rate = 0.2;
  int n_outputs = 0;
  // Convolutions carry biases and batch norms are absent (inference-only form).
  bool folded_bn = false;

  static ModelSpec table1(int n_outputs, int input_size = 224) {
    ModelSpec s;
    s.n_outputs = n_outputs;
    s.input_size = input_size;
    return s;
  }

  static ModelSpec tiny(int n_outputs, int input_size = 64) {
    ModelSpec s;
    s.preset = "tiny";
    s.input_size = input_size;
    s.stage_repeats = {1, 1, 1};
    s.stage_channels = {8, 16, 32, 64, 128};
    s.n_outputs = n_outputs;
    return s;
  }

  static ModelSpec preset_named(std::string_view name, int n_outputs, int input_size = 0) {
    if (name == "table1") return table1(n_outputs, input_size ? input_size : 224);
    if (name == "tiny") return tiny(n_outputs, input_size ? input_size : 64);
    throw Error(detail::concat("unknown model preset '", name, "' (expected table1 or tiny)"));
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

inline std::vector<std::string> validate_spec(const ModelSpec& s) {
  std::vector<std::string> out;
  if (s.input_size < 32 || s.input_size % 32 != 0) out.push_back("input_size must be a positive multiple of 32");
  if (s.stage_repeats.size() != 3) out.push_back("stage_repeats must have 3 entries");
  if (s.stage_channels.size() != 5) out.push_back("stage_channels must have 5 entries");
  for (int r : s.stage_repeats) {
    if (r < 1) out.push_back("every stage needs at least one unit");
  }
  for (std::size_t i = 1; i < std::min<std::size_t>(4, s.stage_channels.size()); ++i) {
    if (s.stage_channels[i] < 2 || s.stage_channels[i] % 2 != 0) out.push_back("stage channels must be even");
  }
  for (int c : s.stage_channels) {
    if (c < 1) out.push_back("channel counts must be positive");
  }
  if (!(s.dropout_rate >= 0.0 && s.dropout_rate < 1.0)) out.push_back("dropout_rate must be in [0,1)");
  if (s.n_outputs < 1) out.push_back("n_outputs must be positive");
  return out;
}

inline nlohmann::ordered_json spec_to_json(const ModelSpec& s) {
  return {{"preset", s.preset},
          {"input_size", s.input_size},
          {"stage_repeats", s.stage_repeats},
          {"stage_channels", s.stage_channels},
          {"dropout_rate", s.dropout_rate},
          {"n_outputs", s.n_outputs},
          {"folded_bn", s.folded_bn}};
}

inline ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  try {
    s.preset = j.at("preset").get<std::string>();
    s.input_size = j.at("input_size").get<int>();
    s.stage_repeats = j.at("stage_repeats").get<std::vector<int>>();
    s.stage_channels = j.at("stage_channels").get<std::vector<int>>();
    s.dropout_rate = j.at("dropout_rate").get<double>();
    s.n_outputs = j.at("n_outputs").get<int>();
    s.folded_bn = j.value("folded_bn", false);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(detail::concat("model spec: ", e.what()));
  }
  return s;
}

// Shapes recorded after each top-level block during a forward pass.
using ShapeTrace = std::vector<std::pair<std::string, Shape>>;

template <typename T>
class YolicModel {
 public:
  YolicModel(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed), root_(std::make_unique<Sequential<T>>("model")) {}

  const ModelSpec& spec() const noexcept { return spec_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t step() const noexcept { return step_; }
  void set_step(std::uint64_t s) noexcept { step_ = s; }
  Sequential<T>& root() noexcept { return *root_; }
  const Sequential<T>& root() const noexcept { return *root_; }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    root_->collect(out);
    return out;
  }

  std::vector<Layer<T>*> leaves() {
    std::vector<Layer<T>*> out;
    root_->flatten(out);
    return out;
  }

  std::vector<LayerCost> describe() const {
    std::vector<LayerCost> out;
    root_->describe({1, 3, spec_.input_size, spec_.input_size}, out);
    return out;
  }

  // Logits (B, C).
  Tensor<T> forward(const Tensor<T>& images, nn::Mode mode, ShapeTrace* trace = nullptr) {
    YOLIC_CHECK(images.rank() == 4 && images.dim(1) == 3 && images.dim(2) == spec_.input_size &&
                    images.dim(3) == spec_.input_size,
                ShapeError, "model expects (B,3,", spec_.input_size, ",", spec_.input_size, ") input, got ",
                shape_str(images.shape()));
    const RunContext ctx{mode, seed_, step_};
    Tensor<T> h = images;
    for (std::size_t i = 0; i < root_->size(); ++i) {
      h = root_->child(i).forward(h, ctx);
      if (trace) trace->emplace_back(root_->child(i).name(), h.shape());
    }
    YOLIC_ASSERT_FINITE(h, "model forward");
    return h;
  }

  // Back-propagates dLoss/dlogits, accumulating parameter gradients.
  Tensor<T> backward(const Tensor<T>& grad_logits) { return root_->backward(grad_logits); }

  void zero_grad() {
    for (auto* p : params()) {
      if (p->trainable) p->grad = Tensor<T>(p->value.shape());
    }
  }

 private:
  ModelSpec spec_;
  std::uint64_t seed_;
  std::uint64_t step_ = 0;
  std::unique_ptr<Sequential<T>> root_;
};

namespace detail {

template <typename T>
std::unique_ptr<Layer<T>> make_conv(const std::string& name, int in, int out, int k, int stride, int groups,
                                    bool bias) {
  return std::make_unique<Conv2d<T>>(name, in, out, k, nn::Conv2dParams{stride, k / 2, groups}, bias);
}

// conv (+ bn) (+ relu) appended under `prefix`.
template <typename T>
void add_conv_block(Sequential<T>& seq, const ModelSpec& spec, const std::string& prefix, int in, int out, int k,
                    int stride, int groups, bool relu) {
  seq.add(make_conv<T>(prefix + ".conv", in, out, k, stride, groups, spec.folded_bn));
  if (!spec.folded_bn) seq.add(std::make_unique<BatchNorm2d<T>>(prefix + ".bn", out));
  if (relu) seq.add(std::make_unique<ReLU<T>>(prefix + ".relu"));
}

template <typename T>
std::unique_ptr<Layer<T>> make_shuffle_unit(const ModelSpec& spec, const std::string& name, int in, int out,
                                            int stride) {
  const int branch = out / 2;
  std::unique_ptr<Sequential<T>> b1;
  if (stride > 1) {
    b1 = std::make_unique<Sequential<T>>(name + ".b1");
    add_conv_block(*b1, spec, name + ".b1.dw", in, in, 3, stride, in, false);
    add_conv_block(*b1, spec, name + ".b1.pw", in, branch, 1, 1, 1, true);
  }
  auto b2 = std::make_unique<Sequential<T>>(name + ".b2");
  const int b2_in = stride > 1 ? in : branch;
  add_conv_block(*b2, spec, name + ".b2.pw1", b2_in, branch, 1, 1, 1, true);
  add_conv_block(*b2, spec, name + ".b2.dw", branch, branch, 3, stride, branch, false);
  add_conv_block(*b2, spec, name + ".b2.pw2", branch, branch, 1, 1, 1, true);
  return std::make_unique<ShuffleUnit<T>>(name, stride, std::move(b1), std::move(b2));
}

}  // namespace detail

// Convolutions: He-uniform; batch norm: gamma 1, beta 0; FC: uniform
// +-1/sqrt(fan_in) weights and zero bias.
template <typename T>
void init_params(YolicModel<T>& model) {
  auto params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    if (!p.trainable) continue;
    const auto& s = p.value.shape();
    const bool is_weight = p.name.ends_with(".weight");
    if (!is_weight) continue;
    Rng rng(hash_counter(model.seed(), i));
    double bound = 0.0;
    if (s.size() == 4) {
      const double fan_in = static_cast<double>(s[1]) * s[2] * s[3];
      bound = std::sqrt(6.0 / fan_in);
    } else {
      bound = 1.0 / std::sqrt(static_cast<double>(s[1]));
    }
    for (auto& v : p.value.vec()) v = static_cast<T>(rng.uniform(-bound, bound));
  }
}

template <typename T>
YolicModel<T> build_model(const ModelSpec& spec, std::uint64_t seed) {
  const auto problems = validate_spec(spec);
  YOLIC_CHECK(problems.empty(), Error, "invalid model spec: ", problems.front());
  YolicModel<T> model(spec, seed);
  auto& root = model.root();
  const auto& ch = spec.stage_channels;

  auto stem = std::make_unique<Sequential<T>>("stem");
  detail::add_conv_block(*stem, spec, "stem", 3, ch[0], 3, 2, 1, true);
  root.add(std::move(stem));
  root.add(std::make_unique<MaxPool2d<T>>("maxpool", 3, 2, 1));

  int in = ch[0];
  for (int s = 0; s < 3; ++s) {
    const std::string name = "stage" + std::to_string(s + 2);
    auto stage = std::make_unique<Sequential<T>>(name);
    const int out = ch[static_cast<std::size_t>(s) + 1];
    for (int u = 0; u < spec.stage_repeats[static_cast<std::size_t>(s)]; ++u) {
      stage->add(detail::make_shuffle_unit<T>(spec, name + "." + std::to_string(u), u == 0 ? in : out, out,
                                              u == 0 ? 2 : 1));
    }
    root.add(std::move(stage));
    in = out;
  }

  auto conv5 = std::make_unique<Sequential<T>>("conv5");
  detail::add_conv_block(*conv5, spec, "conv5", in, ch[4], 1, 1, 1, true);
  root.add(std::move(conv5));
  root.add(std::make_unique<GlobalAvgPool<T>>("gap"));
  root.add(std::make_unique<Dropout<T>>("dropout", spec.dropout_rate, /*layer_id=*/1));
  root.add(std::make_unique<Linear<T>>("fc", ch[4], spec.n_outputs));

  init_params(model);
  model.zero_grad();
  return model;
}

// ---------------------------------------------------------------------------
// Input assembly

inline constexpr double kProbClamp = 1e-7;

template <typename T>
Tensor<T> images_to_tensor(std::span<const Image> images, int size) {
  Tensor<T> out({static_cast<int>(images.size()), 3, size, size});
  for (std::size_t b = 0; b < images.size(); ++b) {
    const Image& src = images[b];
    const Image img = (src.width == size && src.height == size) ? src : resize_bilinear(src, size, size);
    for (int ch = 0; ch < 3; ++ch) {
      for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) out.at(static_cast<int>(b), ch, r, c) = static_cast<T>(img.at(r, c, ch));
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> labels_to_tensor(std::span<const CellLabelVector> labels) {
  YOLIC_CHECK(!labels.empty(), Error, "no labels");
  const int C = static_cast<int>(labels.front().size());
  Tensor<T> out({static_cast<int>(labels.size()), C});
  for (std::size_t b = 0; b < labels.size(); ++b) {
    YOLIC_CHECK(labels[b].size() == static_cast<std::size_t>(C), MismatchError, "label vector ", b, " has length ",
                labels[b].size(), ", expected ", C);
    const auto bits = labels[b].bits();
    for (int j = 0; j < C; ++j) out[b * static_cast<std::size_t>(C) + static_cast<std::size_t>(j)] = static_cast<T>(bits[static_cast<std::size_t>(j)]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary cross-entropy over all C outputs, averaged over C and the batch.

template <typename T>
struct BceResult {
  double loss = 0.0;
  Tensor<T> grad_logits;  // (p - y) / (C * B)
};

template <typename T>
BceResult<T> bce_loss(const Tensor<T>& probs, const Tensor<T>& targets) {
  YOLIC_CHECK(probs.rank() == 2 && probs.shape() == targets.shape(), ShapeError, "bce_loss: probs ",
              shape_str(probs.shape()), " vs targets ", shape_str(targets.shape()));
  const double B = probs.dim(0), C = probs.dim(1);
  BceResult<T> out{0.0, Tensor<T>(probs.shape())};
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.numel(); ++i) {
    const double y = targets[i];
    const double p = std::clamp(static_cast<double>(probs[i]), kProbClamp, 1.0 - kProbClamp);
    sum += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    out.grad_logits[i] = static_cast<T>((static_cast<double>(probs[i]) - y) / (C * B));
  }
  out.loss = -sum / (C * B);
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::vector<int> milestones{100, 125};
  double gamma = 0.1;
  int batch_size = 32;
  int epochs = 150;
  // When positive, training stops after this many optimizer steps and the
  // epoch count becomes ceil(max_steps / batches_per_epoch).
  int max_steps = 0;
  bool flip = true;
  bool jitter = true;
  double jitter_strength = 0.1;
  std::uint64_t seed = 0;
};

struct TrainTrace {
  std::vector<double> epoch_loss;  // mean batch loss per epoch
  std::vector<double> epoch_lr;
  std::vector<double> step_loss;
};

struct Sample {
  Image image;
  CellLabelVector labels;
};

// Multi-step schedule: lr * gamma^(number of milestones <= epoch).
inline double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  const auto passed = std::count_if(cfg.milestones.begin(), cfg.milestones.end(), [&](int m) { return m <= epoch; });
  return cfg.lr * std::pow(cfg.gamma, static_cast<double>(passed));
}

inline int effective_epochs(const TrainConfig& cfg, std::size_t n_samples) {
  if (cfg.max_steps <= 0) return cfg.epochs;
  const auto bpe = (n_samples + static_cast<std::size_t>(cfg.batch_size) - 1) / static_cast<std::size_t>(cfg.batch_size);
  return static_cast<int>((static_cast<std::size_t>(cfg.max_steps) + bpe - 1) / bpe);
}

inline void validate_train_config(const TrainConfig& cfg, int epochs) {
  YOLIC_CHECK(cfg.batch_size >= 1, Error, "batch_size must be positive");
  YOLIC_CHECK(epochs >= 1, Error, "epochs must be positive");
  for (std::size_t i = 0; i < cfg.milestones.size(); ++i) {
    YOLIC_CHECK(cfg.milestones[i] >= 1, Error, "milestones must be positive epochs");
    YOLIC_CHECK(i == 0 || cfg.milestones[i - 1] < cfg.milestones[i], Error, "milestones must be strictly increasing");
  }
  YOLIC_CHECK(cfg.jitter_strength >= 0.0 && cfg.jitter_strength <= 1.0, Error, "jitter strength must be in [0,1]");
}

template <typename T>
class Adam {
 public:
  Adam(std::vector<Param<T>*> params, double beta1, double beta2, double eps)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto* p : params_) {
      m_.emplace_back(p->trainable ? p->value.numel() : 0, 0.0);
      v_.emplace_back(p->trainable ? p->value.numel() : 0, 0.0);
    }
  }

  void step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      if (!p.trainable) continue;
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.value.numel(); ++i) {
        const double g = p.grad[i];
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
        const double mh = m[i] / c1, vh = v[i] / c2;
        p.value[i] = static_cast<T>(p.value[i] - lr * mh / (std::sqrt(vh) + eps_));
      }
    }
  }

 private:
  std::vector<Param<T>*> params_;
  double beta1_, beta2_, eps_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

// One forward/backward/update on a prepared batch; returns the batch loss.
template <typename T>
double train_step(YolicModel<T>& model, Adam<T>& opt, const Tensor<T>& images, const Tensor<T>& targets, double lr) {
  model.zero_grad();
  const Tensor<T> logits = model.forward(images, nn::Mode::kTrain);
  const auto res = bce_loss(nn::sigmoid(logits), targets);
  model.backward(res.grad_logits);
  opt.step(lr);
  model.set_step(model.step() + 1);
  return res.loss;
}

inline std::uint64_t augment_key(std::uint64_t seed, int epoch, std::size_t sample) {
  return hash_counter(hash_counter(seed ^ 0xa5a5ULL, static_cast<std::uint64_t>(epoch)), sample);
}

// Fair coin per augmentation key.
inline bool flip_drawn(std::uint64_t aug_key) { return (mix64(aug_key) & 1U) != 0; }

template <typename T>
struct Batch {
  Tensor<T> images;
  Tensor<T> targets;
};

// Augments and stacks data[indices]. Flip (when mirror_perm is given) and
// jitter draws are keyed by (seed, epoch, sample index), so a batch is a pure
// function of its arguments.
template <typename T>
Batch<T> prepare_batch(std::span<const Sample> data, std::span<const std::size_t> indices, const TrainConfig& cfg,
                       const std::optional<std::vector<std::size_t>>& mirror_perm, int epoch, int size) {
  std::vector<Image> images;
  std::vector<CellLabelVector> labels;
  for (std::size_t i : indices) {
    const Sample& s = data[i];
    const std::uint64_t aug_key = augment_key(cfg.seed, epoch, i);
    Image img = s.image;
    CellLabelVector lab = s.labels;
    if (mirror_perm && flip_drawn(aug_key)) {
      auto flipped = flip_example(img, lab, mirror_perm);
      img = std::move(flipped.image);
      lab = std::move(flipped.labels);
    }
    if (cfg.jitter) img = color_jitter(img, cfg.jitter_strength, mix64(aug_key + 1));
    images.push_back(std::move(img));
    labels.push_back(std::move(lab));
  }
  return {images_to_tensor<T>(images, size), labels_to_tensor<T>(labels)};
}

using EpochCallback = std::function<void(int epoch, double loss, double lr)>;

// mirror_perm enables flip augmentation; pass nullopt when the configuration
// has no mirror permutation.
template <typename T>
TrainTrace train(YolicModel<T>& model, std::span<const Sample> data, const TrainConfig& cfg,
                 const std::optional<std::vector<std::size_t>>& mirror_perm, const EpochCallback& on_epoch = {}) {
  YOLIC_CHECK(!data.empty(), Error, "training set is empty");
  for (std::size_t i = 0; i < data.size(); ++i) {
    YOLIC_CHECK(data[i].labels.size() == static_cast<std::size_t>(model.spec().n_outputs), MismatchError,
                "sample ", i, " has ", data[i].labels.size(), " label bits but the model emits C=",
                model.spec().n_outputs);
  }
  const int epochs = effective_epochs(cfg, data.size());
  validate_train_config(cfg, epochs);
  const bool flip = cfg.flip && mirror_perm.has_value();
  const int size = model.spec().input_size;

  Adam<T> opt(model.params(), cfg.beta1, cfg.beta2, cfg.adam_eps);
  TrainTrace trace;
  std::vector<std::size_t> order(data.size());
  int steps = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double lr = lr_at_epoch(cfg, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(hash_counter(cfg.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.integer(0, static_cast<std::int64_t>(i) - 1))]);
    }
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      if (cfg.max_steps > 0 && steps >= cfg.max_steps) break;
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const auto [x, y] = prepare_batch<T>(data, idx, cfg, flip ? mirror_perm : std::nullopt, epoch, size);
      const double loss = train_step(model, opt, x, y, lr);
      trace.step_loss.push_back(loss);
      loss_sum += loss;
      ++batches;
      ++steps;
    }
    if (batches == 0) break;
    trace.epoch_loss.push_back(loss_sum / batches);
    trace.epoch_lr.push_back(lr);
    if (on_epoch) on_epoch(epoch, trace.epoch_loss.back(), lr);
  }
  return trace;
}

// Sigmoid probabilities in eval mode, one row per image.
template <typename T>
Tensor<T> predict_probs(YolicModel<T>& model, std::span<const Image> images) {
  return nn::sigmoid(model.forward(images_to_tensor<T>(images, model.spec().input_size), nn::Mode::kEval));
}

// ---------------------------------------------------------------------------
// "yolic-weights/1": magic line, one-line JSON header, then every tensor in
// build order as little-endian f32.

inline constexpr std::string_view kWeightsVersion = "yolic-weights/1";

namespace detail {

inline void put_f32_le(std::string& out, float v) {
  const auto u = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xFFU));
}

inline float get_f32_le(const char* p) {
  std::uint32_t u = 0;
  for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<float>(u);
}

struct ParsedContainer {
  nlohmann::json header;
  std::string_view payload;
};

inline ParsedContainer parse_container(std::string_view bytes, std::string_view magic) {
  const auto nl1 = bytes.find('\n');
  YOLIC_CHECK(nl1 != std::string_view::npos && bytes.substr(0, nl1) == magic, FormatError, "weights: expected '",
              magic, "' magic line");
  const auto nl2 = bytes.find('\n', nl1 + 1);
  YOLIC_CHECK(nl2 != std::string_view::npos, FormatError, "weights: truncated header");
  ParsedContainer out;
  try {
    out.header = nlohmann::json::parse(bytes.substr(nl1 + 1, nl2 - nl1 - 1));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(detail::concat("weights: malformed header: ", e.what()));
  }
  out.payload = bytes.substr(nl2 + 1);
  return out;
}

}  // namespace detail

struct WeightsInfo {
  ModelSpec spec;
  std::string config_name;
  std::uint64_t seed = 0;
};

template <typename T>
std::string save_weights(YolicModel<T>& model, const std::string& config_name) {
  nlohmann::ordered_json header;
  header["spec"] = spec_to_json(model.spec());
  header["config"] = config_name;
  header["C"] = model.spec().n_outputs;
  header["seed"] = model.seed();
  auto tensors = nlohmann::ordered_json::array();
  std::size_t total = 0;
  for (auto* p : model.params()) {
    tensors.push_back({{"name", p->name}, {"shape", p->value.shape()}});
    total += p->value.numel();
  }
  header["tensors"] = std::move(tensors);
  header["payload_bytes"] = total * 4;

  std::string out = std::string(kWeightsVersion) + "\n" + header.dump() + "\n";
  out.reserve(out.size() + total * 4);
  for (auto* p : model.params()) {
    for (T v : p->value.vec()) detail::put_f32_le(out, static_cast<float>(v));
  }
  return out;
}

inline WeightsInfo read_weights_info(std::string_view bytes) {
  const auto parsed = detail::parse_container(bytes, kWeightsVersion);
  WeightsInfo info;
  YOLIC_CHECK(parsed.header.contains("spec"), FormatError, "weights: header lacks 'spec'");
  info.spec = spec_from_json(parsed.header["spec"]);
  info.config_name = parsed.header.value("config", "");
  info.seed = parsed.header.value("seed", std::uint64_t{0});
  return info;
}

// expected_outputs < 0 skips the C check.
template <typename T>
YolicModel<T> load_weights(std::string_view bytes, int expected_outputs = -1) {
  const auto parsed = detail::parse_container(bytes, kWeightsVersion);
  const auto& h = parsed.header;
  YOLIC_CHECK(h.contains("spec") && h.contains("tensors") && h.contains("payload_bytes"), FormatError,
              "weights: header lacks spec/tensors/payload_bytes");
  const ModelSpec spec = spec_from_json(h["spec"]);
  if (expected_outputs >= 0) {
    YOLIC_CHECK(spec.n_outputs == expected_outputs, MismatchError, "weights: file has C=", spec.n_outputs,
                " but the configuration expects C=", expected_outputs);
  }
  const auto payload_bytes = h["payload_bytes"].get<std::size_t>();
  YOLIC_CHECK(parsed.payload.size() == payload_bytes, FormatError, "weights: truncated payload: expected ",
              payload_bytes, " bytes, found ", parsed.payload.size());

  auto model = build_model<T>(spec, h.value("seed", std::uint64_t{0}));
  auto params = model.params();
  const auto& tensors = h["tensors"];
  YOLIC_CHECK(tensors.is_array() && tensors.size() == params.size(), FormatError, "weights: file lists ",
              tensors.size(), " tensors, the spec builds ", params.size());
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    YOLIC_CHECK(tensors[i].value("name", "") == p.name && tensors[i]["shape"].get<Shape>() == p.value.shape(),
                FormatError, "weights: tensor ", i, " is '", tensors[i].value("name", ""), "', expected '", p.name,
                "' ", shape_str(p.value.shape()));
    YOLIC_CHECK(offset + p.value.numel() * 4 <= parsed.payload.size(), FormatError, "weights: truncated payload");
    for (std::size_t k = 0; k < p.value.numel(); ++k) {
      p.value[k] = static_cast<T>(detail::get_f32_le(parsed.payload.data() + offset));
      offset += 4;
    }
  }
  return model;
}

// Copies every tensor of `src` into an identically-specified model of another scalar type.
template <typename To, typename From>
YolicModel<To> convert_model(YolicModel<From>& src) {
  auto dst = build_model<To>(src.spec(), src.seed());
  auto sp = src.params();
  auto dp = dst.params();
  for (std::size_t i = 0; i < sp.size(); ++i) dp[i]->value = sp[i]->value.template cast<To>();
  dst.set_step(src.step());
  return dst;
}

}  // namespace yolic
