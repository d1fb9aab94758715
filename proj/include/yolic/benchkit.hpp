// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

// Parameter and FLOP accounting, single-image latency measurement and
// post-training INT8 weight quantization.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "yolic/decode.hpp"
#include "yolic/yolicnet.hpp"

namespace yolic {

struct LatencyStats {
  int runs = 0;
  int warmup = 0;
  int threads = 1;
  double median_ms = 0.0;
  double p90_ms = 0.0;
  double decode_median_ms = 0.0;
  std::vector<double> warmup_ms;  // in execution order
  std::vector<double> samples_ms;  // measured runs, in execution order
};

struct CostReport {
  std::string preset;
  int input_size = 0;
  std::vector<LayerCost> layers;
  std::uint64_t total_params = 0;
  std::uint64_t total_flops = 0;
  std::optional<LatencyStats> latency;
};

template <typename T>
CostReport count_params(const YolicModel<T>& model) {
  CostReport r;
  r.preset = model.spec().preset;
  r.input_size = model.spec().input_size;
  r.layers = model.describe();
  for (const auto& l : r.layers) r.total_params += l.params;
  return r;
}

// FLOPs at an arbitrary square input size; 1 MAC = 2 FLOPs.
template <typename T>
CostReport count_flops(const YolicModel<T>& model, int input_size) {
  CostReport r;
  r.preset = model.spec().preset;
  r.input_size = input_size;
  model.root().describe({1, 3, input_size, input_size}, r.layers);
  for (const auto& l : r.layers) {
    r.total_params += l.params;
    r.total_flops += l.flops;
  }
  return r;
}

template <typename T>
CostReport cost_report(const YolicModel<T>& model) {
  return count_flops(model, model.spec().input_size);
}

inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

// Times single-image forward + decode. Kernels run on the calling thread, so
// the only supported thread count is 1.
template <typename T>
LatencyStats bench_latency(YolicModel<T>& model, std::size_t n_cells, std::size_t n_classes, int runs, int warmup,
                           int threads = 1) {
  YOLIC_CHECK(runs >= 5 && warmup >= 2, Error, "latency benchmark needs runs >= 5 and warmup >= 2");
  YOLIC_CHECK(threads == 1, Error, "kernels are single-threaded; requested ", threads, " threads");
  YOLIC_CHECK(n_cells * (n_classes + 1) == static_cast<std::size_t>(model.spec().n_outputs), MismatchError,
              "bench: N x (M+1) = ", n_cells * (n_classes + 1), " but the model emits C=", model.spec().n_outputs);
  const int s = model.spec().input_size;
  Tensor<T> input({1, 3, s, s});
  Rng rng(42);
  for (auto& v : input.vec()) v = static_cast<T>(rng.uniform());

  using clock = std::chrono::steady_clock;
  LatencyStats st;
  st.runs = runs;
  st.warmup = warmup;
  st.threads = threads;
  std::vector<double> decode_ms;
  for (int i = 0; i < warmup + runs; ++i) {
    const auto t0 = clock::now();
    const auto probs = nn::sigmoid(model.forward(input, nn::Mode::kEval));
    const auto t1 = clock::now();
    const auto preds = decode(std::span<const T>(probs.vec()), n_cells, n_classes);
    const auto t2 = clock::now();
    if (preds.size() != n_cells) throw Error("decode produced the wrong number of cells");
    const double total = std::chrono::duration<double, std::milli>(t2 - t0).count();
    if (i < warmup) {
      st.warmup_ms.push_back(total);
    } else {
      st.samples_ms.push_back(total);
      decode_ms.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
    }
  }
  st.median_ms = percentile(st.samples_ms, 0.5);
  st.p90_ms = percentile(st.samples_ms, 0.9);
  st.decode_median_ms = percentile(decode_ms, 0.5);
  return st;
}

inline std::string host_descriptor() {
  std::string compiler;
#if defined(__clang__)
  compiler = "clang " __clang_version__;
#elif defined(__GNUC__)
  compiler = detail::concat("gcc ", __GNUC__, ".", __GNUC_MINOR__);
#else
  compiler = "unknown compiler";
#endif
#ifdef NDEBUG
  const char* profile = "release";
#else
  const char* profile = "debug";
#endif
  return detail::concat(compiler, ", ", profile, " build, ", std::thread::hardware_concurrency(), " hw threads");
}

inline std::string format_cost_report(const CostReport& r, bool per_layer = false) {
  std::string out;
  char buf[200];
  if (per_layer) {
    std::snprintf(buf, sizeof buf, "%-28s %-8s %-18s %12s %14s\n", "layer", "kind", "output", "params", "FLOPs");
    out += buf;
    for (const auto& l : r.layers) {
      std::snprintf(buf, sizeof buf, "%-28s %-8s %-18s %12llu %14llu\n", l.name.c_str(), l.kind.c_str(),
                    shape_str(l.output).c_str(), static_cast<unsigned long long>(l.params),
                    static_cast<unsigned long long>(l.flops));
      out += buf;
    }
  }
  std::snprintf(buf, sizeof buf, "preset %s, input %dx%d\nparams: %llu (%.2fM)\nFLOPs: %llu (%.3fG, 1 MAC = 2 FLOPs)\n",
                r.preset.c_str(), r.input_size, r.input_size, static_cast<unsigned long long>(r.total_params),
                r.total_params / 1e6, static_cast<unsigned long long>(r.total_flops), r.total_flops / 1e9);
  out += buf;
  if (r.latency) {
    const auto& l = *r.latency;
    std::snprintf(buf, sizeof buf, "latency: median %.3f ms, p90 %.3f ms, decode %.4f ms (%d runs, %d warmup, %d thread)\n",
                  l.median_ms, l.p90_ms, l.decode_median_ms, l.runs, l.warmup, l.threads);
    out += buf;
  }
  out += "host: " + host_descriptor() + "\n";
  out += "reference (Raspberry Pi 4B, not reproduced): table1 preset 34.01 FPS fp16, 40.06 FPS int8 via ncnn\n";
  return out;
}

inline nlohmann::ordered_json cost_report_to_json(const CostReport& r) {
  nlohmann::ordered_json j;
  j["version"] = "yolic-cost/1";
  j["preset"] = r.preset;
  j["input_size"] = r.input_size;
  j["flops_convention"] = "1 MAC = 2 FLOPs";
  j["total_params"] = r.total_params;
  j["total_flops"] = r.total_flops;
  auto layers = nlohmann::ordered_json::array();
  for (const auto& l : r.layers) {
    layers.push_back({{"name", l.name}, {"kind", l.kind}, {"output", l.output}, {"params", l.params}, {"flops", l.flops}});
  }
  j["layers"] = std::move(layers);
  if (r.latency) {
    j["latency"] = {{"median_ms", r.latency->median_ms}, {"p90_ms", r.latency->p90_ms},
                    {"decode_median_ms", r.latency->decode_median_ms}, {"runs", r.latency->runs},
                    {"warmup", r.latency->warmup}, {"threads", r.latency->threads},
                    {"samples_ms", r.latency->samples_ms}};
  }
  j["host"] = host_descriptor();
  return j;
}

// ---------------------------------------------------------------------------
// INT8 post-training quantization: symmetric per-tensor scales, batch norm
// folded into the preceding convolution, activations kept in float.

struct QuantizedTensor {
  std::string name;
  Shape shape;
  std::vector<std::int8_t> values;
  float scale = 1.0f;

  float dequantize(std::size_t i) const { return static_cast<float>(values[i]) * scale; }
};

// scale = max|w| / 127; an all-zero tensor gets scale 1.
inline QuantizedTensor quantize_tensor(std::string name, const Tensor<float>& w) {
  QuantizedTensor q{std::move(name), w.shape(), std::vector<std::int8_t>(w.numel()), 1.0f};
  float max_abs = 0.0f;
  for (float v : w.vec()) max_abs = std::max(max_abs, std::abs(v));
  q.scale = max_abs > 0.0f ? max_abs / 127.0f : 1.0f;
  for (std::size_t i = 0; i < w.numel(); ++i) {
    const long r = std::lround(w[i] / q.scale);
    q.values[i] = static_cast<std::int8_t>(std::clamp(r, -127L, 127L));
  }
  return q;
}

inline Tensor<float> dequantize_tensor(const QuantizedTensor& q) {
  Tensor<float> out(q.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = q.dequantize(i);
  return out;
}

class QuantizedModel {
 public:
  QuantizedModel(ModelSpec folded_spec, std::vector<QuantizedTensor> qweights, std::vector<Param<float>> fparams)
      : runtime_(build_model<float>(folded_spec, 0)), qweights_(std::move(qweights)), fparams_(std::move(fparams)) {
    bind();
  }

  const ModelSpec& spec() const noexcept { return runtime_.spec(); }
  const std::vector<QuantizedTensor>& quantized() const noexcept { return qweights_; }
  const std::vector<Param<float>>& float_params() const noexcept { return fparams_; }

  // Logits for a (B,3,S,S) batch. Weights are dequantized from int8 on every call.
  Tensor<float> forward(const Tensor<float>& images) {
    for (const auto& [q, p] : qbound_) {
      for (std::size_t i = 0; i < p->value.numel(); ++i) p->value[i] = q->dequantize(i);
    }
    return runtime_.forward(images, nn::Mode::kEval);
  }

 private:
  void bind() {
    for (auto* p : runtime_.params()) {
      auto qi = std::find_if(qweights_.begin(), qweights_.end(), [&](const auto& q) { return q.name == p->name; });
      if (qi != qweights_.end()) {
        YOLIC_CHECK(qi->shape == p->value.shape(), FormatError, "quantized tensor ", p->name, " has wrong shape");
        qbound_.emplace_back(&*qi, p);
        continue;
      }
      auto fi = std::find_if(fparams_.begin(), fparams_.end(), [&](const auto& f) { return f.name == p->name; });
      YOLIC_CHECK(fi != fparams_.end(), FormatError, "quantized model lacks tensor ", p->name);
      YOLIC_CHECK(fi->value.shape() == p->value.shape(), FormatError, "tensor ", p->name, " has wrong shape");
      p->value = fi->value;
    }
  }

  YolicModel<float> runtime_;
  std::vector<std::pair<const QuantizedTensor*, Param<float>*>> qbound_;
  std::vector<QuantizedTensor> qweights_;
  std::vector<Param<float>> fparams_;
};

// Folds every conv -> batch-norm pair and returns the float inference-form
// tensors keyed by the folded model's parameter names.
inline std::vector<Param<float>> fold_batchnorm(YolicModel<float>& model) {
  std::vector<Param<float>> out;
  auto leaves = model.leaves();
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (auto* conv = dynamic_cast<Conv2d<float>*>(leaves[i])) {
      Tensor<float> w = conv->weight().value;
      const int cout = w.dim(0);
      Tensor<float> b = conv->has_bias() ? conv->bias().value : Tensor<float>({cout});
      auto* bn = i + 1 < leaves.size() ? dynamic_cast<BatchNorm2d<float>*>(leaves[i + 1]) : nullptr;
      if (bn) {
        const std::size_t per = w.numel() / static_cast<std::size_t>(cout);
        for (int c = 0; c < cout; ++c) {
          const auto uc = static_cast<std::size_t>(c);
          const double s = bn->gamma().value[uc] / std::sqrt(static_cast<double>(bn->running_var().value[uc]) + nn::kBatchNormEps);
          for (std::size_t k = 0; k < per; ++k) w[uc * per + k] = static_cast<float>(w[uc * per + k] * s);
          b[uc] = static_cast<float>((b[uc] - bn->running_mean().value[uc]) * s + bn->beta().value[uc]);
        }
      }
      out.push_back({conv->weight().name, std::move(w), {}, true});
      out.push_back({conv->name() + ".bias", std::move(b), {}, true});
    } else if (auto* fc = dynamic_cast<Linear<float>*>(leaves[i])) {
      out.push_back({fc->weight().name, fc->weight().value, {}, true});
      out.push_back({fc->bias().name, fc->bias().value, {}, true});
    }
  }
  return out;
}

inline QuantizedModel quantize_int8(YolicModel<float>& model) {
  ModelSpec folded = model.spec();
  folded.folded_bn = true;
  std::vector<QuantizedTensor> q;
  std::vector<Param<float>> f;
  for (auto& p : fold_batchnorm(model)) {
    if (p.name.ends_with(".weight")) {
      q.push_back(quantize_tensor(p.name, p.value));
    } else {
      f.push_back(std::move(p));
    }
  }
  return QuantizedModel(folded, std::move(q), std::move(f));
}

// Fraction of cells whose decided class sets agree between two probability batches.
inline double decode_agreement(const Tensor<float>& probs_a, const Tensor<float>& probs_b, std::size_t n_cells,
                               std::size_t n_classes) {
  YOLIC_CHECK(probs_a.shape() == probs_b.shape(), ShapeError, "decode_agreement: shape mismatch");
  const std::size_t C = n_cells * (n_classes + 1);
  const std::size_t B = probs_a.numel() / C;
  std::size_t agree = 0;
  for (std::size_t b = 0; b < B; ++b) {
    const auto pa = decode(std::span<const float>(probs_a.data() + b * C, C), n_cells, n_classes);
    const auto pb = decode(std::span<const float>(probs_b.data() + b * C, C), n_cells, n_classes);
    for (std::size_t i = 0; i < n_cells; ++i) agree += pa[i].decided == pb[i].decided;
  }
  return B ? static_cast<double>(agree) / static_cast<double>(B * n_cells) : 1.0;
}

// ---------------------------------------------------------------------------
// "yolic-weights-q8/1": magic line, JSON header, then each tensor's payload
// (int8 bytes or little-endian f32) in header order.

inline constexpr std::string_view kQuantWeightsVersion = "yolic-weights-q8/1";

inline std::string save_quantized(const QuantizedModel& qm, const std::string& config_name) {
  nlohmann::ordered_json header;
  header["spec"] = spec_to_json(qm.spec());
  header["config"] = config_name;
  header["C"] = qm.spec().n_outputs;
  auto tensors = nlohmann::ordered_json::array();
  std::string payload;
  for (const auto& q : qm.quantized()) {
    tensors.push_back({{"name", q.name}, {"shape", q.shape}, {"dtype", "i8"}, {"scale", q.scale}});
    payload.append(reinterpret_cast<const char*>(q.values.data()), q.values.size());
  }
  for (const auto& f : qm.float_params()) {
    tensors.push_back({{"name", f.name}, {"shape", f.value.shape()}, {"dtype", "f32"}});
    for (float v : f.value.vec()) detail::put_f32_le(payload, v);
  }
  header["tensors"] = std::move(tensors);
  header["payload_bytes"] = payload.size();
  return std::string(kQuantWeightsVersion) + "\n" + header.dump() + "\n" + payload;
}

inline QuantizedModel load_quantized(std::string_view bytes) {
  const auto parsed = detail::parse_container(bytes, kQuantWeightsVersion);
  const auto& h = parsed.header;
  YOLIC_CHECK(h.contains("spec") && h.contains("tensors") && h.contains("payload_bytes"), FormatError,
              "q8 weights: header lacks spec/tensors/payload_bytes");
  YOLIC_CHECK(parsed.payload.size() == h["payload_bytes"].get<std::size_t>(), FormatError,
              "q8 weights: truncated payload: expected ", h["payload_bytes"].get<std::size_t>(), " bytes, found ",
              parsed.payload.size());
  std::vector<QuantizedTensor> q;
  std::vector<Param<float>> f;
  std::size_t off = 0;
  for (const auto& t : h["tensors"]) {
    const auto shape = t.at("shape").get<Shape>();
    const std::size_t n = shape_numel(shape);
    const auto dtype = t.at("dtype").get<std::string>();
    if (dtype == "i8") {
      YOLIC_CHECK(off + n <= parsed.payload.size(), FormatError, "q8 weights: truncated payload");
      QuantizedTensor qt{t.at("name").get<std::string>(), shape, std::vector<std::int8_t>(n), t.at("scale").get<float>()};
      std::memcpy(qt.values.data(), parsed.payload.data() + off, n);
      off += n;
      q.push_back(std::move(qt));
    } else if (dtype == "f32") {
      YOLIC_CHECK(off + 4 * n <= parsed.payload.size(), FormatError, "q8 weights: truncated payload");
      Tensor<float> v(shape);
      for (std::size_t i = 0; i < n; ++i, off += 4) v[i] = detail::get_f32_le(parsed.payload.data() + off);
      f.push_back({t.at("name").get<std::string>(), std::move(v), {}, true});
    } else {
      throw FormatError(detail::concat("q8 weights: unknown dtype '", dtype, "'"));
    }
  }
  return QuantizedModel(spec_from_json(h["spec"]), std::move(q), std::move(f));
}

}  // namespace yolic
