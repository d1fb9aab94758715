// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "yolic/benchkit.hpp"

namespace yolic {
namespace {

Tensor<float> random_images(int batch, int size, std::uint64_t seed) {
  Tensor<float> x({batch, 3, size, size});
  Rng rng(seed);
  for (auto& v : x.vec()) v = static_cast<float>(rng.uniform());
  return x;
}

// Moves batch-norm statistics off their identity defaults so folding has work to do.
void perturb_batchnorm(YolicModel<float>& model, std::uint64_t seed) {
  Rng rng(seed);
  for (auto* p : model.params()) {
    const bool stat = p->name.ends_with(".running_mean") || p->name.ends_with(".running_var") ||
                      p->name.ends_with(".gamma") || p->name.ends_with(".beta");
    if (!stat) continue;
    const bool positive = p->name.ends_with(".running_var") || p->name.ends_with(".gamma");
    for (auto& v : p->value.vec()) {
      v = positive ? static_cast<float>(0.5 + rng.uniform()) : static_cast<float>(rng.uniform(-0.2, 0.2));
    }
  }
}

TEST(Cost, LinearLayer) {
  Linear<float> fc("fc", 2, 3);
  std::vector<LayerCost> out;
  const auto shape = fc.describe({1, 2}, out);
  EXPECT_EQ(shape, (Shape{1, 3}));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].params, 9u);
  EXPECT_EQ(out[0].flops, 12u);
}

TEST(Cost, PointwiseConv) {
  Conv2d<float> conv("c", 2, 3, 1, {1, 0, 1}, false);
  std::vector<LayerCost> out;
  conv.describe({1, 2, 1, 1}, out);
  EXPECT_EQ(out[0].params, 6u);
  EXPECT_EQ(out[0].flops, 12u);
  out.clear();
  conv.describe({1, 2, 2, 2}, out);
  EXPECT_EQ(out[0].flops, 48u);
}

TEST(Cost, GroupedConvDividesByGroups) {
  Conv2d<float> dense("d", 4, 4, 3, {1, 1, 1}, false);
  Conv2d<float> dw("w", 4, 4, 3, {1, 1, 4}, false);
  std::vector<LayerCost> a, b;
  dense.describe({1, 4, 5, 5}, a);
  dw.describe({1, 4, 5, 5}, b);
  EXPECT_EQ(a[0].flops, 4 * b[0].flops);
  EXPECT_EQ(a[0].params, 4 * b[0].params);
}

TEST(Cost, TotalsAreLayerSums) {
  auto model = build_model<float>(ModelSpec::tiny(12), 1);
  const auto r = cost_report(model);
  std::uint64_t params = 0, flops = 0;
  for (const auto& l : r.layers) {
    params += l.params;
    flops += l.flops;
  }
  EXPECT_EQ(r.total_params, params);
  EXPECT_EQ(r.total_flops, flops);
  EXPECT_EQ(count_params(model).total_params, params);
}

TEST(Cost, ParamsMatchTrainableTensors) {
  for (const auto& spec : {ModelSpec::tiny(12), ModelSpec::table1(1248)}) {
    auto model = build_model<float>(spec, 1);
    std::uint64_t n = 0;
    for (auto* p : model.params()) n += p->trainable ? p->value.numel() : 0;
    EXPECT_EQ(count_params(model).total_params, n) << spec.preset;
  }
}

TEST(Cost, FlopsScaleQuadraticallyWithInput) {
  auto model = build_model<float>(ModelSpec::table1(1248), 1);
  const auto a = count_flops(model, 224).total_flops;
  const auto b = count_flops(model, 448).total_flops;
  const double ratio = static_cast<double>(b) / static_cast<double>(a);
  EXPECT_GT(ratio, 3.9);
  EXPECT_LT(ratio, 4.0);
}

TEST(Cost, ReportFormats) {
  auto model = build_model<float>(ModelSpec::tiny(12), 1);
  auto r = cost_report(model);
  const auto text = format_cost_report(r, true);
  EXPECT_NE(text.find("params:"), std::string::npos);
  EXPECT_NE(text.find("stem"), std::string::npos);
  const auto j = cost_report_to_json(r);
  EXPECT_EQ(j["total_params"], r.total_params);
  EXPECT_EQ(j["layers"].size(), r.layers.size());
}

TEST(Latency, MedianOrderingAndWarmup) {
  auto model = build_model<float>(ModelSpec::tiny(12, 32), 1);
  const auto st = bench_latency(model, 4, 2, 5, 2);
  EXPECT_EQ(st.samples_ms.size(), 5u);
  EXPECT_EQ(st.warmup_ms.size(), 2u);
  EXPECT_GT(st.median_ms, 0.0);
  EXPECT_LE(st.median_ms, st.p90_ms);
  EXPECT_LE(st.decode_median_ms, st.median_ms);
}

TEST(Latency, Rejections) {
  auto model = build_model<float>(ModelSpec::tiny(12, 32), 1);
  EXPECT_THROW(bench_latency(model, 4, 2, 4, 2), Error);
  EXPECT_THROW(bench_latency(model, 4, 2, 5, 1), Error);
  EXPECT_THROW(bench_latency(model, 4, 2, 5, 2, 2), Error);
  EXPECT_THROW(bench_latency(model, 5, 2, 5, 2), MismatchError);
}

TEST(Percentile, Interpolates) {
  EXPECT_EQ(percentile({3, 1, 2}, 0.5), 2.0);
  EXPECT_EQ(percentile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_EQ(percentile({}, 0.5), 0.0);
}

TEST(Quantize, KnownScale) {
  Tensor<float> w({3});
  w[0] = 0.5f;
  w[1] = -1.27f;
  w[2] = 0.0f;
  const auto q = quantize_tensor("w", w);
  EXPECT_FLOAT_EQ(q.scale, 0.01f);
  EXPECT_EQ(q.values[0], 50);
  EXPECT_EQ(q.values[1], -127);
  EXPECT_EQ(q.values[2], 0);
}

TEST(Quantize, ErrorBoundedByHalfScale) {
  Rng rng(5);
  Tensor<float> w({1000});
  for (auto& v : w.vec()) v = static_cast<float>(rng.uniform(-3.0, 3.0));
  const auto q = quantize_tensor("w", w);
  const auto d = dequantize_tensor(q);
  for (std::size_t i = 0; i < w.numel(); ++i) EXPECT_LE(std::abs(d[i] - w[i]), q.scale / 2 * 1.0001f);
}

TEST(Quantize, Idempotent) {
  Rng rng(6);
  Tensor<float> w({64});
  for (auto& v : w.vec()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  const auto q1 = quantize_tensor("w", w);
  const auto q2 = quantize_tensor("w", dequantize_tensor(q1));
  EXPECT_EQ(q1.values, q2.values);
}

TEST(Quantize, AllZeroTensor) {
  const auto q = quantize_tensor("w", Tensor<float>({4}));
  EXPECT_EQ(q.scale, 1.0f);
  for (auto v : q.values) EXPECT_EQ(v, 0);
}

TEST(Quantize, BatchNormFoldingPreservesOutputs) {
  auto model = build_model<float>(ModelSpec::tiny(12, 32), 2);
  perturb_batchnorm(model, 3);
  ModelSpec folded = model.spec();
  folded.folded_bn = true;
  auto runtime = build_model<float>(folded, 0);
  const auto tensors = fold_batchnorm(model);
  for (auto* p : runtime.params()) {
    auto it = std::find_if(tensors.begin(), tensors.end(), [&](const auto& t) { return t.name == p->name; });
    ASSERT_NE(it, tensors.end()) << p->name;
    p->value = it->value;
  }
  const auto x = random_images(2, 32, 4);
  const auto a = model.forward(x, nn::Mode::kEval);
  const auto b = runtime.forward(x, nn::Mode::kEval);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-4);
}

TEST(Quantize, Int8ModelAgreesWithFloat) {
  auto model = build_model<float>(ModelSpec::tiny(12, 32), 2);
  perturb_batchnorm(model, 5);
  auto qm = quantize_int8(model);
  const auto x = random_images(8, 32, 6);
  const auto pf = nn::sigmoid(model.forward(x, nn::Mode::kEval));
  const auto pq = nn::sigmoid(qm.forward(x));
  EXPECT_GE(decode_agreement(pf, pq, 4, 2), 0.9);
  EXPECT_EQ(decode_agreement(pf, pf, 4, 2), 1.0);
}

TEST(Quantize, FileRoundTrip) {
  auto model = build_model<float>(ModelSpec::tiny(12, 32), 2);
  auto qm = quantize_int8(model);
  const auto bytes = save_quantized(qm, "grid2x2");
  auto back = load_quantized(bytes);
  EXPECT_EQ(back.spec(), qm.spec());
  ASSERT_EQ(back.quantized().size(), qm.quantized().size());
  for (std::size_t i = 0; i < qm.quantized().size(); ++i) {
    EXPECT_EQ(back.quantized()[i].values, qm.quantized()[i].values);
    EXPECT_EQ(back.quantized()[i].scale, qm.quantized()[i].scale);
  }
  const auto x = random_images(1, 32, 7);
  const auto a = qm.forward(x), b = back.forward(x);
  EXPECT_EQ(a.vec(), b.vec());
  EXPECT_EQ(save_quantized(back, "grid2x2"), bytes);
}

TEST(Quantize, CorruptFiles) {
  auto model = build_model<float>(ModelSpec::tiny(12, 32), 2);
  const auto bytes = save_quantized(quantize_int8(model), "grid2x2");
  EXPECT_THROW(load_quantized(bytes.substr(0, bytes.size() - 10)), FormatError);
  EXPECT_THROW(load_quantized("yolic-weights/1\n{}\n"), FormatError);
}

}  // namespace
}  // namespace yolic
