// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>
#include <string>

#include "convoracle.hpp"
#include "yolic/cellgeom.hpp"
#include "yolic/image.hpp"
#include "yolic/labelkit.hpp"

namespace yolic {
namespace {

CellConfig grid(int rows, int cols, int classes) {
  CellConfig cfg;
  cfg.name = "grid";
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      cfg.cells.emplace_back(Rect{double(c) / cols, double(r) / rows, double(c + 1) / cols, double(r + 1) / rows});
    }
  }
  for (int k = 0; k < classes; ++k) cfg.class_names.push_back("c" + std::to_string(k));
  return cfg;
}

CellConfig shipped(const std::string& name) {
  return load_config(read_file(std::string(YOLIC_CONFIG_DIR) + "/" + name + ".json"));
}

TEST(MaskToLabels, UniformMaskSaturates) {
  const auto cfg = shipped("indoor30");
  const auto cells = rasterize(cfg, 64, 64);
  const auto labels = mask_to_labels(ClassIdMask(64, 64, 0), cells, cfg.num_classes());
  for (std::size_t i = 0; i < cfg.num_cells(); ++i) {
    EXPECT_TRUE(labels.get(i, 0));
    for (std::size_t k = 1; k <= cfg.num_classes(); ++k) EXPECT_FALSE(labels.get(i, k));
  }
}

TEST(MaskToLabels, TopLeftBlock) {
  const auto cfg = grid(2, 2, 1);
  ClassIdMask mask(4, 4);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) mask.at(r, c) = 0;
  }
  const auto labels = mask_to_labels(mask, rasterize(cfg, 4, 4), 1, 0.05);
  EXPECT_TRUE(labels.get(0, 0));
  EXPECT_FALSE(labels.is_background(0));
  for (std::size_t i = 1; i < 4; ++i) {
    EXPECT_FALSE(labels.get(i, 0));
    EXPECT_TRUE(labels.is_background(i));
  }
}

TEST(MaskToLabels, CoverageBoundary) {
  const auto cfg = grid(1, 1, 1);
  const auto cells = rasterize(cfg, 10, 10);
  ClassIdMask mask(10, 10);
  for (int c = 0; c < 4; ++c) mask.at(0, c) = 0;
  EXPECT_FALSE(mask_to_labels(mask, cells, 1, 0.05).get(0, 0));
  mask.at(0, 4) = 0;
  EXPECT_TRUE(mask_to_labels(mask, cells, 1, 0.05).get(0, 0));
}

TEST(MaskToLabels, SentinelCountsTowardArea) {
  const auto cfg = grid(1, 1, 2);
  const auto cells = rasterize(cfg, 10, 10);
  ClassIdMask mask(10, 10);
  mask.at(3, 3) = 1;
  const auto labels = mask_to_labels(mask, cells, 2, 0.05);
  EXPECT_FALSE(labels.get(0, 1));
  EXPECT_TRUE(labels.is_background(0));
  mask.at(9, 9) = 2;
  EXPECT_THROW(mask_to_labels(mask, cells, 2, 0.05), Error);
}

TEST(MaskToLabels, Errors) {
  const auto cfg = grid(2, 2, 1);
  const auto cells = rasterize(cfg, 4, 4);
  EXPECT_THROW(mask_to_labels(ClassIdMask(5, 4), cells, 1), ShapeError);
  EXPECT_THROW(mask_to_labels(ClassIdMask(4, 4), cells, 1, 0.0), Error);
  EXPECT_THROW(mask_to_labels(ClassIdMask(4, 4), cells, 1, 1.5), Error);
}

TEST(MaskToLabels, ExhaustiveOracle) {
  const auto r = convoracle::run(1000, 5);
  EXPECT_EQ(r.checked, 1000);
  EXPECT_EQ(r.mismatches, 0) << "first mismatch at case " << r.first_mismatch;
}

TEST(MaskToLabels, ExclusivityAndTauMonotonicity) {
  const auto cfg = shipped("indoor30");
  const auto cells = rasterize(cfg, 48, 48);
  SynthParams p;
  p.width = p.height = 48;
  p.n_classes = 6;
  p.max_shapes = 6;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto scene = synth_scene(p, seed);
    CellLabelVector prev;
    for (double tau : {0.01, 0.05, 0.1, 0.3, 0.6, 1.0}) {
      const auto cur = mask_to_labels(scene.mask, cells, 6, tau);
      EXPECT_TRUE(cur.consistent());
      if (prev.size()) {
        for (std::size_t i = 0; i < cur.n_cells(); ++i) {
          for (std::size_t k = 0; k < 6; ++k) EXPECT_LE(cur.get(i, k), prev.get(i, k));
        }
      }
      prev = cur;
    }
  }
}

TEST(Annotation, ExactText) {
  CellLabelVector labels(2, 2);
  labels.set(0, 0, true);
  labels.set(1, 2, true);
  EXPECT_EQ(write_annotation(labels), "yolic-ann/1 2 2\n1 0 0\n0 0 1\n");
}

TEST(Annotation, RoundTrip) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng() % 40, m = 1 + rng() % 11;
    CellLabelVector labels(n, m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < m; ++k) labels.set(i, k, rng() % 4 == 0);
      labels.derive_background(i);
    }
    EXPECT_EQ(read_annotation(write_annotation(labels), n, m), labels);
  }
}

TEST(Annotation, WrongLineCountNamesExpected) {
  const auto cfg = shipped("indoor30");
  std::string text = "yolic-ann/1 30 6\n";
  for (int i = 0; i < 29; ++i) text += "0 0 0 0 0 0 1\n";
  try {
    read_annotation(text, cfg);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("expected 30"), std::string::npos) << e.what();
  }
}

std::string error_of(const std::string& text, std::size_t n, std::size_t m) {
  try {
    read_annotation(text, n, m);
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

TEST(Annotation, DiagnosticsNameLines) {
  EXPECT_NE(error_of("yolic-ann/1 2 1\n0 1\n2 0\n", 2, 1).find("line 3"), std::string::npos);
  EXPECT_NE(error_of("yolic-ann/1 2 1\n0 1 0\n1 0\n", 2, 1).find("line 2"), std::string::npos);
  EXPECT_NE(error_of("yolic-ann/1 2 1\n0 1\n1 1\n", 2, 1).find("line 3"), std::string::npos);
  EXPECT_NE(error_of("yolic-ann/1 2 1\n0 1\n0 0\n", 2, 1).find("line 3"), std::string::npos);
  EXPECT_NE(error_of("garbage\n", 2, 1).find("line 1"), std::string::npos);
}

TEST(Annotation, HeaderMismatch) {
  EXPECT_THROW(read_annotation("yolic-ann/1 2 2\n1 0 0\n0 0 1\n", 2, 3), MismatchError);
  EXPECT_THROW(read_annotation("yolic-ann/1 3 2\n1 0 0\n0 0 1\n", 2, 2), MismatchError);
}

TEST(Synth, ZeroShapesIsAllSentinel) {
  SynthParams p;
  p.max_shapes = 0;
  const auto scene = synth_scene(p, 9);
  EXPECT_TRUE(scene.shapes.empty());
  EXPECT_EQ(scene.mask, ClassIdMask(p.width, p.height));
}

TEST(Synth, Deterministic) {
  SynthParams p;
  const auto a = synth_scene(p, 42), b = synth_scene(p, 42);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.mask, b.mask);
}

TEST(Synth, SingleRectangle) {
  ClassIdMask mask(16, 16);
  Image img(16, 16, 0.5f);
  const PaintedShape s{ShapeKind::kRect, 2, 3, 4, 9, 7};
  paint_shapes(std::span(&s, 1), img, mask);
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) {
      const bool in = c >= 3 && c < 9 && r >= 4 && r < 7;
      EXPECT_EQ(mask.at(r, c), in ? 2 : kIgnoreId);
    }
  }
}

TEST(Synth, MaskAgreesWithGeometry) {
  SynthParams p;
  p.n_classes = 4;
  p.max_shapes = 5;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto scene = synth_scene(p, seed);
    ClassIdMask expect(p.width, p.height);
    for (const auto& s : scene.shapes) {
      const double cx = 0.5 * (s.x0 + s.x1), cy = 0.5 * (s.y0 + s.y1);
      const double rx = 0.5 * (s.x1 - s.x0), ry = 0.5 * (s.y1 - s.y0);
      for (int r = s.y0; r < s.y1; ++r) {
        for (int c = s.x0; c < s.x1; ++c) {
          const double dx = (c + 0.5 - cx) / rx, dy = (r + 0.5 - cy) / ry;
          if (s.kind == ShapeKind::kRect || dx * dx + dy * dy <= 1.0) expect.at(r, c) = static_cast<std::uint8_t>(s.cls);
        }
      }
    }
    EXPECT_EQ(scene.mask, expect) << "seed " << seed;
    for (int r = 0; r < p.height; ++r) {
      for (int c = 0; c < p.width; ++c) {
        if (expect.at(r, c) == kIgnoreId) continue;
        const auto col = class_color(expect.at(r, c));
        for (int ch = 0; ch < 3; ++ch) EXPECT_EQ(scene.image.at(r, c, ch), col[static_cast<std::size_t>(ch)]);
      }
    }
  }
}

TEST(Flip, ObjectMovesToMirrorCell) {
  const auto cfg = grid(2, 2, 1);
  const auto perm = mirror_config(cfg).perm;
  CellLabelVector labels = CellLabelVector::background(4, 1);
  labels.set(0, 0, true);
  labels.derive_background(0);
  const auto out = flip_example(Image(4, 4), labels, perm);
  EXPECT_TRUE(out.labels.get(1, 0));
  for (std::size_t i : {0u, 2u, 3u}) EXPECT_TRUE(out.labels.is_background(i));
  EXPECT_EQ(flip_example(out.image, out.labels, perm).labels, labels);
}

TEST(Flip, ImageColumnsReversed) {
  Image img(3, 2);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = float(i) / 18.0f;
  const auto f = flip_image(img);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) {
      for (int ch = 0; ch < 3; ++ch) EXPECT_EQ(f.at(r, c, ch), img.at(r, 2 - c, ch));
    }
  }
  EXPECT_EQ(flip_image(f), img);
}

TEST(Flip, CommutesWithConversion) {
  for (const char* name : {"grid2x2", "outdoor104", "cityscapes256"}) {
    const auto cfg = shipped(name);
    const auto perm = mirror_config(cfg).perm;
    ASSERT_TRUE(perm);
    const auto cells = rasterize(cfg, 96, 96);
    SynthParams p;
    p.width = p.height = 96;
    p.n_classes = static_cast<int>(cfg.num_classes());
    p.max_shapes = 6;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto scene = synth_scene(p, seed);
      const auto direct = mask_to_labels(flip_mask(scene.mask), cells, cfg.num_classes());
      const auto via = flip_example(scene.image, mask_to_labels(scene.mask, cells, cfg.num_classes()), perm);
      EXPECT_EQ(direct, via.labels) << name << " seed " << seed;
    }
  }
}

TEST(Flip, RefusedWithoutPermutation) {
  EXPECT_THROW(flip_example(Image(2, 2), CellLabelVector::background(1, 1), std::nullopt), Error);
  const std::vector<std::size_t> short_perm{0};
  EXPECT_THROW(permute_cells(CellLabelVector::background(2, 1), short_perm), MismatchError);
}

TEST(Jitter, ZeroStrengthIsIdentity) {
  SynthParams p;
  const auto img = synth_scene(p, 1).image;
  EXPECT_EQ(color_jitter(img, 0.0, 99), img);
}

TEST(Jitter, StaysInRangeAndIsDeterministic) {
  SynthParams p;
  const auto img = synth_scene(p, 2).image;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto out = color_jitter(img, 1.0, seed);
    for (float v : out.rgb) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
    EXPECT_EQ(out, color_jitter(img, 1.0, seed));
  }
  EXPECT_NE(color_jitter(img, 0.4, 1), color_jitter(img, 0.4, 2));
  EXPECT_THROW(color_jitter(img, 1.5, 0), Error);
}

TEST(Jitter, AffinePerChannel) {
  Image img(2, 1);
  img.rgb = {0.5f, 0.5f, 0.5f, 0.5f, 0.5f, 0.5f};
  const double s = 0.2;
  const auto out = color_jitter(img, s, 7);
  for (int ch = 0; ch < 3; ++ch) {
    EXPECT_EQ(out.at(0, 0, ch), out.at(0, 1, ch));
    EXPECT_GE(out.at(0, 0, ch), 0.5 * (1 - s) - s / 4 - 1e-6);
    EXPECT_LE(out.at(0, 0, ch), 0.5 * (1 + s) + s / 4 + 1e-6);
  }
}

}  // namespace
}  // namespace yolic
