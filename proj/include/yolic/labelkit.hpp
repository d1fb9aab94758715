// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

// Per-cell multi-label ground truth: conversion from pixel masks, the
// coordinate-free annotation format, synthetic scenes and label-aware
// augmentation.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "yolic/cellgeom.hpp"
#include "yolic/common.hpp"
#include "yolic/image.hpp"

namespace yolic {

inline constexpr std::string_view kAnnotationVersion = "yolic-ann/1";
inline constexpr double kDefaultCoverage = 0.05;

// N x (M + 1) bits; within a cell block indices 0..M-1 are object classes and
// index M is background.
class CellLabelVector {
 public:
  CellLabelVector() = default;
  CellLabelVector(std::size_t n_cells, std::size_t n_classes)
      : n_cells_(n_cells), n_classes_(n_classes), bits_(n_cells * (n_classes + 1), 0) {}

  // Every cell background.
  static CellLabelVector background(std::size_t n_cells, std::size_t n_classes) {
    CellLabelVector v(n_cells, n_classes);
    for (std::size_t i = 0; i < n_cells; ++i) v.set(i, n_classes, true);
    return v;
  }

  std::size_t n_cells() const noexcept { return n_cells_; }
  std::size_t n_classes() const noexcept { return n_classes_; }
  std::size_t block() const noexcept { return n_classes_ + 1; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool get(std::size_t cell, std::size_t k) const { return bits_[cell * block() + k] != 0; }
  void set(std::size_t cell, std::size_t k, bool v) { bits_[cell * block() + k] = v ? 1 : 0; }
  bool is_background(std::size_t cell) const { return get(cell, n_classes_); }
  bool has_object(std::size_t cell) const {
    for (std::size_t k = 0; k < n_classes_; ++k) {
      if (get(cell, k)) return true;
    }
    return false;
  }

  // Background bit from the object bits.
  void derive_background(std::size_t cell) { set(cell, n_classes_, !has_object(cell)); }

  // True when every block has background = 1 iff no object bit.
  bool consistent() const {
    for (std::size_t i = 0; i < n_cells_; ++i) {
      if (is_background(i) == has_object(i)) return false;
    }
    return true;
  }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::span<std::uint8_t> bits() noexcept { return bits_; }

  friend bool operator==(const CellLabelVector&, const CellLabelVector&) = default;

 private:
  std::size_t n_cells_ = 0;
  std::size_t n_classes_ = 0;
  std::vector<std::uint8_t> bits_;
};

// ---------------------------------------------------------------------------
// Pixel mask -> cell labels

inline CellLabelVector mask_to_labels(const ClassIdMask& mask, const CellMaskSet& cells, std::size_t n_classes,
                                      double tau = kDefaultCoverage) {
  YOLIC_CHECK(mask.width == cells.width && mask.height == cells.height, ShapeError, "mask is ", mask.width, "x",
              mask.height, " but cells were rasterized at ", cells.width, "x", cells.height);
  YOLIC_CHECK(tau > 0.0 && tau <= 1.0, Error, "coverage threshold must be in (0,1], got ", tau);

  CellLabelVector out(cells.masks.size(), n_classes);
  std::vector<std::size_t> counts(n_classes);
  for (std::size_t i = 0; i < cells.masks.size(); ++i) {
    const auto& cm = cells.masks[i];
    std::fill(counts.begin(), counts.end(), 0);
    std::size_t area = 0;
    for (std::size_t p = 0; p < cm.size(); ++p) {
      if (!cm[p]) continue;
      ++area;
      const auto id = mask.ids[p];
      if (id != kIgnoreId) {
        YOLIC_CHECK(id < n_classes, Error, "mask class id ", int(id), " is not below M = ", n_classes);
        ++counts[id];
      }
    }
    YOLIC_CHECK(area > 0, Error, "cell ", i, " is empty");
    for (std::size_t k = 0; k < n_classes; ++k) {
      out.set(i, k, static_cast<double>(counts[k]) / static_cast<double>(area) >= tau);
    }
    out.derive_background(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// "yolic-ann/1": header line then one line of M+1 bits per cell.

inline std::string write_annotation(const CellLabelVector& labels) {
  std::string out = detail::concat(kAnnotationVersion, " ", labels.n_cells(), " ", labels.n_classes(), "\n");
  out.reserve(out.size() + labels.size() * 2);
  for (std::size_t i = 0; i < labels.n_cells(); ++i) {
    for (std::size_t k = 0; k < labels.block(); ++k) {
      if (k) out.push_back(' ');
      out.push_back(labels.get(i, k) ? '1' : '0');
    }
    out.push_back('\n');
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  while (!lines.empty() && lines.back().find_first_not_of(" \t") == std::string::npos) lines.pop_back();
  return lines;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream iss(line);
  std::vector<std::string> toks;
  for (std::string t; iss >> t;) toks.push_back(t);
  return toks;
}

}  // namespace detail

// Header of an annotation document, parsed without a config.
struct AnnotationHeader {
  std::size_t n_cells = 0;
  std::size_t n_classes = 0;
};

inline AnnotationHeader read_annotation_header(std::string_view text) {
  const auto lines = detail::split_lines(text);
  YOLIC_CHECK(!lines.empty(), FormatError, "annotation line 1: empty document");
  const auto head = detail::split_ws(lines[0]);
  YOLIC_CHECK(head.size() == 3 && head[0] == kAnnotationVersion, FormatError, "annotation line 1: expected '",
              kAnnotationVersion, " N M'");
  try {
    return {std::stoul(head[1]), std::stoul(head[2])};
  } catch (const std::exception&) {
    throw FormatError("annotation line 1: N and M must be integers");
  }
}

// Validates against the expected N and M. Header disagreement raises
// MismatchError; malformed bodies raise FormatError naming the line.
inline CellLabelVector read_annotation(std::string_view text, std::size_t n_cells, std::size_t n_classes) {
  const auto header = read_annotation_header(text);
  YOLIC_CHECK(header.n_cells == n_cells && header.n_classes == n_classes, MismatchError,
              "annotation line 1: header declares N=", header.n_cells, " M=", header.n_classes,
              " but the config has N=", n_cells, " M=", n_classes);
  const auto lines = detail::split_lines(text);
  YOLIC_CHECK(lines.size() - 1 == n_cells, FormatError, "annotation: expected ", n_cells, " cell lines, found ",
              lines.size() - 1);

  CellLabelVector out(n_cells, n_classes);
  for (std::size_t i = 0; i < n_cells; ++i) {
    const std::size_t line_no = i + 2;
    const auto toks = detail::split_ws(lines[i + 1]);
    YOLIC_CHECK(toks.size() == n_classes + 1, FormatError, "annotation line ", line_no, ": expected ", n_classes + 1,
                " bits, found ", toks.size());
    for (std::size_t k = 0; k < toks.size(); ++k) {
      YOLIC_CHECK(toks[k] == "0" || toks[k] == "1", FormatError, "annotation line ", line_no, ": token '", toks[k],
                  "' is not 0 or 1");
      out.set(i, k, toks[k] == "1");
    }
    YOLIC_CHECK(out.is_background(i) != out.has_object(i), FormatError, "annotation line ", line_no,
                ": background bit must be 1 exactly when no object bit is set");
  }
  return out;
}

inline CellLabelVector read_annotation(std::string_view text, const CellConfig& cfg) {
  return read_annotation(text, cfg.num_cells(), cfg.num_classes());
}

// ---------------------------------------------------------------------------
// Synthetic scenes

struct SynthParams {
  int width = 64;
  int height = 64;
  int n_classes = 2;
  int min_shapes = 0;
  int max_shapes = 3;
  double min_extent = 0.15;  // shape side as a fraction of the image side
  double max_extent = 0.45;
  double ellipse_fraction = 0.5;
  double noise = 0.04;
};

enum class ShapeKind { kRect, kEllipse };

// Pixel-space geometry of one painted shape: rect covers [x0,x1) x [y0,y1);
// ellipse covers centers inside the ellipse inscribed in that box.
struct PaintedShape {
  ShapeKind kind = ShapeKind::kRect;
  int cls = 0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

struct SyntheticScene {
  Image image;
  ClassIdMask mask;
  std::vector<PaintedShape> shapes;
  std::uint64_t seed = 0;
};

inline std::array<float, 3> class_color(int cls) {
  static constexpr std::array<std::array<float, 3>, 12> kPalette{{
      {0.90f, 0.10f, 0.10f}, {0.10f, 0.80f, 0.15f}, {0.15f, 0.25f, 0.95f}, {0.95f, 0.85f, 0.05f},
      {0.85f, 0.10f, 0.85f}, {0.05f, 0.85f, 0.90f}, {1.00f, 0.55f, 0.00f}, {0.45f, 0.00f, 0.65f},
      {0.00f, 0.45f, 0.35f}, {0.60f, 0.30f, 0.05f}, {1.00f, 0.60f, 0.75f}, {0.55f, 0.75f, 0.00f},
  }};
  if (cls < static_cast<int>(kPalette.size())) return kPalette[static_cast<std::size_t>(cls)];
  const auto h = mix64(static_cast<std::uint64_t>(cls));
  return {static_cast<float>(to_unit(h)), static_cast<float>(to_unit(mix64(h))),
          static_cast<float>(to_unit(mix64(h + 1)))};
}

inline bool shape_covers(const PaintedShape& s, int row, int col) {
  if (col < s.x0 || col >= s.x1 || row < s.y0 || row >= s.y1) return false;
  if (s.kind == ShapeKind::kRect) return true;
  const double cx = 0.5 * (s.x0 + s.x1), cy = 0.5 * (s.y0 + s.y1);
  const double rx = 0.5 * (s.x1 - s.x0), ry = 0.5 * (s.y1 - s.y0);
  const double dx = (col + 0.5 - cx) / rx, dy = (row + 0.5 - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

// Paints shapes in order over the background; later shapes occlude earlier ones.
inline void paint_shapes(std::span<const PaintedShape> shapes, Image& image, ClassIdMask& mask) {
  for (const auto& s : shapes) {
    const auto color = class_color(s.cls);
    for (int r = std::max(0, s.y0); r < std::min(mask.height, s.y1); ++r) {
      for (int c = std::max(0, s.x0); c < std::min(mask.width, s.x1); ++c) {
        if (!shape_covers(s, r, c)) continue;
        mask.at(r, c) = static_cast<std::uint8_t>(s.cls);
        for (int ch = 0; ch < 3; ++ch) image.at(r, c, ch) = color[static_cast<std::size_t>(ch)];
      }
    }
  }
}

inline SyntheticScene synth_scene(const SynthParams& p, std::uint64_t seed) {
  YOLIC_CHECK(p.n_classes >= 1 && p.n_classes < kIgnoreId, Error, "synthetic scenes need 1 <= M < 255");
  YOLIC_CHECK(p.width >= 1 && p.height >= 1, Error, "synthetic scene size must be positive");
  YOLIC_CHECK(p.min_shapes >= 0 && p.max_shapes >= p.min_shapes, Error, "bad shape count range");
  Rng rng(seed);
  SyntheticScene scene{Image(p.width, p.height), ClassIdMask(p.width, p.height), {}, seed};

  // Low-frequency gray texture plus per-pixel noise.
  const double base = rng.uniform(0.35, 0.6);
  const double fx = rng.uniform(1.0, 4.0), fy = rng.uniform(1.0, 4.0), phase = rng.uniform(0.0, 6.283185307179586);
  Rng noise(mix64(seed ^ 0x5eedULL));
  for (int r = 0; r < p.height; ++r) {
    for (int c = 0; c < p.width; ++c) {
      const double wave = 0.08 * std::sin(fx * 6.283185307179586 * c / p.width + phase) *
                          std::cos(fy * 6.283185307179586 * r / p.height);
      for (int ch = 0; ch < 3; ++ch) {
        const double v = base + wave + p.noise * (noise.uniform() - 0.5) * 2.0;
        scene.image.at(r, c, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }

  const auto count = rng.integer(p.min_shapes, p.max_shapes);
  for (std::int64_t s = 0; s < count; ++s) {
    PaintedShape shape;
    shape.kind = rng.uniform() < p.ellipse_fraction ? ShapeKind::kEllipse : ShapeKind::kRect;
    shape.cls = static_cast<int>(rng.integer(0, p.n_classes - 1));
    const int w = std::max(1, static_cast<int>(std::lround(rng.uniform(p.min_extent, p.max_extent) * p.width)));
    const int h = std::max(1, static_cast<int>(std::lround(rng.uniform(p.min_extent, p.max_extent) * p.height)));
    shape.x0 = static_cast<int>(rng.integer(0, std::max(0, p.width - w)));
    shape.y0 = static_cast<int>(rng.integer(0, std::max(0, p.height - h)));
    shape.x1 = std::min(p.width, shape.x0 + w);
    shape.y1 = std::min(p.height, shape.y0 + h);
    scene.shapes.push_back(shape);
  }
  paint_shapes(scene.shapes, scene.image, scene.mask);
  return scene;
}

// ---------------------------------------------------------------------------
// Augmentation

inline Image flip_image(const Image& img) {
  Image out(img.width, img.height);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = img.at(r, img.width - 1 - c, ch);
    }
  }
  return out;
}

inline ClassIdMask flip_mask(const ClassIdMask& m) {
  ClassIdMask out(m.width, m.height);
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) out.at(r, c) = m.at(r, m.width - 1 - c);
  }
  return out;
}

// Cell i of the result takes the block of cell perm[i].
inline CellLabelVector permute_cells(const CellLabelVector& labels, std::span<const std::size_t> perm) {
  YOLIC_CHECK(perm.size() == labels.n_cells(), MismatchError, "mirror permutation has ", perm.size(),
              " entries for ", labels.n_cells(), " cells");
  CellLabelVector out(labels.n_cells(), labels.n_classes());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (std::size_t k = 0; k < labels.block(); ++k) out.set(i, k, labels.get(perm[i], k));
  }
  return out;
}

struct LabeledImage {
  Image image;
  CellLabelVector labels;
};

inline LabeledImage flip_example(const Image& image, const CellLabelVector& labels,
                                 const std::optional<std::vector<std::size_t>>& perm) {
  YOLIC_CHECK(perm.has_value(), Error, "horizontal flip refused: the cell configuration has no mirror permutation");
  return {flip_image(image), permute_cells(labels, *perm)};
}

inline Image color_jitter(const Image& img, double strength, std::uint64_t seed) {
  YOLIC_CHECK(strength >= 0.0 && strength <= 1.0, Error, "jitter strength must be in [0,1], got ", strength);
  if (strength == 0.0) return img;
  Rng rng(seed);
  std::array<float, 3> gain{}, bias{};
  for (int ch = 0; ch < 3; ++ch) {
    gain[static_cast<std::size_t>(ch)] = static_cast<float>(rng.uniform(1.0 - strength, 1.0 + strength));
    bias[static_cast<std::size_t>(ch)] = static_cast<float>(rng.uniform(-strength / 4.0, strength / 4.0));
  }
  Image out = img;
  for (std::size_t i = 0; i < out.rgb.size(); ++i) {
    const auto ch = i % 3;
    out.rgb[i] = std::clamp(out.rgb[i] * gain[ch] + bias[ch], 0.0f, 1.0f);
  }
  return out;
}

}  // namespace yolic
