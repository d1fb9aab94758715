// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

// Exhaustive pixel-counting oracle for mask_to_labels on random small cases,
// shared by the unit tests and the acceptance binary.

#pragma once

#include <random>
#include <vector>

#include "yolic/cellgeom.hpp"
#include "yolic/image.hpp"
#include "yolic/labelkit.hpp"

namespace yolic::convoracle {

// Per-pixel counting straight from rect geometry, without the rasterizer.
inline CellLabelVector oracle_labels(const ClassIdMask& mask, const std::vector<Rect>& rects, std::size_t m,
                                     double tau) {
  CellLabelVector out(rects.size(), m);
  for (std::size_t i = 0; i < rects.size(); ++i) {
    std::vector<long> count(m, 0);
    long area = 0;
    for (int r = 0; r < mask.height; ++r) {
      for (int c = 0; c < mask.width; ++c) {
        const double x = (c + 0.5) / mask.width, y = (r + 0.5) / mask.height;
        if (x < rects[i].x0 || x >= rects[i].x1 || y < rects[i].y0 || y >= rects[i].y1) continue;
        ++area;
        if (mask.at(r, c) != kIgnoreId) ++count[mask.at(r, c)];
      }
    }
    bool any = false;
    for (std::size_t k = 0; k < m; ++k) {
      const bool on = double(count[k]) / double(area) >= tau;
      out.set(i, k, on);
      any |= on;
    }
    out.set(i, m, !any);
  }
  return out;
}

struct Result {
  int checked = 0;
  int mismatches = 0;
  int first_mismatch = -1;
};

// Masks up to 16x16 with 1-4 random rect cells, 1-4 classes and random
// sentinel pixels. Cases whose cells cover no pixel centers are redrawn.
inline Result run(int count = 1000, std::uint64_t seed = 5) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(1, 16), ncell(1, 4), ncls(1, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Result res;
  while (res.checked < count) {
    const int w = dim(rng), h = dim(rng);
    const auto m = static_cast<std::size_t>(ncls(rng));
    CellConfig cfg;
    std::vector<Rect> rects;
    for (int i = ncell(rng); i > 0; --i) {
      double x0 = u(rng), x1 = u(rng), y0 = u(rng), y1 = u(rng);
      if (x0 > x1) std::swap(x0, x1);
      if (y0 > y1) std::swap(y0, y1);
      rects.push_back({x0, y0, x1, y1});
      cfg.cells.emplace_back(rects.back());
    }
    cfg.class_names.assign(m, "k");
    CellMaskSet cells;
    try {
      cells = rasterize(cfg, w, h);
    } catch (const Error&) {
      continue;
    }
    ClassIdMask mask(w, h);
    std::uniform_int_distribution<int> id(0, static_cast<int>(m));
    for (auto& v : mask.ids) {
      const int k = id(rng);
      v = k == static_cast<int>(m) ? kIgnoreId : static_cast<std::uint8_t>(k);
    }
    const double tau = 0.01 + 0.99 * u(rng);
    if (!(mask_to_labels(mask, cells, m, tau) == oracle_labels(mask, rects, m, tau))) {
      if (res.mismatches++ == 0) res.first_mismatch = res.checked;
    }
    ++res.checked;
  }
  return res;
}

}  // namespace yolic::convoracle
