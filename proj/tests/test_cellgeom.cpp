// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "yolic/cellgeom.hpp"
#include "yolic/image.hpp"

namespace yolic {
namespace {

CellConfig grid(int rows, int cols, int classes = 1) {
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

CellConfig single(CellShape shape) {
  CellConfig cfg;
  cfg.name = "one";
  cfg.cells.push_back(std::move(shape));
  cfg.class_names = {"a"};
  return cfg;
}

std::string shipped(const std::string& name) { return read_file(std::string(YOLIC_CONFIG_DIR) + "/" + name + ".json"); }

// PNPOLY crossing test at a point.
bool inside_oracle(const Polygon& poly, double x, double y) {
  bool in = false;
  const auto n = poly.pts.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point a = poly.pts[i], b = poly.pts[j];
    if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) in = !in;
  }
  return in;
}

std::vector<std::uint8_t> oracle_mask(const Polygon& poly, int w, int h) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * h, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) out[static_cast<std::size_t>(r) * w + c] = inside_oracle(poly, (c + 0.5) / w, (r + 0.5) / h);
  }
  return out;
}

// Independent proper-crossing test for the bow-tie oracle.
bool proper_cross(Point p1, Point p2, Point q1, Point q2) {
  auto side = [](Point a, Point b, Point c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); };
  const double d1 = side(q1, q2, p1), d2 = side(q1, q2, p2), d3 = side(p1, p2, q1), d4 = side(p1, p2, q2);
  return d1 * d2 < 0 && d3 * d4 < 0;
}

Polygon random_star(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nv(3, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = nv(rng);
  const double cx = 0.3 + 0.4 * u(rng), cy = 0.3 + 0.4 * u(rng);
  std::vector<double> angles(static_cast<std::size_t>(n));
  for (auto& a : angles) a = u(rng) * 2.0 * std::numbers::pi;
  std::sort(angles.begin(), angles.end());
  Polygon p;
  for (double a : angles) {
    const double r = 0.05 + 0.25 * u(rng);
    p.pts.push_back({std::clamp(cx + r * std::cos(a), 0.0, 1.0), std::clamp(cy + r * std::sin(a), 0.0, 1.0)});
  }
  return p;
}

TEST(ValidateConfig, GridIsValid) { EXPECT_TRUE(validate_config(grid(2, 2)).empty()); }

TEST(ValidateConfig, InvertedRectNamesOrdering) {
  const auto v = validate_config(single(Rect{0.5, 0.0, 0.2, 1.0}));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].cell, 0);
  EXPECT_NE(v[0].message.find("x0 < x1"), std::string::npos);
}

TEST(ValidateConfig, BowTieIsNotSimple) {
  const Polygon bow{{{0, 0}, {1, 1}, {1, 0}, {0, 1}}};
  bool oracle = false;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 2; j < 4; ++j) {
      if (i == 0 && j == 3) continue;
      oracle |= proper_cross(bow.pts[i], bow.pts[i + 1], bow.pts[j], bow.pts[(j + 1) % 4]);
    }
  }
  ASSERT_TRUE(oracle);
  const auto v = validate_config(single(bow));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].message.find("not simple"), std::string::npos);
}

TEST(ValidateConfig, ReportsEveryViolation) {
  auto cfg = grid(1, 2);
  cfg.cells.emplace_back(Rect{0.5, 0.5, 0.2, 1.5});
  cfg.cells.emplace_back(Polygon{{{0, 0}, {1, 0}}});
  cfg.class_names.clear();
  const auto v = validate_config(cfg);
  EXPECT_GE(v.size(), 4u);
  EXPECT_TRUE(std::any_of(v.begin(), v.end(), [](const Violation& x) { return x.cell == -1; }));
  EXPECT_TRUE(std::any_of(v.begin(), v.end(), [](const Violation& x) { return x.cell == 2; }));
  EXPECT_TRUE(std::any_of(v.begin(), v.end(), [](const Violation& x) { return x.cell == 3; }));
}

TEST(ValidateConfig, ZeroAreaPolygon) {
  const auto v = validate_config(single(Polygon{{{0, 0}, {0.5, 0.5}, {1, 1}}}));
  ASSERT_EQ(v.size(), 1u);
}

TEST(Rasterize, QuarterFrame) {
  const auto m = rasterize(single(Rect{0, 0, 0.5, 0.5}), 4, 4);
  std::vector<std::uint8_t> expect(16, 0);
  for (int p : {0, 1, 4, 5}) expect[static_cast<std::size_t>(p)] = 1;
  EXPECT_EQ(m.masks[0], expect);
}

TEST(Rasterize, FullFrame) {
  const auto m = rasterize(single(Rect{0, 0, 1, 1}), 7, 5);
  EXPECT_EQ(m.area(0), 35u);
}

TEST(Rasterize, RectIsHalfOpen) {
  const auto m = rasterize(single(Rect{0.125, 0, 0.375, 1}), 4, 1);
  EXPECT_EQ(m.masks[0], (std::vector<std::uint8_t>{1, 0, 0, 0}));
}

TEST(Rasterize, TriangleMatchesBruteForce) {
  const Polygon tri{{{0, 0}, {1, 0}, {0, 1}}};
  const auto m = rasterize(single(tri), 64, 64);
  const auto oracle = oracle_mask(tri, 64, 64);
  EXPECT_EQ(m.masks[0], oracle);
  EXPECT_EQ(m.area(0), static_cast<std::size_t>(std::count(oracle.begin(), oracle.end(), 1)));
}

TEST(Rasterize, RandomPolygonsMatchBruteForce) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 64);
  int checked = 0;
  for (int t = 0; t < 300; ++t) {
    const auto poly = random_star(rng);
    if (!validate_config(single(poly)).empty()) continue;
    const int w = dim(rng), h = dim(rng);
    EXPECT_EQ(rasterize_shape(poly, w, h), oracle_mask(poly, w, h)) << "trial " << t << " at " << w << "x" << h;
    ++checked;
  }
  EXPECT_GT(checked, 200);
}

TEST(Rasterize, EmptyCellThrows) {
  EXPECT_THROW(rasterize(single(Rect{0.0, 0.0, 0.1, 0.1}), 2, 2), Error);
  EXPECT_THROW(rasterize(single(Rect{0, 0, 1, 1}), 0, 3), ShapeError);
}

TEST(Rasterize, Deterministic) {
  const auto cfg = load_config(shipped("indoor30"));
  const auto a = rasterize(cfg, 224, 224);
  const auto b = rasterize(cfg, 224, 224);
  EXPECT_EQ(a.masks, b.masks);
}

TEST(Rasterize, ResolutionConsistency) {
  for (const char* name : {"grid2x2", "outdoor104", "indoor30", "cityscapes256"}) {
    const auto cfg = load_config(shipped(name));
    const auto lo = rasterize(cfg, 224, 224);
    const auto hi = rasterize(cfg, 448, 448);
    for (std::size_t i = 0; i < cfg.num_cells(); ++i) {
      const double a = double(lo.area(i)) / (224.0 * 224.0);
      const double b = double(hi.area(i)) / (448.0 * 448.0);
      EXPECT_LT(std::abs(a - b), 2.0 / 224.0) << name << " cell " << i;
    }
  }
}

TEST(Mirror, SymmetricGrid) {
  const auto m = mirror_config(grid(2, 2));
  ASSERT_TRUE(m.perm);
  EXPECT_EQ(*m.perm, (std::vector<std::size_t>{1, 0, 3, 2}));
}

TEST(Mirror, FullFrameIsSelfSymmetric) {
  const auto m = mirror_config(single(Rect{0, 0, 1, 1}));
  ASSERT_TRUE(m.perm);
  EXPECT_EQ(*m.perm, std::vector<std::size_t>{0});
}

TEST(Mirror, UnmatchedTriangleHasNoPermutation) {
  auto cfg = grid(2, 2);
  cfg.cells.emplace_back(Polygon{{{0.1, 0.1}, {0.3, 0.1}, {0.1, 0.4}}});
  EXPECT_FALSE(mirror_config(cfg).perm);
}

TEST(Mirror, InvolutionOnShippedConfigs) {
  for (const char* name : {"grid2x2", "outdoor104", "indoor30", "cityscapes256"}) {
    const auto cfg = load_config(shipped(name));
    const auto once = mirror_config(cfg);
    const auto twice = mirror_config(once.config);
    for (std::size_t i = 0; i < cfg.num_cells(); ++i) {
      EXPECT_TRUE(detail::shapes_match(twice.config.cells[i], cfg.cells[i], 1e-9)) << name << " cell " << i;
    }
    ASSERT_TRUE(once.perm) << name;
    const auto& p = *once.perm;
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[p[i]], i) << name;
  }
}

TEST(ConfigIo, RoundTrip) {
  auto cfg = grid(2, 2, 3);
  cfg.cells.emplace_back(Polygon{{{0.1, 0.2}, {0.9, 0.25}, {0.5, 0.8}}});
  const auto text = save_config(cfg);
  EXPECT_EQ(load_config(text), cfg);
  EXPECT_EQ(save_config(load_config(text)), text);
}

TEST(ConfigIo, OutOfRangeNamesCell) {
  auto text = save_config(grid(2, 2));
  const auto pos = text.find("1.0", text.find("\"cells\""));
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 3, "1.5");
  try {
    load_config(text);
    FAIL() << "accepted 1.5";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("cells[1]"), std::string::npos) << e.what();
  }
}

TEST(ConfigIo, RejectsUnknownKindAndMissingFields) {
  const std::string head = R"({"version":"yolic-config/1","name":"x","ref_size":[224,224],"classes":["a"],)";
  EXPECT_THROW(load_config(head + R"("cells":[{"kind":"circle"}]})"), FormatError);
  EXPECT_THROW(load_config(R"({"version":"yolic-config/1","name":"x","classes":["a"],"cells":[]})"), FormatError);
  EXPECT_THROW(load_config(head + R"("cells":[{"box":[0,0,1,1]}]})"), FormatError);
  EXPECT_THROW(load_config("{not json"), FormatError);
  try {
    load_config(head + R"("cells":[{"kind":"rect","box":[0,0,1,1]},{"kind":"blob"}]})");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("cells[1]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("blob"), std::string::npos);
  }
}

TEST(ShippedConfigs, IndoorHasThirtyCells) { EXPECT_EQ(load_config(shipped("indoor30")).num_cells(), 30u); }

TEST(ShippedConfigs, OutputSizes) {
  EXPECT_EQ(load_config(shipped("outdoor104")).num_outputs(), 1248u);
  EXPECT_EQ(load_config(shipped("indoor30")).num_outputs(), 210u);
  EXPECT_EQ(load_config(shipped("cityscapes256")).num_outputs(), 1024u);
  EXPECT_EQ(load_config(shipped("grid2x2")).num_outputs(), 12u);
}

TEST(ShippedConfigs, ValidAndByteStable) {
  for (const char* name : {"grid2x2", "outdoor104", "indoor30", "cityscapes256"}) {
    const auto text = shipped(name);
    const auto cfg = load_config(text);
    EXPECT_TRUE(validate_config_full(cfg).empty()) << name;
    EXPECT_EQ(save_config(cfg), text) << name;
  }
}

}  // namespace
}  // namespace yolic
