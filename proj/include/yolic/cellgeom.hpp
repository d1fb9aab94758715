// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

// Cell configurations: the ordered set of cells of interest (rectangles or
// simple polygons in normalized image coordinates) that fixes the layout of
// the network output.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "yolic/common.hpp"

namespace yolic {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct Polygon {
  std::vector<Point> pts;
  friend bool operator==(const Polygon&, const Polygon&) = default;
};

using CellShape = std::variant<Rect, Polygon>;

inline constexpr std::string_view kConfigVersion = "yolic-config/1";

struct CellConfig {
  std::string name;
  int ref_width = 224;
  int ref_height = 224;
  std::vector<CellShape> cells;
  std::vector<std::string> class_names;

  std::size_t num_cells() const noexcept { return cells.size(); }
  std::size_t num_classes() const noexcept { return class_names.size(); }
  // C = N x (M + 1)
  std::size_t num_outputs() const noexcept { return cells.size() * (class_names.size() + 1); }

  friend bool operator==(const CellConfig&, const CellConfig&) = default;
};

struct Violation {
  int cell = -1;  // -1 for config-level problems
  std::string message;
};

inline std::string to_string(const Violation& v) {
  if (v.cell < 0) return v.message;
  return detail::concat("cell ", v.cell, ": ", v.message);
}

struct CellMaskSet {
  int width = 0;
  int height = 0;
  std::vector<std::vector<std::uint8_t>> masks;  // row-major, 0/1

  std::size_t area(std::size_t cell) const {
    return static_cast<std::size_t>(std::count(masks[cell].begin(), masks[cell].end(), 1));
  }
};

namespace geom {

inline double cross(Point o, Point a, Point b) noexcept {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline int orientation(Point o, Point a, Point b) noexcept {
  const double c = cross(o, a, b);
  return (c > 0) - (c < 0);
}

inline bool on_segment(Point a, Point b, Point p) noexcept {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

// Closed-segment intersection, touching and collinear overlap included.
inline bool segments_intersect(Point p1, Point p2, Point q1, Point q2) noexcept {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

// x of the crossing between the horizontal line y and the edge a->b. Callers
// guarantee the edge straddles y under the half-open rule.
inline double edge_x_at(Point a, Point b, double y) noexcept {
  return a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
}

inline bool straddles(Point a, Point b, double y) noexcept { return (a.y > y) != (b.y > y); }

inline double signed_area(const Polygon& poly) noexcept {
  double s = 0.0;
  const auto n = poly.pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = poly.pts[i];
    const Point b = poly.pts[(i + 1) % n];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * s;
}

// Returns the indices of the first pair of non-adjacent crossing edges, if any.
inline std::optional<std::pair<std::size_t, std::size_t>> find_self_intersection(const Polygon& poly) {
  const auto n = poly.pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point a1 = poly.pts[i], a2 = poly.pts[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      const Point b1 = poly.pts[j], b2 = poly.pts[(j + 1) % n];
      if (adjacent) {
        // Adjacent edges share one vertex; they may only meet there.
        const Point shared = (j == i + 1) ? a2 : a1;
        const Point other_a = (j == i + 1) ? a1 : a2;
        const Point other_b = (j == i + 1) ? b2 : b1;
        if (orientation(shared, other_a, other_b) == 0 &&
            ((other_a.x - shared.x) * (other_b.x - shared.x) + (other_a.y - shared.y) * (other_b.y - shared.y)) > 0) {
          return std::pair{i, j};
        }
        continue;
      }
      if (segments_intersect(a1, a2, b1, b2)) return std::pair{i, j};
    }
  }
  return std::nullopt;
}

}  // namespace geom

inline std::vector<Violation> validate_config(const CellConfig& cfg) {
  std::vector<Violation> out;
  auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };

  if (cfg.cells.empty()) out.push_back({-1, "config must contain at least one cell (N >= 1)"});
  if (cfg.class_names.empty()) out.push_back({-1, "config must name at least one class (M >= 1)"});
  if (cfg.ref_width < 1 || cfg.ref_height < 1) out.push_back({-1, "ref_size must be positive"});
  for (std::size_t k = 0; k < cfg.class_names.size(); ++k) {
    if (cfg.class_names[k].empty()) out.push_back({-1, detail::concat("class ", k, " has an empty name")});
  }

  for (std::size_t i = 0; i < cfg.cells.size(); ++i) {
    const int idx = static_cast<int>(i);
    if (const auto* r = std::get_if<Rect>(&cfg.cells[i])) {
      if (!in_unit(r->x0) || !in_unit(r->y0) || !in_unit(r->x1) || !in_unit(r->y1)) {
        out.push_back({idx, "rect coordinates must lie in [0,1]"});
      }
      if (!(r->x0 < r->x1)) out.push_back({idx, "rect requires x0 < x1"});
      if (!(r->y0 < r->y1)) out.push_back({idx, "rect requires y0 < y1"});
    } else {
      const auto& poly = std::get<Polygon>(cfg.cells[i]);
      if (poly.pts.size() < 3) {
        out.push_back({idx, "polygon needs at least 3 vertices"});
        continue;
      }
      if (!std::all_of(poly.pts.begin(), poly.pts.end(), [&](Point p) { return in_unit(p.x) && in_unit(p.y); })) {
        out.push_back({idx, "polygon coordinates must lie in [0,1]"});
      }
      if (auto hit = geom::find_self_intersection(poly)) {
        out.push_back({idx, detail::concat("polygon is not simple: edges ", hit->first, " and ", hit->second,
                                           " intersect")});
      } else if (geom::signed_area(poly) == 0.0) {
        out.push_back({idx, "polygon has zero area"});
      }
    }
  }
  return out;
}

namespace detail {

// Pixel indices [first, last) whose centers (c + 0.5) / size lie in [lo, hi).
inline std::pair<int, int> center_span(double lo, double hi, int size) {
  auto center = [size](int c) { return (c + 0.5) / size; };
  int first = std::clamp(static_cast<int>(std::floor(lo * size - 0.5)), 0, size);
  while (first > 0 && center(first - 1) >= lo) --first;
  while (first < size && center(first) < lo) ++first;
  int last = std::clamp(static_cast<int>(std::ceil(hi * size - 0.5)), first, size);
  while (last > first && center(last - 1) >= hi) --last;
  while (last < size && center(last) < hi) ++last;
  return {first, last};
}

inline void rasterize_rect(const Rect& r, int width, int height, std::vector<std::uint8_t>& mask) {
  const auto [c0, c1] = center_span(r.x0, r.x1, width);
  const auto [r0, r1] = center_span(r.y0, r.y1, height);
  for (int row = r0; row < r1; ++row) {
    std::fill(mask.begin() + static_cast<std::ptrdiff_t>(row) * width + c0,
              mask.begin() + static_cast<std::ptrdiff_t>(row) * width + c1, std::uint8_t{1});
  }
}

// Even-odd scanline fill evaluated at pixel centers.
inline void rasterize_polygon(const Polygon& poly, int width, int height, std::vector<std::uint8_t>& mask) {
  const auto n = poly.pts.size();
  std::vector<double> xs;
  xs.reserve(n);
  for (int row = 0; row < height; ++row) {
    const double yc = (row + 0.5) / height;
    xs.clear();
    for (std::size_t e = 0; e < n; ++e) {
      const Point a = poly.pts[e];
      const Point b = poly.pts[(e + 1) % n];
      if (geom::straddles(a, b, yc)) xs.push_back(geom::edge_x_at(a, b, yc));
    }
    std::sort(xs.begin(), xs.end());
    // A center strictly left of an odd number of crossings is inside, which
    // for sorted crossings means xs[2k] <= xc < xs[2k+1].
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const auto [c0, c1] = center_span(xs[k], xs[k + 1], width);
      std::fill(mask.begin() + static_cast<std::ptrdiff_t>(row) * width + c0,
                mask.begin() + static_cast<std::ptrdiff_t>(row) * width + c1, std::uint8_t{1});
    }
  }
}

}  // namespace detail

inline std::vector<std::uint8_t> rasterize_shape(const CellShape& shape, int width, int height) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * height, 0);
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Rect>) {
          detail::rasterize_rect(s, width, height, mask);
        } else {
          detail::rasterize_polygon(s, width, height, mask);
        }
      },
      shape);
  return mask;
}

// Throws if any cell covers no pixel center at the requested size.
inline CellMaskSet rasterize(const CellConfig& cfg, int width, int height) {
  YOLIC_CHECK(width >= 1 && height >= 1, ShapeError, "raster size must be positive, got ", width, "x", height);
  CellMaskSet out{width, height, {}};
  out.masks.reserve(cfg.cells.size());
  for (std::size_t i = 0; i < cfg.cells.size(); ++i) {
    out.masks.push_back(rasterize_shape(cfg.cells[i], width, height));
    YOLIC_CHECK(out.area(i) > 0, Error, "cell ", i, " rasterizes to zero pixels at ", width, "x", height);
  }
  return out;
}

// Full validation: shape invariants plus non-emptiness at the reference size.
inline std::vector<Violation> validate_config_full(const CellConfig& cfg) {
  auto out = validate_config(cfg);
  if (!out.empty() || cfg.ref_width < 1 || cfg.ref_height < 1) return out;
  for (std::size_t i = 0; i < cfg.cells.size(); ++i) {
    const auto mask = rasterize_shape(cfg.cells[i], cfg.ref_width, cfg.ref_height);
    if (std::find(mask.begin(), mask.end(), 1) == mask.end()) {
      out.push_back({static_cast<int>(i), detail::concat("rasterizes to zero pixels at reference size ",
                                                         cfg.ref_width, "x", cfg.ref_height)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Horizontal mirroring

inline CellShape mirror_shape(const CellShape& s) {
  if (const auto* r = std::get_if<Rect>(&s)) return Rect{1.0 - r->x1, r->y0, 1.0 - r->x0, r->y1};
  Polygon p = std::get<Polygon>(s);
  for (auto& pt : p.pts) pt.x = 1.0 - pt.x;
  return p;
}

namespace detail {

inline bool shapes_match(const CellShape& a, const CellShape& b, double tol) {
  if (a.index() != b.index()) return false;
  if (const auto* ra = std::get_if<Rect>(&a)) {
    const auto& rb = std::get<Rect>(b);
    return std::abs(ra->x0 - rb.x0) <= tol && std::abs(ra->y0 - rb.y0) <= tol && std::abs(ra->x1 - rb.x1) <= tol &&
           std::abs(ra->y1 - rb.y1) <= tol;
  }
  auto pa = std::get<Polygon>(a).pts;
  auto pb = std::get<Polygon>(b).pts;
  if (pa.size() != pb.size()) return false;
  auto by_xy = [](Point l, Point r) { return l.x != r.x ? l.x < r.x : l.y < r.y; };
  std::sort(pa.begin(), pa.end(), by_xy);
  std::sort(pb.begin(), pb.end(), by_xy);
  for (std::size_t k = 0; k < pa.size(); ++k) {
    if (std::abs(pa[k].x - pb[k].x) > tol || std::abs(pa[k].y - pb[k].y) > tol) return false;
  }
  return true;
}

}  // namespace detail

struct MirrorResult {
  CellConfig config;
  // perm[i] = j means the mirror image of original cell j is original cell i,
  // so after a horizontal flip cell i shows what cell j showed before.
  std::optional<std::vector<std::size_t>> perm;
};

inline MirrorResult mirror_config(const CellConfig& cfg, double tol = 1e-6) {
  MirrorResult out{cfg, std::nullopt};
  for (auto& c : out.config.cells) c = mirror_shape(c);

  std::vector<std::size_t> perm(cfg.cells.size());
  std::vector<bool> used(cfg.cells.size(), false);
  for (std::size_t i = 0; i < cfg.cells.size(); ++i) {
    bool found = false;
    for (std::size_t j = 0; j < cfg.cells.size() && !found; ++j) {
      if (!used[j] && detail::shapes_match(out.config.cells[j], cfg.cells[i], tol)) {
        perm[i] = j;
        used[j] = true;
        found = true;
      }
    }
    if (!found) return out;
  }
  out.perm = std::move(perm);
  return out;
}

// ---------------------------------------------------------------------------
// "yolic-config/1" documents

// Canonical text: one top-level field per line, one cell per line.
inline std::string save_config(const CellConfig& cfg) {
  using ojson = nlohmann::ordered_json;
  std::string out = "{\n";
  out += "  \"version\": " + ojson(kConfigVersion).dump() + ",\n";
  out += "  \"name\": " + ojson(cfg.name).dump() + ",\n";
  out += "  \"ref_size\": " + ojson::array({cfg.ref_width, cfg.ref_height}).dump() + ",\n";
  out += "  \"classes\": " + ojson(cfg.class_names).dump() + ",\n";
  out += "  \"cells\": [";
  for (std::size_t i = 0; i < cfg.cells.size(); ++i) {
    ojson cell;
    if (const auto* r = std::get_if<Rect>(&cfg.cells[i])) {
      cell["kind"] = "rect";
      cell["box"] = {r->x0, r->y0, r->x1, r->y1};
    } else {
      cell["kind"] = "poly";
      ojson pts = ojson::array();
      for (const auto& p : std::get<Polygon>(cfg.cells[i]).pts) pts.push_back({p.x, p.y});
      cell["pts"] = std::move(pts);
    }
    out += (i == 0 ? "\n    " : ",\n    ") + cell.dump();
  }
  out += cfg.cells.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

namespace detail {

inline double read_coord(const nlohmann::json& v, const std::string& where) {
  YOLIC_CHECK(v.is_number(), FormatError, where, ": expected a number");
  const double d = v.get<double>();
  YOLIC_CHECK(std::isfinite(d) && d >= 0.0 && d <= 1.0, FormatError, where, ": coordinate ", d,
              " out of range [0,1]");
  return d;
}

}  // namespace detail

inline CellConfig load_config(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(detail::concat("config: malformed document at byte ", e.byte, ": ", e.what()));
  }
  YOLIC_CHECK(doc.is_object(), FormatError, "config: top level must be an object");
  for (const char* field : {"version", "name", "ref_size", "classes", "cells"}) {
    YOLIC_CHECK(doc.contains(field), FormatError, "config: missing field '", field, "'");
  }
  YOLIC_CHECK(doc["version"] == kConfigVersion, FormatError, "config: unsupported version ", doc["version"].dump(),
              ", expected \"", kConfigVersion, "\"");

  CellConfig cfg;
  YOLIC_CHECK(doc["name"].is_string(), FormatError, "config: 'name' must be a string");
  cfg.name = doc["name"].get<std::string>();

  const auto& ref = doc["ref_size"];
  YOLIC_CHECK(ref.is_array() && ref.size() == 2 && ref[0].is_number_integer() && ref[1].is_number_integer(),
              FormatError, "config: 'ref_size' must be [width, height] integers");
  cfg.ref_width = ref[0].get<int>();
  cfg.ref_height = ref[1].get<int>();

  const auto& classes = doc["classes"];
  YOLIC_CHECK(classes.is_array(), FormatError, "config: 'classes' must be an array");
  for (std::size_t k = 0; k < classes.size(); ++k) {
    YOLIC_CHECK(classes[k].is_string(), FormatError, "config: classes[", k, "] must be a string");
    cfg.class_names.push_back(classes[k].get<std::string>());
  }

  const auto& cells = doc["cells"];
  YOLIC_CHECK(cells.is_array(), FormatError, "config: 'cells' must be an array");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    const std::string where = detail::concat("cells[", i, "]");
    YOLIC_CHECK(c.is_object() && c.contains("kind") && c["kind"].is_string(), FormatError, where,
                ": missing field 'kind'");
    const auto kind = c["kind"].get<std::string>();
    if (kind == "rect") {
      YOLIC_CHECK(c.contains("box") && c["box"].is_array() && c["box"].size() == 4, FormatError, where,
                  ": rect needs 'box': [x0,y0,x1,y1]");
      const auto& b = c["box"];
      cfg.cells.emplace_back(Rect{detail::read_coord(b[0], where + ".box[0]"), detail::read_coord(b[1], where + ".box[1]"),
                                  detail::read_coord(b[2], where + ".box[2]"), detail::read_coord(b[3], where + ".box[3]")});
    } else if (kind == "poly") {
      YOLIC_CHECK(c.contains("pts") && c["pts"].is_array(), FormatError, where, ": poly needs 'pts': [[x,y],...]");
      Polygon poly;
      const auto& pts = c["pts"];
      for (std::size_t k = 0; k < pts.size(); ++k) {
        const std::string pw = detail::concat(where, ".pts[", k, "]");
        YOLIC_CHECK(pts[k].is_array() && pts[k].size() == 2, FormatError, pw, ": expected [x,y]");
        poly.pts.push_back({detail::read_coord(pts[k][0], pw + "[0]"), detail::read_coord(pts[k][1], pw + "[1]")});
      }
      cfg.cells.emplace_back(std::move(poly));
    } else {
      throw FormatError(detail::concat(where, ": unknown shape kind '", kind, "'"));
    }
  }
  return cfg;
}

}  // namespace yolic
