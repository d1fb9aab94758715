// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "yolic/common.hpp"

namespace yolic {

// Interleaved HWC RGB raster with values in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;

  Image() = default;
  Image(int w, int h, float fill = 0.0f) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

  float& at(int row, int col, int ch) { return rgb[(static_cast<std::size_t>(row) * width + col) * 3 + ch]; }
  float at(int row, int col, int ch) const { return rgb[(static_cast<std::size_t>(row) * width + col) * 3 + ch]; }

  friend bool operator==(const Image&, const Image&) = default;
};

inline constexpr std::uint8_t kIgnoreId = 255;

// Per-pixel class ids; kIgnoreId marks background / unlabeled pixels.
struct ClassIdMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> ids;

  ClassIdMask() = default;
  ClassIdMask(int w, int h, std::uint8_t fill = kIgnoreId)
      : width(w), height(h), ids(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int row, int col) { return ids[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t at(int row, int col) const { return ids[static_cast<std::size_t>(row) * width + col]; }

  friend bool operator==(const ClassIdMask&, const ClassIdMask&) = default;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  YOLIC_CHECK(in, Error, "cannot open '", path, "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  YOLIC_CHECK(out, Error, "cannot write '", path, "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  YOLIC_CHECK(out.good(), Error, "short write to '", path, "'");
}

namespace detail {

struct PnmHeader {
  int width = 0, height = 0, maxval = 0;
  std::size_t data_offset = 0;
};

inline PnmHeader parse_pnm_header(std::string_view bytes, std::string_view magic) {
  YOLIC_CHECK(bytes.substr(0, 2) == magic, FormatError, "expected ", magic, " image");
  std::size_t pos = 2;
  int values[3] = {0, 0, 0};
  for (int& v : values) {
    // whitespace and comments
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    YOLIC_CHECK(pos > start, FormatError, magic, ": malformed header");
    v = std::stoi(std::string(bytes.substr(start, pos - start)));
  }
  YOLIC_CHECK(pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos])), FormatError, magic,
              ": malformed header");
  PnmHeader h{values[0], values[1], values[2], pos + 1};
  YOLIC_CHECK(h.width > 0 && h.height > 0, FormatError, magic, ": bad dimensions");
  YOLIC_CHECK(h.maxval == 255, FormatError, magic, ": only maxval 255 is supported");
  return h;
}

}  // namespace detail

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline std::string encode_ppm(const Image& img) {
  std::string out = detail::concat("P6\n", img.width, " ", img.height, "\n255\n");
  out.reserve(out.size() + img.rgb.size());
  for (float v : img.rgb) out.push_back(static_cast<char>(to_byte(v)));
  return out;
}

inline Image decode_ppm(std::string_view bytes) {
  const auto h = detail::parse_pnm_header(bytes, "P6");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height * 3;
  YOLIC_CHECK(bytes.size() >= h.data_offset + n, FormatError, "P6: truncated pixel data");
  Image img(h.width, h.height);
  for (std::size_t i = 0; i < n; ++i) img.rgb[i] = static_cast<std::uint8_t>(bytes[h.data_offset + i]) / 255.0f;
  return img;
}

inline std::string encode_pgm(const ClassIdMask& mask) {
  std::string out = detail::concat("P5\n", mask.width, " ", mask.height, "\n255\n");
  out.append(mask.ids.begin(), mask.ids.end());
  return out;
}

inline ClassIdMask decode_pgm(std::string_view bytes) {
  const auto h = detail::parse_pnm_header(bytes, "P5");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  YOLIC_CHECK(bytes.size() >= h.data_offset + n, FormatError, "P5: truncated pixel data");
  ClassIdMask m(h.width, h.height);
  for (std::size_t i = 0; i < n; ++i) m.ids[i] = static_cast<std::uint8_t>(bytes[h.data_offset + i]);
  return m;
}

// Bilinear resize (align_corners = false), used to bring stored images to the
// network input size.
inline Image resize_bilinear(const Image& src, int width, int height) {
  if (src.width == width && src.height == height) return src;
  Image dst(width, height);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  for (int r = 0; r < height; ++r) {
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int c = 0; c < width; ++c) {
      const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = src.at(y0, x0, ch) * (1 - wx) + src.at(y0, x1, ch) * wx;
        const double bot = src.at(y1, x0, ch) * (1 - wx) + src.at(y1, x1, ch) * wx;
        dst.at(r, c, ch) = static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return dst;
}

}  // namespace yolic
