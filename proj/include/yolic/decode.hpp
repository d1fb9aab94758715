// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

// Per-cell decisions from the C-length probability vector. A single
// thresholding pass per cell; cells never interact.

#pragma once

#include <algorithm>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "yolic/common.hpp"
#include "yolic/labelkit.hpp"

namespace yolic {

inline constexpr double kDefaultTheta = 0.5;
inline constexpr std::string_view kPredictionVersion = "yolic-pred/1";

struct CellPrediction {
  std::vector<double> object_probs;
  double background_prob = 0.0;
  std::vector<int> decided;  // ascending class indices
  bool is_background = true;
  // Background only because no probability reached the threshold.
  bool low_confidence = false;

  friend bool operator==(const CellPrediction&, const CellPrediction&) = default;
};

// Background wins whenever its probability reaches theta, regardless of the
// object probabilities. Ties (p == theta) count as reaching it.
inline CellPrediction decode_cell(std::span<const double> block, double theta = kDefaultTheta) {
  CellPrediction cp;
  const std::size_t m = block.size() - 1;
  cp.object_probs.assign(block.begin(), block.begin() + static_cast<std::ptrdiff_t>(m));
  cp.background_prob = block[m];
  if (cp.background_prob >= theta) return cp;
  for (std::size_t k = 0; k < m; ++k) {
    if (cp.object_probs[k] >= theta) cp.decided.push_back(static_cast<int>(k));
  }
  cp.is_background = cp.decided.empty();
  cp.low_confidence = cp.is_background;
  return cp;
}

inline std::vector<CellPrediction> decode(std::span<const double> probs, std::size_t n_cells, std::size_t n_classes,
                                          double theta = kDefaultTheta) {
  YOLIC_CHECK(probs.size() == n_cells * (n_classes + 1), MismatchError, "decode: got ", probs.size(),
              " probabilities, expected N x (M+1) = ", n_cells * (n_classes + 1));
  std::vector<CellPrediction> out;
  out.reserve(n_cells);
  for (std::size_t i = 0; i < n_cells; ++i) out.push_back(decode_cell(probs.subspan(i * (n_classes + 1), n_classes + 1), theta));
  return out;
}

inline std::vector<CellPrediction> decode(std::span<const float> probs, std::size_t n_cells, std::size_t n_classes,
                                          double theta = kDefaultTheta) {
  const std::vector<double> wide(probs.begin(), probs.end());
  return decode(std::span<const double>(wide), n_cells, n_classes, theta);
}

enum class BinaryFlag { kRoad, kRisk };

inline std::vector<BinaryFlag> to_binary(std::span<const CellPrediction> preds) {
  std::vector<BinaryFlag> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(p.decided.empty() ? BinaryFlag::kRoad : BinaryFlag::kRisk);
  return out;
}

inline std::vector<CellPrediction> labels_to_predictions(const CellLabelVector& labels, double theta = kDefaultTheta) {
  std::vector<double> probs(labels.size());
  for (std::size_t j = 0; j < probs.size(); ++j) probs[j] = labels.bits()[j] ? 1.0 : 0.0;
  return decode(std::span<const double>(probs), labels.n_cells(), labels.n_classes(), theta);
}

// ---------------------------------------------------------------------------
// "yolic-pred/1": header "yolic-pred/1 N M", then per cell the M+1
// probabilities (6 decimals), " | ", and the decided classes or "-" for none.

inline std::string write_predictions(std::span<const CellPrediction> preds) {
  const std::size_t m = preds.empty() ? 0 : preds.front().object_probs.size();
  std::string out = detail::concat(kPredictionVersion, " ", preds.size(), " ", m, "\n");
  char buf[32];
  for (const auto& p : preds) {
    for (double v : p.object_probs) {
      std::snprintf(buf, sizeof buf, "%.6f ", v);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "%.6f |", p.background_prob);
    out += buf;
    if (p.decided.empty()) {
      out += " -";
    } else {
      for (int k : p.decided) out += " " + std::to_string(k);
    }
    out += "\n";
  }
  return out;
}

struct PredictionFile {
  std::size_t n_cells = 0;
  std::size_t n_classes = 0;
  std::vector<double> probs;           // N x (M+1), as written
  std::vector<std::vector<int>> decided;  // as written
};

inline PredictionFile read_predictions(std::string_view text) {
  const auto lines = detail::split_lines(text);
  YOLIC_CHECK(!lines.empty(), FormatError, "predictions line 1: empty document");
  const auto head = detail::split_ws(lines[0]);
  YOLIC_CHECK(head.size() == 3 && head[0] == kPredictionVersion, FormatError, "predictions line 1: expected '",
              kPredictionVersion, " N M'");
  PredictionFile pf;
  try {
    pf.n_cells = std::stoul(head[1]);
    pf.n_classes = std::stoul(head[2]);
  } catch (const std::exception&) {
    throw FormatError("predictions line 1: N and M must be integers");
  }
  YOLIC_CHECK(lines.size() - 1 == pf.n_cells, FormatError, "predictions: expected ", pf.n_cells,
              " cell lines, found ", lines.size() - 1);
  for (std::size_t i = 0; i < pf.n_cells; ++i) {
    const std::size_t line_no = i + 2;
    const auto toks = detail::split_ws(lines[i + 1]);
    const auto bar = std::find(toks.begin(), toks.end(), "|");
    YOLIC_CHECK(bar != toks.end() && static_cast<std::size_t>(bar - toks.begin()) == pf.n_classes + 1, FormatError,
                "predictions line ", line_no, ": expected ", pf.n_classes + 1, " probabilities then '|'");
    for (auto it = toks.begin(); it != bar; ++it) {
      try {
        pf.probs.push_back(std::stod(*it));
      } catch (const std::exception&) {
        throw FormatError(detail::concat("predictions line ", line_no, ": bad probability '", *it, "'"));
      }
    }
    std::vector<int> dec;
    for (auto it = bar + 1; it != toks.end(); ++it) {
      if (*it == "-") continue;
      try {
        dec.push_back(std::stoi(*it));
      } catch (const std::exception&) {
        throw FormatError(detail::concat("predictions line ", line_no, ": bad class index '", *it, "'"));
      }
    }
    pf.decided.push_back(std::move(dec));
  }
  return pf;
}

// Rebuilds predictions with the decided sets exactly as recorded in the file.
inline std::vector<CellPrediction> predictions_from_file(const PredictionFile& pf) {
  std::vector<CellPrediction> out(pf.n_cells);
  const std::size_t block = pf.n_classes + 1;
  for (std::size_t i = 0; i < pf.n_cells; ++i) {
    auto& cp = out[i];
    cp.object_probs.assign(pf.probs.begin() + static_cast<std::ptrdiff_t>(i * block),
                           pf.probs.begin() + static_cast<std::ptrdiff_t>(i * block + pf.n_classes));
    cp.background_prob = pf.probs[i * block + pf.n_classes];
    cp.decided = pf.decided[i];
    cp.is_background = cp.decided.empty();
    cp.low_confidence = cp.is_background && cp.background_prob < kDefaultTheta;
  }
  return out;
}

}  // namespace yolic
