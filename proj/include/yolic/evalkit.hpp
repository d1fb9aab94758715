// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

// Per-class and binary (Risk/Road) precision/recall/F1 over (cell, class)
// pairs with an unweighted macro "All" row.

#pragma once

#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "yolic/common.hpp"
#include "yolic/decode.hpp"
#include "yolic/labelkit.hpp"

namespace yolic {

struct Counts {
  std::uint64_t tp = 0, fp = 0, fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

struct Prf {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// Zero denominators yield 0.
inline double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

inline Prf prf(const Counts& c) {
  Prf m;
  m.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

// Unweighted mean of each column.
inline Prf macro_average(std::span<const Prf> rows) {
  Prf out;
  if (rows.empty()) return out;
  for (const auto& r : rows) {
    out.precision += r.precision;
    out.recall += r.recall;
    out.f1 += r.f1;
  }
  const double n = static_cast<double>(rows.size());
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  return out;
}

// Running tallies; merging two tallies is order-independent.
struct MetricCounts {
  std::size_t n_cells = 0;
  std::vector<Counts> per_class;
  Counts risk, road;
  std::uint64_t images = 0;

  MetricCounts() = default;
  MetricCounts(std::size_t cells, std::size_t classes) : n_cells(cells), per_class(classes) {}

  MetricCounts& operator+=(const MetricCounts& o) {
    YOLIC_CHECK(o.n_cells == n_cells && o.per_class.size() == per_class.size(), MismatchError,
                "cannot merge counts from different configurations");
    for (std::size_t k = 0; k < per_class.size(); ++k) per_class[k] += o.per_class[k];
    risk += o.risk;
    road += o.road;
    images += o.images;
    return *this;
  }
  friend bool operator==(const MetricCounts&, const MetricCounts&) = default;
};

inline void accumulate(MetricCounts& counts, const CellLabelVector& gt, std::span<const CellPrediction> pred) {
  YOLIC_CHECK(gt.n_cells() == counts.n_cells && gt.n_classes() == counts.per_class.size() && pred.size() == gt.n_cells(),
              MismatchError, "evaluation: ground truth has N=", gt.n_cells(), " M=", gt.n_classes(),
              ", predictions have ", pred.size(), " cells, counts expect N=", counts.n_cells,
              " M=", counts.per_class.size());
  const std::size_t m = gt.n_classes();
  std::vector<bool> decided(m);
  for (std::size_t i = 0; i < gt.n_cells(); ++i) {
    std::fill(decided.begin(), decided.end(), false);
    for (int k : pred[i].decided) {
      YOLIC_CHECK(k >= 0 && static_cast<std::size_t>(k) < m, MismatchError, "evaluation: cell ", i,
                  " predicts class ", k, " but M=", m);
      decided[static_cast<std::size_t>(k)] = true;
    }
    for (std::size_t k = 0; k < m; ++k) {
      const bool g = gt.get(i, k);
      if (g && decided[k]) ++counts.per_class[k].tp;
      else if (decided[k]) ++counts.per_class[k].fp;
      else if (g) ++counts.per_class[k].fn;
    }
    const bool gt_risk = gt.has_object(i);
    const bool pred_risk = !pred[i].decided.empty();
    if (gt_risk && pred_risk) ++counts.risk.tp;
    else if (pred_risk) ++counts.risk.fp;
    else if (gt_risk) ++counts.risk.fn;
    if (!gt_risk && !pred_risk) ++counts.road.tp;
    else if (!pred_risk) ++counts.road.fp;
    else if (!gt_risk) ++counts.road.fn;
  }
  ++counts.images;
}

struct BinaryReport {
  Counts risk_counts, road_counts;
  Prf risk, road, all;
};

struct MetricsReport {
  std::vector<std::string> class_names;
  std::vector<Counts> counts;
  std::vector<Prf> per_class;
  Prf all;
  BinaryReport binary;
  std::uint64_t images = 0;
};

inline BinaryReport finalize_binary(const Counts& risk, const Counts& road) {
  BinaryReport b{risk, road, prf(risk), prf(road), {}};
  const Prf rows[] = {b.risk, b.road};
  b.all = macro_average(rows);
  return b;
}

inline MetricsReport finalize(const MetricCounts& counts, std::vector<std::string> class_names = {}) {
  MetricsReport r;
  if (class_names.empty()) {
    for (std::size_t k = 0; k < counts.per_class.size(); ++k) class_names.push_back("class" + std::to_string(k));
  }
  YOLIC_CHECK(class_names.size() == counts.per_class.size(), MismatchError, "finalize: ", class_names.size(),
              " class names for ", counts.per_class.size(), " classes");
  r.class_names = std::move(class_names);
  r.counts = counts.per_class;
  for (const auto& c : counts.per_class) r.per_class.push_back(prf(c));
  r.all = macro_average(r.per_class);
  r.binary = finalize_binary(counts.risk, counts.road);
  r.images = counts.images;
  return r;
}

// Binary Risk/Road view only, straight from ground truth and predictions.
inline BinaryReport binary_metrics(std::span<const CellLabelVector> gt, std::span<const std::vector<CellPrediction>> preds) {
  YOLIC_CHECK(gt.size() == preds.size(), MismatchError, "binary_metrics: ", gt.size(), " ground truths vs ",
              preds.size(), " predictions");
  Counts risk, road;
  for (std::size_t n = 0; n < gt.size(); ++n) {
    YOLIC_CHECK(preds[n].size() == gt[n].n_cells(), MismatchError, "binary_metrics: image ", n, " cell count mismatch");
    const auto flags = to_binary(preds[n]);
    for (std::size_t i = 0; i < flags.size(); ++i) {
      const bool g = gt[n].has_object(i);
      const bool p = flags[i] == BinaryFlag::kRisk;
      if (g && p) ++risk.tp;
      else if (p) ++risk.fp;
      else if (g) ++risk.fn;
      if (!g && !p) ++road.tp;
      else if (!p) ++road.fp;
      else if (!g) ++road.fn;
    }
  }
  return finalize_binary(risk, road);
}

// ---------------------------------------------------------------------------
// Report output

inline std::string format_report(const MetricsReport& r) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s %9s %9s %9s %8s %8s %8s\n", "Class", "Precision", "Recall", "F1-score", "TP",
                "FP", "FN");
  out += buf;
  for (std::size_t k = 0; k < r.per_class.size(); ++k) {
    const auto& m = r.per_class[k];
    const auto& c = r.counts[k];
    std::snprintf(buf, sizeof buf, "%-16s %9.4f %9.4f %9.4f %8llu %8llu %8llu\n", r.class_names[k].c_str(), m.precision,
                  m.recall, m.f1, static_cast<unsigned long long>(c.tp), static_cast<unsigned long long>(c.fp),
                  static_cast<unsigned long long>(c.fn));
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-16s %9.4f %9.4f %9.4f\n\n", "All", r.all.precision, r.all.recall, r.all.f1);
  out += buf;
  auto bin_row = [&](const char* name, const Prf& m, const Counts* c) {
    if (c) {
      std::snprintf(buf, sizeof buf, "%-16s %9.4f %9.4f %9.4f %8llu %8llu %8llu\n", name, m.precision, m.recall, m.f1,
                    static_cast<unsigned long long>(c->tp), static_cast<unsigned long long>(c->fp),
                    static_cast<unsigned long long>(c->fn));
    } else {
      std::snprintf(buf, sizeof buf, "%-16s %9.4f %9.4f %9.4f\n", name, m.precision, m.recall, m.f1);
    }
    out += buf;
  };
  bin_row("Risk", r.binary.risk, &r.binary.risk_counts);
  bin_row("Road", r.binary.road, &r.binary.road_counts);
  bin_row("Binary All", r.binary.all, nullptr);
  std::snprintf(buf, sizeof buf, "\nimages: %llu\n", static_cast<unsigned long long>(r.images));
  out += buf;
  return out;
}

inline nlohmann::ordered_json report_to_json(const MetricsReport& r) {
  auto row = [](const Prf& m) {
    return nlohmann::ordered_json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
  };
  auto counts = [](const Counts& c) { return nlohmann::ordered_json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}}; };
  nlohmann::ordered_json j;
  j["version"] = "yolic-metrics/1";
  j["images"] = r.images;
  auto classes = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < r.per_class.size(); ++k) {
    auto e = row(r.per_class[k]);
    e["name"] = r.class_names[k];
    e["counts"] = counts(r.counts[k]);
    classes.push_back(std::move(e));
  }
  j["classes"] = std::move(classes);
  j["all"] = row(r.all);
  auto risk = row(r.binary.risk);
  risk["counts"] = counts(r.binary.risk_counts);
  auto road = row(r.binary.road);
  road["counts"] = counts(r.binary.road_counts);
  j["binary"] = {{"risk", risk}, {"road", road}, {"all", row(r.binary.all)}};
  return j;
}

}  // namespace yolic
