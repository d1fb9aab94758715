// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

// Randomized decode property sweep, shared by the unit tests and the
// acceptance binary.

#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "yolic/decode.hpp"

namespace yolic::decodeprops {

struct Sweep {
  std::size_t vectors = 0;
  std::size_t cells = 0;
  // background_prob >= theta but the decision moved with the object probs.
  std::size_t precedence_violations = 0;
  // Raising theta added a decided class or turned a background cell into Risk.
  std::size_t monotonicity_violations = 0;
  // Same, restricted to cells whose background_prob is below both thetas.
  std::size_t restricted_monotonicity_violations = 0;
  // A cell's decision changed when only another cell's block changed, or
  // differed from decoding its block alone.
  std::size_t locality_violations = 0;
};

inline bool subset(const std::vector<int>& a, const std::vector<int>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline Sweep sweep(std::size_t n_vectors = 10000, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> ncell(1, 16), ncls(1, 6);
  Sweep s;
  for (std::size_t t = 0; t < n_vectors; ++t) {
    const auto n = static_cast<std::size_t>(ncell(rng)), m = static_cast<std::size_t>(ncls(rng));
    const std::size_t block = m + 1;
    std::vector<double> probs(n * block);
    for (auto& p : probs) p = u(rng);
    double t1 = u(rng), t2 = u(rng);
    if (t1 > t2) std::swap(t1, t2);
    const auto lo = decode(std::span<const double>(probs), n, m, t1);
    const auto hi = decode(std::span<const double>(probs), n, m, t2);

    // Perturb one cell's block and re-decode at t1.
    const std::size_t victim = rng() % n;
    auto moved = probs;
    for (std::size_t k = 0; k < block; ++k) moved[victim * block + k] = u(rng);
    const auto after = decode(std::span<const double>(moved), n, m, t1);

    for (std::size_t i = 0; i < n; ++i) {
      ++s.cells;
      const double bg = probs[i * block + m];
      const bool bg_lo = lo[i].is_background, risk_hi = !hi[i].decided.empty();
      const bool violated = !subset(hi[i].decided, lo[i].decided) || (bg_lo && risk_hi);
      s.monotonicity_violations += violated;
      if (bg < t1) s.restricted_monotonicity_violations += violated;

      if (bg >= t1) {
        auto scrambled = std::vector<double>(probs.begin() + static_cast<std::ptrdiff_t>(i * block),
                                             probs.begin() + static_cast<std::ptrdiff_t>((i + 1) * block));
        for (std::size_t k = 0; k < m; ++k) scrambled[k] = u(rng);
        const auto again = decode_cell(scrambled, t1);
        if (!again.is_background || !again.decided.empty() || !lo[i].is_background || !lo[i].decided.empty() ||
            lo[i].low_confidence) {
          ++s.precedence_violations;
        }
      }

      const auto alone = decode_cell(std::span<const double>(probs).subspan(i * block, block), t1);
      if (!(alone == lo[i]) || (i != victim && !(after[i] == lo[i]))) ++s.locality_violations;
    }
    ++s.vectors;
  }
  return s;
}

}  // namespace yolic::decodeprops
