// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace yolic {

// Base for every failure raised by the library. Messages are meant to be
// shown to users verbatim (CLI stderr, HTTP 400 bodies).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Raised when two artifacts disagree about N, M or C.
class MismatchError : public Error {
 public:
  using Error::Error;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

}  // namespace detail

#define YOLIC_CHECK(cond, ExcType, ...)                              \
  do {                                                               \
    if (!(cond)) throw ExcType(::yolic::detail::concat(__VA_ARGS__)); \
  } while (0)

// splitmix64 finalizer; the building block of all randomness in the library.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based generator: the value at (key, counter) never depends on
// how many values were drawn elsewhere.
constexpr std::uint64_t hash_counter(std::uint64_t key, std::uint64_t counter) noexcept {
  return mix64(mix64(key) ^ (counter * 0xd1b54a32d192ed03ULL));
}

inline double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Small sequential RNG used for scene synthesis and batch shuffling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(seed) {}

  std::uint64_t next() noexcept { return hash_counter(key_, counter_++); }
  double uniform() noexcept { return to_unit(next()); }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi) noexcept {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next() % span);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace yolic
