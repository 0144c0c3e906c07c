#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace lengthsmith {

// 64-bit FNV-1a; stable across platforms, used for content-derived seeds.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

// Mixes a base seed with string labels into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::string_view> labels);

// mt19937_64 with distribution helpers that do not depend on the standard
// library's implementation-defined distributions, so sequences are identical
// across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform_open();

  // Uniform on [0, n). Requires n > 0.
  std::uint64_t below(std::uint64_t n);

  // Uniform integer on [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi);

 private:
  std::mt19937_64 engine_;
};

}  // namespace lengthsmith
