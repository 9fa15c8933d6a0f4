#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace lengthlogd {

/// 64-bit FNV-1a. Used for fingerprint codes, seed derivation and dataset
/// fingerprints, so the byte layout fed to it is part of the file formats.
class Fnv1a64 {
 public:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  void add_bytes(std::span<const std::uint8_t> bytes) {
    for (std::uint8_t b : bytes) {
      state_ ^= b;
      state_ *= kPrime;
    }
  }
  // Little-endian, 8 bytes, independent of host byte order.
  void add_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      state_ ^= static_cast<std::uint8_t>(v >> (8 * i));
      state_ *= kPrime;
    }
  }
  void add_i64(std::int64_t v) { add_u64(static_cast<std::uint64_t>(v)); }
  void add_double(double v);
  void add_string(std::string_view s);

  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = kOffset;
};

/// Derives an independent stream seed from the run seed and a stage name,
/// e.g. derive_seed(seed, "forest/tree", {category, tree_index}).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage,
                          std::initializer_list<std::uint64_t> indices = {});

/// mt19937_64 with distribution code written out here: the standard
/// distributions are implementation-defined, which would make results
/// differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::size_t uniform_index(std::size_t n);
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();
  /// Standard normal via Box-Muller (one value per call; no caching).
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  /// k distinct values from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace lengthlogd
