#include "lengthlogd/random.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace lengthlogd {

void Fnv1a64::add_double(double v) {
  if (v == 0.0) v = 0.0;  // fold -0.0
  add_u64(std::bit_cast<std::uint64_t>(v));
}

void Fnv1a64::add_string(std::string_view s) {
  add_u64(s.size());
  for (char c : s) {
    state_ ^= static_cast<std::uint8_t>(c);
    state_ *= kPrime;
  }
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage,
                          std::initializer_list<std::uint64_t> indices) {
  Fnv1a64 h;
  h.add_u64(seed);
  h.add_string(stage);
  for (std::uint64_t i : indices) h.add_u64(i);
  return splitmix64(h.value());
}

std::size_t Rng::uniform_index(std::size_t n) {
  // Rejection sampling on the top of the range removes modulo bias.
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

double Rng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  double u1;
  do {
    u1 = uniform01();
  } while (u1 <= 0.0);
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  if (k > n) k = n;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + uniform_index(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace lengthlogd
