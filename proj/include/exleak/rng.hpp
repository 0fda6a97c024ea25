#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace exleak {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives a child key from a parent key and a path of integer coordinates.
/// Order of coordinates matters; the same path always yields the same key.
std::uint64_t derive_key(std::uint64_t parent, std::initializer_list<std::uint64_t> path) noexcept;

/// Stable 64-bit hash of a string (FNV-1a), used to turn tags into coordinates.
std::uint64_t hash_tag(std::string_view tag) noexcept;

/// Counter-based generator: the i-th output is a pure function of (key, i),
/// so substreams can be consumed in any order or in parallel without changing
/// the values they produce.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t next_u64() noexcept { return mix64(key_ ^ mix64(counter_++ * 0x9E3779B97F4A7C15ULL + 1)); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// Standard normal via Box-Muller; caches the second variate.
  double normal() noexcept;

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Fisher-Yates shuffle with a platform-independent draw sequence
/// (std::shuffle is implementation-defined).
template <typename T>
void shuffle(std::span<T> items, CounterRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

template <typename T>
void shuffle(std::vector<T>& items, CounterRng& rng) {
  shuffle(std::span<T>(items), rng);
}

}  // namespace exleak
