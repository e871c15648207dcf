#pragma once

// Counter-based 64-bit generator. Every draw is a pure function of
// (seed, stream, counter), which makes generated files reproducible across
// platforms and languages:
//
//   key   = mix(seed ^ mix(stream + 0x9E3779B97F4A7C15))
//   draw  = mix(key + counter * 0x9E3779B97F4A7C15), counter = 1, 2, ...
//   mix   = SplitMix64 finalizer
//
// uniform() is (draw >> 11) * 2^-53.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

namespace flmens {

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

class CounterRng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(splitmix64_mix(seed ^ splitmix64_mix(stream + kGamma))) {}

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return splitmix64_mix(key_ + counter_ * kGamma);
  }

  // [0, 1)
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // (0, 1]
  double uniform_positive() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Box-Muller, one normal per two draws (no caching, so the stream position
  // is a simple function of the number of calls).
  double normal() noexcept {
    const double u1 = uniform_positive();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Unbiased integer in [0, n), n > 0.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Flat Dirichlet(1, ..., 1) sample.
  std::vector<double> dirichlet_flat(std::size_t n) {
    std::vector<double> out(n);
    double total = 0.0;
    for (auto& x : out) {
      x = -std::log(uniform_positive());
      total += x;
    }
    for (auto& x : out) x /= total;
    return out;
  }

  template <class T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace flmens
