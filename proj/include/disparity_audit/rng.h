#ifndef DISPARITY_AUDIT_RNG_H_
#define DISPARITY_AUDIT_RNG_H_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <utility>

namespace disparity_audit {

// 64-bit FNV-1a. Used to turn string keys (concepts, groups) into stream keys;
// std::hash is not stable across standard libraries.
constexpr std::uint64_t Fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

constexpr std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Keyed random stream. The state is a pure function of the key, so any
// (seed, concept, group, index) tuple reproduces the same sequence regardless
// of evaluation order or thread. Output is identical on every platform: no
// std:: distributions are involved.
class StreamRng {
 public:
  explicit StreamRng(std::uint64_t key) : state_(SplitMix64(key)) {}

  StreamRng(std::uint64_t seed, std::string_view a, std::string_view b,
            std::uint64_t index)
      : StreamRng(Combine(Combine(Combine(SplitMix64(seed), Fnv1a64(a)),
                                  Fnv1a64(b)),
                          index)) {}

  static constexpr std::uint64_t Combine(std::uint64_t h, std::uint64_t v) {
    return SplitMix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
  }

  std::uint64_t Next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, bound) (Lemire's multiply-and-reject).
  std::uint64_t Below(std::uint64_t bound) {
    unsigned __int128 m = static_cast<unsigned __int128>(Next()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(Next()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Uniform in [0, 1) with 53 bits.
  double Uniform() { return static_cast<double>(Next() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; the second variate is discarded so that
  // each call consumes a fixed number of draws.
  double Normal() {
    const double u1 = 1.0 - Uniform();  // (0, 1]
    const double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename Container>
  void Shuffle(Container& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(Below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace disparity_audit

#endif  // DISPARITY_AUDIT_RNG_H_
