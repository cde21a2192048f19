#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

namespace epf {

// Counter-based generator: draw i is mix64(seed + i * gamma), the splitmix64
// construction. State is just (seed, position), which makes streams cheap to
// snapshot and to split, and keeps every draw identical across platforms.
// std::uniform_real_distribution is avoided on purpose: its output is not
// pinned down by the standard.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t position = 0)
      : seed_(seed), pos_(position) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return pos_; }

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + (++pos_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; always consumes exactly two draws.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // [0, n); modulo bias is negligible for the n used here
  std::uint64_t uniform_int(std::uint64_t n) { return n ? next_u64() % n : 0; }

  // Derived stream, independent for distinct stream ids.
  Rng split(std::uint64_t stream) const {
    std::uint64_t z = seed_ ^ (0x9E3779B97F4A7C15ULL + stream * 0xD1B54A32D192ED03ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return Rng(z ^ (z >> 31));
  }

  // Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t pos_;
};

}  // namespace epf
