#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace histanno {

// SplitMix64. Chosen over std:: engines + distributions because the
// distributions are implementation-defined and samples must be byte-identical
// across toolchains.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % bound;
  }

 private:
  std::uint64_t state_;
};

std::uint64_t fnv1a64(std::string_view bytes);

// Child seed for a named substream (e.g. one stratum). Adding or removing a
// stratum never changes the stream of another.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

// In-place Fisher-Yates, walking from the back.
template <class T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace histanno
