#include "histanno/rng.hpp"

namespace histanno {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  SplitMix64 mix(seed ^ fnv1a64(label));
  return mix.next();
}

}  // namespace histanno
