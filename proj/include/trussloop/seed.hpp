#pragma once

#include <cstdint>
#include <string_view>

namespace trussloop {

/// splitmix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

/// Seed of one trial; depends only on its coordinates, never on run order.
constexpr std::uint64_t derive_trial_seed(std::uint64_t master, std::string_view label, std::uint64_t trial) {
  return mix_seed(mix_seed(master, fnv1a(label)), trial);
}

}  // namespace trussloop
