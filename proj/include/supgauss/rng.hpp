#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace supgauss {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer; a bijection on 64-bit words with good avalanche.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based stream derivation. The engine for replication r is a pure
/// function of (seed, r), so results do not depend on which thread runs r or
/// in what order replications are visited.
class RngPolicy {
 public:
  constexpr RngPolicy() = default;
  constexpr explicit RngPolicy(std::uint64_t master_seed) : seed_(master_seed) {}

  constexpr std::uint64_t master_seed() const noexcept { return seed_; }

  /// Identifier of the stream used for replication `index`.
  constexpr std::uint64_t stream_of(std::uint64_t index) const noexcept {
    return splitmix64(seed_ ^ splitmix64(index + 0x632be59bd9b4e019ULL));
  }

  Engine engine(std::uint64_t index) const {
    const std::uint64_t id = stream_of(index);
    std::seed_seq seq{static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Engine(seq);
  }

  /// Independent policy for a named sub-task (e.g. "gauss" vs "empirical").
  constexpr RngPolicy child(std::string_view tag) const noexcept {
    return RngPolicy(splitmix64(seed_ ^ hash_tag(tag)));
  }
  constexpr RngPolicy child(std::uint64_t tag) const noexcept {
    return RngPolicy(splitmix64(seed_ + splitmix64(tag ^ 0xd1b54a32d192ed03ULL)));
  }

  friend constexpr bool operator==(const RngPolicy&, const RngPolicy&) = default;

 private:
  std::uint64_t seed_ = 0;
};

}  // namespace supgauss
