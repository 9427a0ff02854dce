#pragma once

// Seed derivation. A master seed fans out into labelled substreams
// ("vol-1", "vol-2", "diffusion-1", "diffusion-2", "jumps") and into
// per-replication seeds. Each substream drives its own std::mt19937_64.
//
//   stream_seed(m, label) = splitmix64(m ^ fnv1a64(label))
//   replication_seed(m, r) = splitmix64(splitmix64(m) + r)

#include <cstdint>
#include <random>
#include <string_view>

namespace spotcov {

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

[[nodiscard]] constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

[[nodiscard]] constexpr std::uint64_t stream_seed(std::uint64_t master, std::string_view label) noexcept {
    return splitmix64(master ^ fnv1a64(label));
}

[[nodiscard]] constexpr std::uint64_t replication_seed(std::uint64_t master, std::uint64_t rep) noexcept {
    return splitmix64(splitmix64(master) + rep);
}

using Engine = std::mt19937_64;

[[nodiscard]] inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

}  // namespace spotcov
