#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedsage {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stable child seed from a root seed and a path of integer tags. Used so that
/// every (round, client) stream is independent of execution order.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t h = mix64(root);
    for (std::uint64_t tag : path) {
        h = mix64(h ^ mix64(tag + 0x632be59bd9b4e019ULL));
    }
    return h;
}

// Stream tags.
namespace stream {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kTest = 2;
inline constexpr std::uint64_t kPartition = 3;
inline constexpr std::uint64_t kInit = 4;
inline constexpr std::uint64_t kSelection = 5;
inline constexpr std::uint64_t kClient = 6;
inline constexpr std::uint64_t kRepeat = 7;
}  // namespace stream

}  // namespace fedsage
