#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nlc {

// splitmix64 finalizer; used to derive independent sub-stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed of the named sub-stream `name` under `root`. Streams used by the
/// pipeline: "data-bits", "channel-noise", "init", "shuffle".
constexpr std::uint64_t substream_seed(std::uint64_t root, std::string_view name) noexcept
{
    return mix64(root ^ mix64(fnv1a(name)));
}

constexpr std::uint64_t substream_seed(std::uint64_t root, std::uint64_t index) noexcept
{
    return mix64(root + mix64(index + 1));
}

using Rng = std::mt19937_64;

} // namespace nlc
