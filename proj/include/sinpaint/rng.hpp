#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace sinpaint {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Child seed for a (seed, tag...) path. Stable across runs and platforms, so any
// sub-stream (sample i, epoch e, ...) can be regenerated without replaying others.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = mix_seed(seed);
    for (auto t : tags) h = mix_seed(h ^ mix_seed(t + 0x632BE59BD9B4E019ull));
    return h;
}

}  // namespace sinpaint
