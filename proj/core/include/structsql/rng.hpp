#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace structsql {

// std::shuffle and the std distributions are implementation-defined, so
// anything that must reproduce across toolchains goes through these helpers.
// std::mt19937_64's output sequence itself is fixed by the standard.

// Uniform integer in [0, bound). bound must be > 0.
inline std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x;
    do {
        x = gen();
    } while (x >= limit);
    return x % bound;
}

template <typename T>
void seeded_shuffle(std::span<T> items, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(gen, i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

}  // namespace structsql
