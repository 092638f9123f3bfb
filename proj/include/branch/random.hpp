#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace branch {

// SplitMix64 (Steele, Lea, Flood 2014). Fixed constants so that seeded
// partitions are reproducible in any language.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform-ish integer in [0, bound) via the high word of a 64x64 product.
    std::uint64_t below(std::uint64_t bound) noexcept {
        __extension__ using wide = unsigned __int128;
        return static_cast<std::uint64_t>((static_cast<wide>(next()) * bound) >> 64);
    }

private:
    std::uint64_t state_;
};

// Fisher-Yates, descending: for i = n-1 .. 1 swap(v[i], v[rng.below(i + 1)]).
template <typename T>
void fisher_yates_shuffle(std::span<T> values, SplitMix64& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(values[i - 1], values[j]);
    }
}

}  // namespace branch
