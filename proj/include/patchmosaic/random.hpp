#pragma once

#include <cstdint>
#include <initializer_list>

namespace patchmosaic {

/// Domain tags that keep derived streams for different purposes apart.
enum class StreamTag : std::uint64_t {
    kmeans_restart = 0x6b6d65616e730001ULL,
    kmeans_init = 0x6b6d65616e730002ULL,
    cell_sample = 0x63656c6c00000001ULL,
};

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives the key of an independent stream from a master seed and a path of
/// counters, e.g. (seed, cell_sample, frame, cell). The result depends only on
/// the arguments, never on evaluation order elsewhere in the program.
std::uint64_t derive_key(std::uint64_t seed, StreamTag tag,
                         std::initializer_list<std::uint64_t> path) noexcept;

/// Counter-based generator: output i is mix64(key + i * gamma). Copyable, so a
/// saved stream state replays the same draws.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t key) noexcept : key_(key) {}

    std::uint64_t next() noexcept;

    /// Unbiased integer in [0, bound). bound must be > 0.
    std::uint64_t uniform_below(std::uint64_t bound) noexcept;

    /// Double in [0, 1) with 53 random bits.
    double uniform_unit() noexcept;

    std::uint64_t draws() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace patchmosaic
