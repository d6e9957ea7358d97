#include "patchmosaic/random.hpp"

namespace patchmosaic {

namespace {
constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t derive_key(std::uint64_t seed, StreamTag tag,
                         std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t h = mix64(seed ^ mix64(static_cast<std::uint64_t>(tag)));
    for (std::uint64_t v : path) {
        h = mix64(h + kGamma * (v + 1));
    }
    return h;
}

std::uint64_t RandomStream::next() noexcept {
    ++counter_;
    return mix64(key_ + kGamma * counter_);
}

std::uint64_t RandomStream::uniform_below(std::uint64_t bound) noexcept {
    // Lemire's multiply-shift with rejection.
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(next()) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

double RandomStream::uniform_unit() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

}  // namespace patchmosaic
