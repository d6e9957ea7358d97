#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace patchmosaic {

/// Incremental SHA-256. Hex output is lowercase.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::span<const std::uint8_t> bytes);
    void update(std::string_view text);
    void update_u64(std::uint64_t value);  // little-endian
    std::string hex_digest();

private:
    void* ctx_;
};

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

}  // namespace patchmosaic
