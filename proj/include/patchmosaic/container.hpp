#pragma once

// Binary container shared by library, model and component files:
//
//   bytes 0..3    magic (4 ASCII chars, e.g. "PMLB")
//   bytes 4..7    format version, u32 little-endian
//   bytes 8..15   header length H, u64 little-endian
//   next H bytes  header, compact UTF-8 JSON with lexicographically sorted keys
//   remainder     payload, little-endian binary whose layout the header describes

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace patchmosaic {

struct Container {
    std::array<char, 4> magic{};
    std::uint32_t version = 0;
    nlohmann::json header;
    std::vector<std::uint8_t> payload;
};

std::vector<std::uint8_t> encode_container(const Container& c);
Container decode_container(std::span<const std::uint8_t> bytes,
                           std::array<char, 4> expected_magic);

void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Appends little-endian scalars to a byte buffer.
class ByteWriter {
public:
    explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void bytes(std::span<const std::uint8_t> b);

private:
    std::vector<std::uint8_t>& out_;
};

/// Reads little-endian scalars; throws DataError on overrun.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::span<const std::uint8_t> bytes(std::size_t count);
    std::size_t remaining() const { return in_.size() - pos_; }

private:
    void need(std::size_t count) const;
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

}  // namespace patchmosaic
