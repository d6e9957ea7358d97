#include "patchmosaic/container.hpp"

#include "patchmosaic/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace patchmosaic {

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::bytes(std::span<const std::uint8_t> b) {
    out_.insert(out_.end(), b.begin(), b.end());
}

void ByteReader::need(std::size_t count) const {
    if (count > remaining()) throw DataError("truncated binary payload");
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::span<const std::uint8_t> ByteReader::bytes(std::size_t count) {
    need(count);
    auto out = in_.subspan(pos_, count);
    pos_ += count;
    return out;
}

std::vector<std::uint8_t> encode_container(const Container& c) {
    // nlohmann::json objects are std::map backed, so dump() emits sorted keys.
    const std::string header = c.header.dump();
    std::vector<std::uint8_t> out;
    out.reserve(16 + header.size() + c.payload.size());
    out.insert(out.end(), c.magic.begin(), c.magic.end());
    ByteWriter w(out);
    w.u32(c.version);
    w.u64(header.size());
    out.insert(out.end(), header.begin(), header.end());
    out.insert(out.end(), c.payload.begin(), c.payload.end());
    return out;
}

Container decode_container(std::span<const std::uint8_t> bytes,
                           std::array<char, 4> expected_magic) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), expected_magic.data(), 4) != 0) {
        throw DataError("not a " + std::string(expected_magic.begin(), expected_magic.end()) +
                        " container");
    }
    Container c;
    c.magic = expected_magic;
    ByteReader r(bytes.subspan(4));
    c.version = r.u32();
    const std::uint64_t header_len = r.u64();
    auto header = r.bytes(header_len);
    try {
        c.header = nlohmann::json::parse(header.begin(), header.end());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed container header: ") + e.what());
    }
    auto rest = r.bytes(r.remaining());
    c.payload.assign(rest.begin(), rest.end());
    return c;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path.string());
    return bytes;
}

}  // namespace patchmosaic
