#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace patchmosaic {

/// 8-bit single-channel raster, row-major, 0 = black and 255 = white.
///
/// Freshly decoded images may have any dimensions. Pipeline stages require
/// the prepared form: square with a power-of-two side of at least 4. Call
/// prepare_image() when needs_preparation() reports true.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(std::size_t w, std::size_t h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(w * h, fill) {}
    GrayImage(std::size_t w, std::size_t h, std::vector<std::uint8_t> data);

    std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
    std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }

    bool needs_preparation() const;

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

enum class ImageFormat { pgm, png };

constexpr bool is_power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

/// Largest power of two not exceeding v (v > 0).
std::size_t floor_power_of_two(std::size_t v);

/// BT.601 luma, rounded half away from zero.
std::uint8_t to_grayscale(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Rounds half away from zero and clamps to [0, 255].
std::uint8_t round_to_u8(double v);

/// Decodes binary PGM (P5, maxval 255) or PNG. The format is sniffed from the
/// file signature, not the extension. Colour PNGs go through to_grayscale;
/// alpha is dropped.
GrayImage load_image(const std::filesystem::path& path);

GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);

/// Center crop to side x side.
GrayImage prepare_image(const GrayImage& img, std::size_t side);

void save_image(const GrayImage& img, const std::filesystem::path& path, ImageFormat format);

/// Picks the format from the extension (.pgm or .png).
ImageFormat format_for_path(const std::filesystem::path& path);

}  // namespace patchmosaic
