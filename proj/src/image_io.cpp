#include "patchmosaic/image_io.hpp"

#include "patchmosaic/container.hpp"
#include "patchmosaic/error.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <memory>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <string>

namespace patchmosaic {

GrayImage::GrayImage(std::size_t w, std::size_t h, std::vector<std::uint8_t> data)
    : width(w), height(h), pixels(std::move(data)) {
    if (pixels.size() != width * height) {
        throw ValidationError("pixel count " + std::to_string(pixels.size()) +
                              " does not match " + std::to_string(width) + "x" +
                              std::to_string(height));
    }
}

bool GrayImage::needs_preparation() const {
    return width != height || width < 4 || !is_power_of_two(width);
}

std::size_t floor_power_of_two(std::size_t v) {
    return v == 0 ? 0 : std::bit_floor(v);
}

std::uint8_t round_to_u8(double v) {
    const double r = std::round(v);  // half away from zero
    return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

std::uint8_t to_grayscale(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    // Integer form of 0.299 r + 0.587 g + 0.114 b, exact in thousandths, so
    // half-way cases round away from zero without floating-point drift.
    const unsigned weighted = 299u * r + 587u * g + 114u * b;
    return static_cast<std::uint8_t>(std::min(255u, (weighted + 500u) / 1000u));
}

// ---------------------------------------------------------------------------
// PGM

namespace {

std::size_t skip_space_and_comments(std::span<const std::uint8_t> bytes, std::size_t pos) {
    while (pos < bytes.size()) {
        if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n' && bytes[pos] != '\r') ++pos;
        } else if (std::isspace(bytes[pos])) {
            ++pos;
        } else {
            break;
        }
    }
    return pos;
}

std::size_t read_header_int(std::span<const std::uint8_t> bytes, std::size_t& pos) {
    pos = skip_space_and_comments(bytes, pos);
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
        throw DataError("corrupt PGM header");
    }
    std::size_t value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
        value = value * 10 + (bytes[pos] - '0');
        if (value > (1u << 30)) throw DataError("corrupt PGM header: value out of range");
        ++pos;
    }
    return value;
}

bool has_png_signature(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

}  // namespace

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
        throw DataError("not a binary PGM (P5) file");
    }
    std::size_t pos = 2;
    const std::size_t width = read_header_int(bytes, pos);
    const std::size_t height = read_header_int(bytes, pos);
    const std::size_t maxval = read_header_int(bytes, pos);
    if (width == 0 || height == 0) throw DataError("corrupt PGM header: zero dimension");
    if (maxval != 255) {
        throw DataError("unsupported PGM maxval " + std::to_string(maxval) + " (only 255)");
    }
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
        throw DataError("corrupt PGM header");
    }
    ++pos;  // single whitespace before the raster
    const std::size_t count = width * height;
    if (bytes.size() - pos < count) {
        throw DataError("corrupt PGM: payload truncated (" + std::to_string(bytes.size() - pos) +
                        " of " + std::to_string(count) + " bytes)");
    }
    std::vector<std::uint8_t> px(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                 bytes.begin() + static_cast<std::ptrdiff_t>(pos + count));
    return GrayImage(width, height, std::move(px));
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
    const std::string header =
        "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

// ---------------------------------------------------------------------------
// PNG

namespace {

struct MemoryReader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t len) {
    auto* src = static_cast<MemoryReader*>(png_get_io_ptr(png));
    if (src->bytes.size() - src->pos < len) {
        png_error(png, "unexpected end of PNG data");
    }
    std::memcpy(out, src->bytes.data() + src->pos, len);
    src->pos += len;
}

void png_quiet_warning(png_structp, png_const_charp) {}

GrayImage decode_png(std::span<const std::uint8_t> bytes, const std::string& name) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                             png_quiet_warning);
    if (png == nullptr) throw DataError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    MemoryReader reader{bytes, 0};
    // Everything touched after setjmp must be trivially destructible or
    // allocated beforehand.
    std::vector<std::uint8_t> rgb;
    std::vector<png_bytep> rows;
    png_uint_32 width = 0;
    png_uint_32 height = 0;
    int channels = 0;
    int bit_depth = 0;
    const char* failure = nullptr;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("corrupt PNG: " + name);
    }
    png_set_read_fn(png, &reader, png_read_from_memory);
    png_read_info(png, info);
    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (bit_depth == 16) {
        failure = "16-bit PNG is not supported";
    } else {
        if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
            png_set_expand_gray_1_2_4_to_8(png);
        }
        if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
        png_read_update_info(png, info);
        channels = png_get_channels(png, info);
        rgb.resize(static_cast<std::size_t>(width) * height * channels);
        rows.resize(height);
        for (png_uint_32 y = 0; y < height; ++y) {
            rows[y] = rgb.data() + static_cast<std::size_t>(y) * width * channels;
        }
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (failure != nullptr) throw DataError(std::string(failure) + ": " + name);

    GrayImage img(width, height);
    if (channels == 1) {
        img.pixels = std::move(rgb);
    } else if (channels == 3) {
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
            img.pixels[i] = to_grayscale(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
        }
    } else {
        throw DataError("unsupported PNG channel layout: " + name);
    }
    return img;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

void write_png(const GrayImage& img, const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.string().c_str(), "wb"));
    if (!file) throw IoError("cannot open for writing: " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                              png_quiet_warning);
    if (png == nullptr) throw IoError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    std::vector<png_const_bytep> rows(img.height);
    for (std::size_t y = 0; y < img.height; ++y) rows[y] = img.pixels.data() + y * img.width;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(file.get()) != 0) throw IoError("write failed: " + path.string());
}

}  // namespace

GrayImage load_image(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    if (has_png_signature(bytes)) return decode_png(bytes, path.string());
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
        try {
            return decode_pgm(bytes);
        } catch (const DataError& e) {
            throw DataError(std::string(e.what()) + ": " + path.string());
        }
    }
    throw DataError("unsupported image format: " + path.string());
}

GrayImage prepare_image(const GrayImage& img, std::size_t side) {
    if (!is_power_of_two(side) || side < 4) {
        throw ValidationError("side must be a power of two >= 4, got " + std::to_string(side));
    }
    if (img.width < side || img.height < side) {
        throw ValidationError("image " + std::to_string(img.width) + "x" +
                              std::to_string(img.height) + " is smaller than requested side " +
                              std::to_string(side));
    }
    const std::size_t x0 = (img.width - side) / 2;
    const std::size_t y0 = (img.height - side) / 2;
    GrayImage out(side, side);
    for (std::size_t y = 0; y < side; ++y) {
        const auto* row = img.pixels.data() + (y0 + y) * img.width + x0;
        std::copy(row, row + side, out.pixels.data() + y * side);
    }
    return out;
}

ImageFormat format_for_path(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".pgm") return ImageFormat::pgm;
    if (ext == ".png") return ImageFormat::png;
    throw ValidationError("unknown image extension '" + ext + "' (use .pgm or .png)");
}

void save_image(const GrayImage& img, const std::filesystem::path& path, ImageFormat format) {
    if (img.pixels.size() != img.width * img.height || img.width == 0) {
        throw ValidationError("invalid image dimensions");
    }
    if (format == ImageFormat::pgm) {
        write_file_bytes(path, encode_pgm(img));
    } else {
        write_png(img, path);
    }
}

}  // namespace patchmosaic
