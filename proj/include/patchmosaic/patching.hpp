#pragma once

#include "patchmosaic/image_io.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace patchmosaic {

/// Where a patch came from: source image ordinal and top-left corner.
struct PatchRef {
    std::uint32_t image_index = 0;
    std::uint32_t x = 0;
    std::uint32_t y = 0;

    friend bool operator==(const PatchRef&, const PatchRef&) = default;
};

/// Raw n x n patch, row-major.
struct Patch {
    std::size_t n = 0;
    std::vector<std::uint8_t> values;

    friend bool operator==(const Patch&, const Patch&) = default;
};

/// Patch with its mean intensity removed. values + mean gives the original.
struct CenteredPatch {
    std::size_t n = 0;
    std::vector<double> values;
    double mean = 0.0;
};

struct ExtractedPatch {
    PatchRef ref;
    Patch patch;
};

/// Checks n, s powers of two with s <= n <= side. Throws ValidationError.
void validate_patch_geometry(std::size_t side, std::size_t n, std::size_t stride);

/// Patches per image: ((N - n) / s + 1)^2, which is (N / n)^2 when s == n.
std::size_t patch_count(std::size_t side, std::size_t n, std::size_t stride);

/// Row-major by (y, x) in stride steps.
std::vector<ExtractedPatch> extract_patches(const GrayImage& img, std::size_t n,
                                            std::size_t stride);

CenteredPatch center_patch(const Patch& p);

/// Tiles a row-major grid of equally sized patches into a side x side image.
GrayImage assemble(std::span<const Patch> grid, std::size_t side);

/// Every extracted patch of a dataset, concatenated in manifest order. Pixel
/// bytes are stored contiguously, patch i occupying [i*n*n, (i+1)*n*n).
class PatchLibrary {
public:
    PatchLibrary() = default;

    std::size_t n() const { return n_; }
    std::size_t dim() const { return n_ * n_; }
    std::size_t stride() const { return stride_; }
    std::size_t side() const { return side_; }
    std::size_t size() const { return refs_.size(); }
    bool empty() const { return refs_.empty(); }
    std::size_t image_count() const { return manifest_.size(); }
    const std::vector<std::string>& manifest() const { return manifest_; }
    const std::string& digest() const { return digest_; }

    const PatchRef& ref(std::size_t i) const { return refs_[i]; }
    std::span<const std::uint8_t> pixels(std::size_t i) const {
        return {pixels_.data() + i * dim(), dim()};
    }
    std::span<const std::uint8_t> all_pixels() const { return pixels_; }
    Patch patch(std::size_t i) const;

    /// Builds from prepared images that all share one side. `names` labels each
    /// image in the manifest (paths when read from disk).
    static PatchLibrary from_images(std::span<const GrayImage> images,
                                    std::vector<std::string> names, std::size_t n,
                                    std::size_t stride, std::size_t workers = 1);

    friend bool operator==(const PatchLibrary&, const PatchLibrary&) = default;

private:
    friend PatchLibrary decode_library(std::span<const std::uint8_t>);

    std::size_t n_ = 0;
    std::size_t stride_ = 0;
    std::size_t side_ = 0;
    std::vector<std::string> manifest_;
    std::string digest_;
    std::vector<PatchRef> refs_;
    std::vector<std::uint8_t> pixels_;
};

/// Digest of the dataset a library was cut from: side, image count and every
/// prepared image's pixels in manifest order (SHA-256, hex).
std::string dataset_digest(std::span<const GrayImage> images);

/// One path per line; blank lines and '#' comments skipped. Relative paths
/// resolve against the manifest's directory.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path);

/// Loads each manifest image, center-crops it to `side` (0 = the largest power
/// of two fitting every image) and extracts patches. Errors name the
/// offending path.
PatchLibrary build_library(std::span<const std::filesystem::path> images, std::size_t n,
                           std::size_t stride, std::size_t side = 0,
                           std::size_t workers = 1);

std::vector<std::uint8_t> encode_library(const PatchLibrary& lib);
PatchLibrary decode_library(std::span<const std::uint8_t> bytes);
void save_library(const PatchLibrary& lib, const std::filesystem::path& path);
PatchLibrary load_library(const std::filesystem::path& path);

}  // namespace patchmosaic
