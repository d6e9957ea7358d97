#include "patchmosaic/patching.hpp"

#include "patchmosaic/container.hpp"
#include "patchmosaic/digest.hpp"
#include "patchmosaic/error.hpp"
#include "patchmosaic/parallel.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <exception>

namespace patchmosaic {

void validate_patch_geometry(std::size_t side, std::size_t n, std::size_t stride) {
    if (!is_power_of_two(n)) {
        throw ValidationError("patch side must be a power of two, got " + std::to_string(n));
    }
    if (!is_power_of_two(stride)) {
        throw ValidationError("stride must be a power of two, got " + std::to_string(stride));
    }
    if (stride > n) {
        throw ValidationError("stride " + std::to_string(stride) + " exceeds patch side " +
                              std::to_string(n));
    }
    if (!is_power_of_two(side)) {
        throw ValidationError("image side must be a power of two, got " + std::to_string(side));
    }
    if (n > side) {
        throw ValidationError("patch side " + std::to_string(n) + " exceeds image side " +
                              std::to_string(side));
    }
    if ((side - n) % stride != 0) {
        throw ValidationError("stride " + std::to_string(stride) + " does not divide " +
                              std::to_string(side - n));
    }
}

std::size_t patch_count(std::size_t side, std::size_t n, std::size_t stride) {
    validate_patch_geometry(side, n, stride);
    const std::size_t per_axis = (side - n) / stride + 1;
    return per_axis * per_axis;
}

std::vector<ExtractedPatch> extract_patches(const GrayImage& img, std::size_t n,
                                            std::size_t stride) {
    if (img.width != img.height) {
        throw ValidationError("image must be square before patch extraction");
    }
    const std::size_t side = img.width;
    std::vector<ExtractedPatch> out;
    out.reserve(patch_count(side, n, stride));
    for (std::size_t y = 0; y + n <= side; y += stride) {
        for (std::size_t x = 0; x + n <= side; x += stride) {
            ExtractedPatch e;
            e.ref = {0, static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)};
            e.patch.n = n;
            e.patch.values.resize(n * n);
            for (std::size_t r = 0; r < n; ++r) {
                const auto* row = img.pixels.data() + (y + r) * side + x;
                std::copy(row, row + n, e.patch.values.data() + r * n);
            }
            out.push_back(std::move(e));
        }
    }
    return out;
}

CenteredPatch center_patch(const Patch& p) {
    CenteredPatch c;
    c.n = p.n;
    const double total = std::accumulate(p.values.begin(), p.values.end(), 0.0);
    c.mean = p.values.empty() ? 0.0 : total / static_cast<double>(p.values.size());
    c.values.resize(p.values.size());
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        c.values[i] = static_cast<double>(p.values[i]) - c.mean;
    }
    return c;
}

GrayImage assemble(std::span<const Patch> grid, std::size_t side) {
    if (grid.empty()) throw ValidationError("cannot assemble an empty patch grid");
    const std::size_t n = grid.front().n;
    for (const auto& p : grid) {
        if (p.n != n || p.values.size() != n * n) {
            throw ValidationError("patch grid mixes patch sizes");
        }
    }
    if (n == 0 || side % n != 0) {
        throw ValidationError("patch side " + std::to_string(n) + " does not tile side " +
                              std::to_string(side));
    }
    const std::size_t cells = side / n;
    if (grid.size() != cells * cells) {
        throw ValidationError("expected " + std::to_string(cells * cells) + " patches, got " +
                              std::to_string(grid.size()));
    }
    GrayImage out(side, side);
    for (std::size_t cy = 0; cy < cells; ++cy) {
        for (std::size_t cx = 0; cx < cells; ++cx) {
            const Patch& p = grid[cy * cells + cx];
            for (std::size_t r = 0; r < n; ++r) {
                std::copy_n(p.values.data() + r * n, n,
                            out.pixels.data() + (cy * n + r) * side + cx * n);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// PatchLibrary

Patch PatchLibrary::patch(std::size_t i) const {
    auto px = pixels(i);
    return Patch{n_, std::vector<std::uint8_t>(px.begin(), px.end())};
}

std::string dataset_digest(std::span<const GrayImage> images) {
    Sha256 h;
    h.update("patchmosaic-dataset/1");
    h.update_u64(images.empty() ? 0 : images.front().width);
    h.update_u64(images.size());
    for (const auto& img : images) h.update(img.pixels);
    return h.hex_digest();
}

PatchLibrary PatchLibrary::from_images(std::span<const GrayImage> images,
                                       std::vector<std::string> names, std::size_t n,
                                       std::size_t stride, std::size_t workers) {
    if (images.empty()) throw ValidationError("empty dataset: no images in manifest");
    if (names.size() != images.size()) {
        throw ValidationError("manifest names do not match image count");
    }
    const std::size_t side = images.front().width;
    for (std::size_t t = 0; t < images.size(); ++t) {
        if (images[t].needs_preparation() || images[t].width != side) {
            throw ValidationError("image is not prepared to the common side " +
                                  std::to_string(side) + ": " + names[t]);
        }
    }
    const std::size_t per_image = patch_count(side, n, stride);

    PatchLibrary lib;
    lib.n_ = n;
    lib.stride_ = stride;
    lib.side_ = side;
    lib.manifest_ = std::move(names);
    lib.digest_ = dataset_digest(images);
    lib.refs_.resize(per_image * images.size());
    lib.pixels_.resize(lib.refs_.size() * n * n);

    // Each image owns a fixed slice of the output, so scheduling cannot
    // reorder patches.
    parallel_for(images.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            auto patches = extract_patches(images[t], n, stride);
            for (std::size_t i = 0; i < patches.size(); ++i) {
                const std::size_t idx = t * per_image + i;
                lib.refs_[idx] = patches[i].ref;
                lib.refs_[idx].image_index = static_cast<std::uint32_t>(t);
                std::copy(patches[i].patch.values.begin(), patches[i].patch.values.end(),
                          lib.pixels_.data() + idx * n * n);
            }
        }
    });
    return lib;
}

std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    const auto base = path.parent_path();
    std::vector<std::filesystem::path> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto last = line.find_last_not_of(" \t");
        std::filesystem::path p = line.substr(first, last - first + 1);
        out.push_back(p.is_absolute() ? p : base / p);
    }
    return out;
}

PatchLibrary build_library(std::span<const std::filesystem::path> paths, std::size_t n,
                           std::size_t stride, std::size_t side, std::size_t workers) {
    if (paths.empty()) throw ValidationError("empty dataset: no images in manifest");
    if (side != 0) validate_patch_geometry(side, n, stride);

    std::vector<GrayImage> images(paths.size());
    std::vector<std::string> names;
    names.reserve(paths.size());
    for (const auto& p : paths) names.push_back(p.string());

    std::vector<std::exception_ptr> errors(paths.size());
    parallel_for(paths.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            try {
                images[t] = load_image(paths[t]);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        }
    });
    // First failure in manifest order, whatever the scheduling.
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    if (side == 0) {
        std::size_t smallest = images.front().width;
        for (const auto& img : images) smallest = std::min({smallest, img.width, img.height});
        side = floor_power_of_two(smallest);
        if (side < 4) throw DataError("images are too small (smallest side " +
                                      std::to_string(smallest) + ")");
        validate_patch_geometry(side, n, stride);
    }
    for (std::size_t t = 0; t < images.size(); ++t) {
        if (images[t].width == side && images[t].height == side) continue;
        if (images[t].width < side || images[t].height < side) {
            throw DataError("image smaller than side " + std::to_string(side) + ": " +
                            names[t]);
        }
        images[t] = prepare_image(images[t], side);
    }
    return PatchLibrary::from_images(images, std::move(names), n, stride, workers);
}

// ---------------------------------------------------------------------------
// Library container ("PMLB")
//
// header: {n, stride, side, image_count, patch_count, manifest, dataset_digest}
// payload: patch_count records of (u32 image_index, u32 x, u32 y), then
//          patch_count * n * n pixel bytes.

namespace {
constexpr std::array<char, 4> kLibraryMagic{'P', 'M', 'L', 'B'};
constexpr std::uint32_t kLibraryVersion = 1;
}  // namespace

std::vector<std::uint8_t> encode_library(const PatchLibrary& lib) {
    Container c;
    c.magic = kLibraryMagic;
    c.version = kLibraryVersion;
    c.header = {{"n", lib.n()},
                {"stride", lib.stride()},
                {"side", lib.side()},
                {"image_count", lib.image_count()},
                {"patch_count", lib.size()},
                {"manifest", lib.manifest()},
                {"dataset_digest", lib.digest()}};
    ByteWriter w(c.payload);
    for (std::size_t i = 0; i < lib.size(); ++i) {
        w.u32(lib.ref(i).image_index);
        w.u32(lib.ref(i).x);
        w.u32(lib.ref(i).y);
    }
    w.bytes(lib.all_pixels());
    return encode_container(c);
}

PatchLibrary decode_library(std::span<const std::uint8_t> bytes) {
    Container c = decode_container(bytes, kLibraryMagic);
    if (c.version != kLibraryVersion) {
        throw DataError("unsupported library format version " + std::to_string(c.version));
    }
    PatchLibrary lib;
    try {
        lib.n_ = c.header.at("n").get<std::size_t>();
        lib.stride_ = c.header.at("stride").get<std::size_t>();
        lib.side_ = c.header.at("side").get<std::size_t>();
        lib.manifest_ = c.header.at("manifest").get<std::vector<std::string>>();
        lib.digest_ = c.header.at("dataset_digest").get<std::string>();
        const auto count = c.header.at("patch_count").get<std::size_t>();
        if (c.header.at("image_count").get<std::size_t>() != lib.manifest_.size()) {
            throw DataError("library image_count does not match manifest");
        }
        validate_patch_geometry(lib.side_, lib.n_, lib.stride_);
        if (count != lib.manifest_.size() * patch_count(lib.side_, lib.n_, lib.stride_)) {
            throw DataError("library patch_count inconsistent with geometry");
        }
        ByteReader r(c.payload);
        lib.refs_.resize(count);
        for (auto& ref : lib.refs_) {
            ref.image_index = r.u32();
            ref.x = r.u32();
            ref.y = r.u32();
            if (ref.image_index >= lib.manifest_.size() || ref.x + lib.n_ > lib.side_ ||
                ref.y + lib.n_ > lib.side_) {
                throw DataError("library patch reference out of bounds");
            }
        }
        auto px = r.bytes(count * lib.n_ * lib.n_);
        lib.pixels_.assign(px.begin(), px.end());
        if (r.remaining() != 0) throw DataError("trailing bytes in library file");
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed library header: ") + e.what());
    } catch (const ValidationError& e) {
        throw DataError(std::string("invalid library geometry: ") + e.what());
    }
    return lib;
}

void save_library(const PatchLibrary& lib, const std::filesystem::path& path) {
    write_file_bytes(path, encode_library(lib));
}

PatchLibrary load_library(const std::filesystem::path& path) {
    return decode_library(read_file_bytes(path));
}

}  // namespace patchmosaic
