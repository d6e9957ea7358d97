#pragma once

#include "patchmosaic/reconstruction.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace patchmosaic {

struct FrameSequence {
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::size_t k = 0;
    bool histogram_match = false;
    std::vector<GrayImage> frames;
    std::vector<ReconstructionGrid> grids;

    std::size_t frame_count() const { return frames.size(); }
};

/// Matches the target once, then renders frame_count frames; frame f draws
/// from per-cell streams keyed by (seed, f, cell). Frame 0 equals
/// reconstruct() with the same seed.
FrameSequence generate_frames(const GrayImage& target, const ClusterModel& model,
                              const PatchLibrary& library, std::size_t frame_count,
                              std::uint64_t seed, const ReconstructOptions& options);

std::string frame_file_name(std::size_t frame);

/// SHA-256 over (u64 width, u64 height, pixels).
std::string image_digest(const GrayImage& img);

/// Writes frame_00000.png ... plus frames.manifest into `directory`.
/// `config` holds extra key=value pairs recorded under "config." in the
/// manifest.
void write_frames(const FrameSequence& seq, const std::filesystem::path& directory,
                  const std::vector<std::pair<std::string, std::string>>& config = {});

struct FrameManifest {
    std::uint64_t seed = 0;
    std::size_t frame_count = 0;
    std::size_t n = 0;
    std::size_t k = 0;
    bool histogram_match = false;
    std::string config_hash;
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<std::string> files;
    std::vector<std::string> digests;
};

inline constexpr const char* kFrameManifestName = "frames.manifest";

/// Parses a manifest and verifies its config_hash.
FrameManifest read_frame_manifest(const std::filesystem::path& path);

}  // namespace patchmosaic
