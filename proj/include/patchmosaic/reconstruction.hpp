#pragma once

#include "patchmosaic/clustering.hpp"
#include "patchmosaic/image_io.hpp"
#include "patchmosaic/patching.hpp"
#include "patchmosaic/random.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace patchmosaic {

struct MemberChoice {
    std::uint64_t patch_index = 0;  // into the PatchLibrary
    PatchRef ref;
    std::uint64_t rank = 0;  // position within the cluster's member list

    friend bool operator==(const MemberChoice&, const MemberChoice&) = default;
};

struct CellRecord {
    std::uint32_t cluster = 0;
    MemberChoice member;

    friend bool operator==(const CellRecord&, const CellRecord&) = default;
};

/// Per-cell provenance of one reconstructed frame, row-major.
struct ReconstructionGrid {
    std::size_t grid_side = 0;
    std::size_t n = 0;
    std::vector<CellRecord> cells;

    friend bool operator==(const ReconstructionGrid&, const ReconstructionGrid&) = default;
};

struct ReconstructOptions {
    bool histogram_match = true;
    std::size_t workers = 1;
};

/// Nearest cluster of every non-overlapping target cell, row-major.
std::vector<std::uint32_t> match_target(const GrayImage& target, const ClusterModel& model,
                                        std::size_t workers = 1);

/// Uniform draw from cluster j's members using only `rng`.
MemberChoice sample_member(std::uint32_t cluster, const ClusterModel& model,
                           RandomStream& rng);

/// Maps source intensities so their cumulative distribution follows the
/// reference: v -> smallest w with CDF_ref(w) >= CDF_src(v).
Patch histogram_match(const Patch& source, const Patch& reference);

/// Throws unless model and library describe the same patches.
void check_consistency(const ClusterModel& model, const PatchLibrary& library);

struct Reconstruction {
    GrayImage image;
    ReconstructionGrid grid;
};

/// Renders frame `frame` from precomputed cluster matches. Cell c draws from
/// the stream derive_key(seed, cell_sample, {frame, c}).
Reconstruction render_frame(const GrayImage& target, std::span<const std::uint32_t> matches,
                            const ClusterModel& model, const PatchLibrary& library,
                            std::uint64_t seed, std::uint64_t frame,
                            const ReconstructOptions& options);

/// match_target followed by render_frame for frame 0.
Reconstruction reconstruct(const GrayImage& target, const ClusterModel& model,
                           const PatchLibrary& library, std::uint64_t seed,
                           const ReconstructOptions& options);

/// Line-oriented sidecar:
///   lines starting with '#' are comments (run configuration),
///   then one line per cell: cell_x cell_y cluster image_index src_x src_y
void write_grid_sidecar(const ReconstructionGrid& grid, const std::filesystem::path& path,
                        const std::vector<std::string>& comment_lines = {});

struct GridSidecarRow {
    std::size_t cell_x = 0;
    std::size_t cell_y = 0;
    std::uint32_t cluster = 0;
    PatchRef ref;

    friend bool operator==(const GridSidecarRow&, const GridSidecarRow&) = default;
};

std::vector<GridSidecarRow> read_grid_sidecar(const std::filesystem::path& path);

}  // namespace patchmosaic
