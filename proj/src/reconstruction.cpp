#include "patchmosaic/reconstruction.hpp"

#include "patchmosaic/error.hpp"
#include "patchmosaic/parallel.hpp"

#include <array>
#include <fstream>
#include <sstream>

namespace patchmosaic {

namespace {

void require_tiling(const GrayImage& target, std::size_t n) {
    if (target.width != target.height) {
        throw ValidationError("target must be square");
    }
    if (n == 0 || target.width % n != 0) {
        throw ValidationError("target side " + std::to_string(target.width) +
                              " is not divisible by patch side " + std::to_string(n));
    }
}

Patch target_cell(const GrayImage& target, std::size_t n, std::size_t cell) {
    const std::size_t cells = target.width / n;
    const std::size_t x0 = (cell % cells) * n;
    const std::size_t y0 = (cell / cells) * n;
    Patch p{n, std::vector<std::uint8_t>(n * n)};
    for (std::size_t r = 0; r < n; ++r) {
        std::copy_n(target.pixels.data() + (y0 + r) * target.width + x0, n,
                    p.values.data() + r * n);
    }
    return p;
}

}  // namespace

std::vector<std::uint32_t> match_target(const GrayImage& target, const ClusterModel& model,
                                        std::size_t workers) {
    require_tiling(target, model.n);
    if (model.dim() != model.n * model.n) throw ValidationError("model dimension mismatch");
    const std::size_t cells = target.width / model.n;
    std::vector<std::uint32_t> out(cells * cells);
    parallel_for(out.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) {
            out[c] = nearest_cluster(center_patch(target_cell(target, model.n, c)), model);
        }
    });
    return out;
}

MemberChoice sample_member(std::uint32_t cluster, const ClusterModel& model,
                           RandomStream& rng) {
    if (cluster >= model.members.size()) throw DataError("cluster index out of range");
    const auto& members = model.members[cluster];
    if (members.empty()) {
        throw DataError("cluster " + std::to_string(cluster) + " has no members");
    }
    const std::uint64_t rank = rng.uniform_below(members.size());
    return {members[rank], model.member_refs[cluster][rank], rank};
}

Patch histogram_match(const Patch& source, const Patch& reference) {
    if (source.n != reference.n || source.values.size() != reference.values.size()) {
        throw ValidationError("histogram matching needs patches of equal size");
    }
    std::array<std::uint64_t, 256> src_cdf{};
    std::array<std::uint64_t, 256> ref_cdf{};
    for (auto v : source.values) ++src_cdf[v];
    for (auto v : reference.values) ++ref_cdf[v];
    for (std::size_t v = 1; v < 256; ++v) {
        src_cdf[v] += src_cdf[v - 1];
        ref_cdf[v] += ref_cdf[v - 1];
    }
    // Equal pixel counts, so CDFs compare exactly as integer counts.
    std::array<std::uint8_t, 256> lut{};
    std::size_t w = 0;
    for (std::size_t v = 0; v < 256; ++v) {
        while (w < 255 && ref_cdf[w] < src_cdf[v]) ++w;
        lut[v] = static_cast<std::uint8_t>(w);
    }
    Patch out{source.n, source.values};
    for (auto& v : out.values) v = lut[v];
    return out;
}

void check_consistency(const ClusterModel& model, const PatchLibrary& library) {
    if (model.dataset_digest != library.digest()) {
        throw DataError("model and library come from different datasets (digest mismatch)");
    }
    if (model.n != library.n() || model.stride != library.stride()) {
        throw DataError("model and library disagree on patch side or stride");
    }
    for (const auto& members : model.members) {
        for (auto i : members) {
            if (i >= library.size()) throw DataError("model refers past the end of the library");
        }
    }
}

Reconstruction render_frame(const GrayImage& target, std::span<const std::uint32_t> matches,
                            const ClusterModel& model, const PatchLibrary& library,
                            std::uint64_t seed, std::uint64_t frame,
                            const ReconstructOptions& options) {
    require_tiling(target, model.n);
    const std::size_t n = model.n;
    const std::size_t cells = target.width / n;
    if (matches.size() != cells * cells) {
        throw ValidationError("match count does not fit the target grid");
    }
    Reconstruction out;
    out.image = GrayImage(target.width, target.height);
    out.grid.grid_side = cells;
    out.grid.n = n;
    out.grid.cells.resize(matches.size());

    parallel_for(matches.size(), options.workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) {
            RandomStream rng(derive_key(seed, StreamTag::cell_sample, {frame, c}));
            const MemberChoice choice = sample_member(matches[c], model, rng);
            out.grid.cells[c] = {matches[c], choice};
            Patch patch = library.patch(choice.patch_index);
            if (options.histogram_match) {
                patch = histogram_match(patch, target_cell(target, n, c));
            }
            const std::size_t x0 = (c % cells) * n;
            const std::size_t y0 = (c / cells) * n;
            for (std::size_t r = 0; r < n; ++r) {
                std::copy_n(patch.values.data() + r * n, n,
                            out.image.pixels.data() + (y0 + r) * target.width + x0);
            }
        }
    });
    return out;
}

Reconstruction reconstruct(const GrayImage& target, const ClusterModel& model,
                           const PatchLibrary& library, std::uint64_t seed,
                           const ReconstructOptions& options) {
    check_consistency(model, library);
    const auto matches = match_target(target, model, options.workers);
    return render_frame(target, matches, model, library, seed, 0, options);
}

void write_grid_sidecar(const ReconstructionGrid& grid, const std::filesystem::path& path,
                        const std::vector<std::string>& comment_lines) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "# patchmosaic grid v1\n";
    out << "# grid_side=" << grid.grid_side << " n=" << grid.n << "\n";
    for (const auto& line : comment_lines) out << "# " << line << "\n";
    out << "# cell_x cell_y cluster image_index src_x src_y\n";
    for (std::size_t c = 0; c < grid.cells.size(); ++c) {
        const auto& cell = grid.cells[c];
        out << c % grid.grid_side << ' ' << c / grid.grid_side << ' ' << cell.cluster << ' '
            << cell.member.ref.image_index << ' ' << cell.member.ref.x << ' '
            << cell.member.ref.y << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<GridSidecarRow> read_grid_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open grid sidecar: " + path.string());
    std::vector<GridSidecarRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        GridSidecarRow row;
        if (!(ss >> row.cell_x >> row.cell_y >> row.cluster >> row.ref.image_index >>
              row.ref.x >> row.ref.y)) {
            throw DataError("malformed grid sidecar line: " + line);
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace patchmosaic
