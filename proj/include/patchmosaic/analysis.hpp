#pragma once

#include "patchmosaic/clustering.hpp"
#include "patchmosaic/image_io.hpp"
#include "patchmosaic/patching.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace patchmosaic {

enum class ComponentOrder { pca_descending_eigenvalue, dct_zigzag, cluster_size_descending };

/// A stack of n x n basis images (or centroids), each stored row-major.
/// `weights` carries eigenvalues, zero for DCT, or cluster sizes.
struct ComponentGrid {
    std::size_t n = 0;
    ComponentOrder order = ComponentOrder::pca_descending_eigenvalue;
    std::vector<std::vector<double>> vectors;
    std::vector<double> weights;

    std::size_t count() const { return vectors.size(); }
};

std::string component_order_name(ComponentOrder order);

/// Top-m eigenvectors of the covariance of the library's centered patches, in
/// descending eigenvalue order. Each vector's largest-magnitude coordinate is
/// positive (first one on ties). Throws DataError for a corpus without
/// variance.
ComponentGrid pca_components(const PatchLibrary& library, std::size_t m,
                             std::size_t workers = 1);

/// Orthonormal 2D DCT-II basis, zigzag order (ascending u+v, then ascending u,
/// where u is the horizontal frequency).
ComponentGrid dct_basis(std::size_t n, std::size_t m);

/// Centroids sorted by descending member count (ties: lower cluster index).
ComponentGrid centroid_components(const ClusterModel& model);

/// Tiles the vectors row-major with a one-pixel separator of 0. Each tile is
/// mapped min -> 0, max -> 255; constant tiles become 128.
GrayImage render_montage(const ComponentGrid& grid, std::size_t columns);

/// Component dump in the container format ("PMCG"): header {n, count, order,
/// weights}, payload count * n * n little-endian f64.
void save_components(const ComponentGrid& grid, const std::filesystem::path& path);
ComponentGrid load_components(const std::filesystem::path& path);

}  // namespace patchmosaic
