#pragma once

#include "patchmosaic/patching.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace patchmosaic {

/// Row-major k x dim matrix of cluster centroids.
struct Centroids {
    std::size_t k = 0;
    std::size_t dim = 0;
    std::vector<double> values;

    Centroids() = default;
    Centroids(std::size_t k_, std::size_t dim_) : k(k_), dim(dim_), values(k_ * dim_, 0.0) {}

    std::span<double> row(std::size_t j) { return {values.data() + j * dim, dim}; }
    std::span<const double> row(std::size_t j) const { return {values.data() + j * dim, dim}; }

    friend bool operator==(const Centroids&, const Centroids&) = default;
};

/// The centered vectors k-means runs on. Either owns dense values or views a
/// PatchLibrary's bytes and centers on the fly, which keeps large corpora at
/// one byte per coordinate. A library-backed set must not outlive its library.
class CenteredSet {
public:
    static CenteredSet dense(std::size_t dim, std::vector<double> values);
    static CenteredSet from_library(const PatchLibrary& lib);

    std::size_t size() const { return size_; }
    std::size_t dim() const { return dim_; }

    /// Writes centered vector i into out (out.size() == dim()).
    void fill(std::size_t i, std::span<double> out) const;

private:
    std::size_t size_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> dense_;
    std::span<const std::uint8_t> bytes_;
    std::vector<double> means_;
};

using Assignments = std::vector<std::uint32_t>;

/// Squared Euclidean distance, accumulated in coordinate order.
double squared_distance(std::span<const double> a, std::span<const double> b);

/// Lowest-index argmin of Euclidean distance to the centroids.
std::uint32_t nearest_centroid(std::span<const double> query, const Centroids& centroids);

/// Within-cluster sum of squares, summed in patch-index order.
double objective(const CenteredSet& set, std::span<const std::uint32_t> assignments,
                 const Centroids& centroids, std::size_t workers = 1);

Assignments assign_step(const CenteredSet& set, const Centroids& centroids,
                        std::size_t workers = 1);

struct UpdateResult {
    Centroids centroids;                       // empty clusters get the zero vector
    std::vector<std::uint32_t> empty_clusters;  // ascending
};

/// Cluster means, each accumulated in ascending patch-index order.
UpdateResult update_step(const CenteredSet& set, std::span<const std::uint32_t> assignments,
                         std::size_t k, std::size_t workers = 1);

enum class InitMethod { random_patches, kmeans_plus_plus };

struct KMeansOptions {
    std::size_t k = 0;
    double epsilon = 1e-4;
    std::size_t max_iter = 300;
    std::size_t restarts = 3;
    std::uint64_t seed = 0;
    InitMethod init = InitMethod::random_patches;
    std::size_t workers = 1;
};

struct LloydRun {
    Centroids centroids;
    Assignments assignments;
    std::size_t iterations = 0;
    double objective = 0.0;
    bool converged = false;
    std::vector<double> objective_history;  // J after every assignment step
};

struct KMeansResult {
    LloydRun best;
    std::size_t best_run = 0;
    std::vector<double> run_objectives;
};

/// One Lloyd run with the stream for restart `run_index`.
LloydRun lloyd_run(const CenteredSet& set, const KMeansOptions& options,
                   std::size_t run_index);

/// Best of options.restarts runs by final objective (ties: lowest run index).
KMeansResult kmeans_centered(const CenteredSet& set, const KMeansOptions& options);

struct ClusterModel {
    std::size_t n = 0;
    std::size_t stride = 0;
    std::size_t side = 0;
    std::uint64_t seed = 0;
    double epsilon = 0.0;
    std::size_t max_iter = 0;
    std::size_t restarts = 0;
    InitMethod init = InitMethod::random_patches;
    std::size_t iterations_run = 0;
    double final_objective = 0.0;
    bool converged = false;
    std::string dataset_digest;
    Centroids centroids;
    /// Library patch indices per cluster, ascending.
    std::vector<std::vector<std::uint64_t>> members;
    /// PatchRef of each member, parallel to `members`.
    std::vector<std::vector<PatchRef>> member_refs;

    std::size_t k() const { return centroids.k; }
    std::size_t dim() const { return centroids.dim; }

    friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

/// Clusters the centered patches of `lib`. Throws ValidationError unless
/// 1 <= k <= M, epsilon > 0 and max_iter >= 1.
ClusterModel kmeans(const PatchLibrary& lib, const KMeansOptions& options);

std::uint32_t nearest_cluster(const CenteredPatch& query, const ClusterModel& model);

std::string init_method_name(InitMethod m);
InitMethod parse_init_method(const std::string& name);

std::vector<std::uint8_t> encode_model(const ClusterModel& model);
ClusterModel decode_model(std::span<const std::uint8_t> bytes);
void save_model(const ClusterModel& model, const std::filesystem::path& path);
ClusterModel load_model(const std::filesystem::path& path);

}  // namespace patchmosaic
