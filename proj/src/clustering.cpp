#include "patchmosaic/clustering.hpp"

#include "patchmosaic/container.hpp"
#include "patchmosaic/error.hpp"
#include "patchmosaic/parallel.hpp"
#include "patchmosaic/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace patchmosaic {

// ---------------------------------------------------------------------------
// CenteredSet

CenteredSet CenteredSet::dense(std::size_t dim, std::vector<double> values) {
    if (dim == 0 || values.size() % dim != 0) {
        throw ValidationError("dense centered set: value count not a multiple of dim");
    }
    CenteredSet s;
    s.dim_ = dim;
    s.size_ = values.size() / dim;
    s.dense_ = std::move(values);
    return s;
}

CenteredSet CenteredSet::from_library(const PatchLibrary& lib) {
    CenteredSet s;
    s.dim_ = lib.dim();
    s.size_ = lib.size();
    s.bytes_ = lib.all_pixels();
    s.means_.resize(s.size_);
    for (std::size_t i = 0; i < s.size_; ++i) {
        auto px = lib.pixels(i);
        // Same arithmetic as center_patch(), so both paths agree bit for bit.
        const double total = std::accumulate(px.begin(), px.end(), 0.0);
        s.means_[i] = total / static_cast<double>(px.size());
    }
    return s;
}

void CenteredSet::fill(std::size_t i, std::span<double> out) const {
    if (!dense_.empty()) {
        std::copy_n(dense_.data() + i * dim_, dim_, out.data());
        return;
    }
    const std::uint8_t* px = bytes_.data() + i * dim_;
    const double mean = means_[i];
    for (std::size_t t = 0; t < dim_; ++t) out[t] = static_cast<double>(px[t]) - mean;
}

// ---------------------------------------------------------------------------
// Steps

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        const double d = a[t] - b[t];
        acc += d * d;
    }
    return acc;
}

namespace {

void require_dim(const CenteredSet& set, const Centroids& centroids) {
    if (centroids.k == 0) throw ValidationError("no centroids");
    if (set.dim() != centroids.dim) {
        throw ValidationError("dimension mismatch: patches have " + std::to_string(set.dim()) +
                              " coordinates, centroids " + std::to_string(centroids.dim));
    }
}

// Lowest-index nearest centroid plus its squared distance. Partial sums of
// squares only grow, so abandoning a candidate once it reaches the best
// distance cannot change the strict-less tie rule.
std::pair<std::uint32_t, double> nearest_with_distance(std::span<const double> q,
                                                       const Centroids& c) {
    std::uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c.k; ++j) {
        const double* row = c.values.data() + j * c.dim;
        double acc = 0.0;
        std::size_t t = 0;
        for (; t < c.dim; ++t) {
            const double d = q[t] - row[t];
            acc += d * d;
            if (acc >= best_d) break;
        }
        if (t == c.dim && acc < best_d) {
            best_d = acc;
            best = static_cast<std::uint32_t>(j);
        }
    }
    return {best, best_d};
}

struct AssignOutput {
    Assignments assignments;
    std::vector<double> distances;
};

AssignOutput assign_with_distances(const CenteredSet& set, const Centroids& centroids,
                                   std::size_t workers) {
    require_dim(set, centroids);
    AssignOutput out;
    out.assignments.resize(set.size());
    out.distances.resize(set.size());
    parallel_for(set.size(), workers, [&](std::size_t begin, std::size_t end) {
        std::vector<double> buf(set.dim());
        for (std::size_t i = begin; i < end; ++i) {
            set.fill(i, buf);
            auto [j, d] = nearest_with_distance(buf, centroids);
            out.assignments[i] = j;
            out.distances[i] = d;
        }
    });
    return out;
}

double sum_in_order(std::span<const double> values) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
}

// Member lists per cluster, each in ascending patch order.
std::vector<std::vector<std::uint64_t>> group_members(std::span<const std::uint32_t> assignments,
                                                      std::size_t k) {
    std::vector<std::vector<std::uint64_t>> groups(k);
    for (std::size_t i = 0; i < assignments.size(); ++i) groups[assignments[i]].push_back(i);
    return groups;
}

}  // namespace

std::uint32_t nearest_centroid(std::span<const double> query, const Centroids& centroids) {
    if (centroids.k == 0) throw ValidationError("no centroids");
    if (query.size() != centroids.dim) {
        throw ValidationError("dimension mismatch: query has " + std::to_string(query.size()) +
                              " coordinates, centroids " + std::to_string(centroids.dim));
    }
    return nearest_with_distance(query, centroids).first;
}

double objective(const CenteredSet& set, std::span<const std::uint32_t> assignments,
                 const Centroids& centroids, std::size_t workers) {
    require_dim(set, centroids);
    if (assignments.size() != set.size()) {
        throw ValidationError("assignment count does not match patch count");
    }
    std::vector<double> per_patch(set.size());
    parallel_for(set.size(), workers, [&](std::size_t begin, std::size_t end) {
        std::vector<double> buf(set.dim());
        for (std::size_t i = begin; i < end; ++i) {
            if (assignments[i] >= centroids.k) {
                throw ValidationError("assignment refers to a missing cluster");
            }
            set.fill(i, buf);
            per_patch[i] = squared_distance(buf, centroids.row(assignments[i]));
        }
    });
    return sum_in_order(per_patch);
}

Assignments assign_step(const CenteredSet& set, const Centroids& centroids,
                        std::size_t workers) {
    return assign_with_distances(set, centroids, workers).assignments;
}

UpdateResult update_step(const CenteredSet& set, std::span<const std::uint32_t> assignments,
                         std::size_t k, std::size_t workers) {
    if (assignments.size() != set.size()) {
        throw ValidationError("assignment count does not match patch count");
    }
    for (auto a : assignments) {
        if (a >= k) throw ValidationError("assignment refers to a missing cluster");
    }
    const auto groups = group_members(assignments, k);
    UpdateResult out{Centroids(k, set.dim()), {}};
    parallel_for(k, workers, [&](std::size_t begin, std::size_t end) {
        std::vector<double> buf(set.dim());
        for (std::size_t j = begin; j < end; ++j) {
            if (groups[j].empty()) continue;
            auto row = out.centroids.row(j);
            for (auto i : groups[j]) {
                set.fill(i, buf);
                for (std::size_t t = 0; t < buf.size(); ++t) row[t] += buf[t];
            }
            const double count = static_cast<double>(groups[j].size());
            for (auto& v : row) v /= count;
        }
    });
    for (std::size_t j = 0; j < k; ++j) {
        if (groups[j].empty()) out.empty_clusters.push_back(static_cast<std::uint32_t>(j));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lloyd

namespace {

Centroids init_random_patches(const CenteredSet& set, std::size_t k, RandomStream& rng) {
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Centroids c(k, set.dim());
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t pick = j + rng.uniform_below(order.size() - j);
        std::swap(order[j], order[pick]);
        set.fill(order[j], c.row(j));
    }
    return c;
}

Centroids init_plus_plus(const CenteredSet& set, std::size_t k, RandomStream& rng,
                         std::size_t workers) {
    Centroids c(k, set.dim());
    set.fill(rng.uniform_below(set.size()), c.row(0));
    std::vector<double> d2(set.size(), std::numeric_limits<double>::infinity());
    for (std::size_t j = 1; j < k; ++j) {
        const auto prev = c.row(j - 1);
        parallel_for(set.size(), workers, [&](std::size_t begin, std::size_t end) {
            std::vector<double> buf(set.dim());
            for (std::size_t i = begin; i < end; ++i) {
                set.fill(i, buf);
                d2[i] = std::min(d2[i], squared_distance(buf, prev));
            }
        });
        const double total = sum_in_order(d2);
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform_unit() * total;
            double acc = 0.0;
            pick = set.size() - 1;
            for (std::size_t i = 0; i < set.size(); ++i) {
                acc += d2[i];
                if (acc > target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.uniform_below(set.size());
        }
        set.fill(pick, c.row(j));
    }
    return c;
}

// Moves each empty cluster's centroid onto the patch farthest from its own
// centroid, drawing only from clusters that keep at least one member.
void repair_empty_clusters(const CenteredSet& set, std::span<const std::uint32_t> assignments,
                           std::span<const std::uint32_t> empties, Centroids& centroids,
                           std::size_t workers) {
    std::vector<double> dist(set.size());
    parallel_for(set.size(), workers, [&](std::size_t begin, std::size_t end) {
        std::vector<double> buf(set.dim());
        for (std::size_t i = begin; i < end; ++i) {
            set.fill(i, buf);
            dist[i] = squared_distance(buf, centroids.row(assignments[i]));
        }
    });
    std::vector<std::size_t> counts(centroids.k, 0);
    for (auto a : assignments) ++counts[a];

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (dist[i] > 0.0) candidates.push_back(i);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });

    auto next = candidates.begin();
    for (auto j : empties) {
        while (next != candidates.end() && counts[assignments[*next]] < 2) ++next;
        if (next == candidates.end()) {
            throw DataError("cannot fill " + std::to_string(centroids.k) +
                            " clusters: the corpus has fewer distinct centered patches");
        }
        --counts[assignments[*next]];
        set.fill(*next, centroids.row(j));
        ++next;
    }
}

double max_shift(const Centroids& a, const Centroids& b) {
    double worst = 0.0;
    for (std::size_t j = 0; j < a.k; ++j) {
        worst = std::max(worst, std::sqrt(squared_distance(a.row(j), b.row(j))));
    }
    return worst;
}

}  // namespace

LloydRun lloyd_run(const CenteredSet& set, const KMeansOptions& options,
                   std::size_t run_index) {
    const std::size_t k = options.k;
    if (k < 1) throw ValidationError("k must be at least 1");
    if (k > set.size()) {
        throw ValidationError("k = " + std::to_string(k) + " exceeds patch count " +
                              std::to_string(set.size()));
    }
    if (!(options.epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    if (options.max_iter < 1) throw ValidationError("max_iter must be at least 1");

    RandomStream rng(derive_key(options.seed, StreamTag::kmeans_restart, {run_index}));
    LloydRun run;
    run.centroids = options.init == InitMethod::kmeans_plus_plus
                        ? init_plus_plus(set, k, rng, options.workers)
                        : init_random_patches(set, k, rng);

    Assignments previous;
    bool shift_below_epsilon = false;
    for (std::size_t iter = 1; iter <= options.max_iter; ++iter) {
        auto assigned = assign_with_distances(set, run.centroids, options.workers);
        run.iterations = iter;
        run.objective_history.push_back(sum_in_order(assigned.distances));

        // Centroids already are the means of `previous`; identical assignments
        // make this a fixed point.
        if (shift_below_epsilon && assigned.assignments == previous) {
            run.assignments = std::move(assigned.assignments);
            run.objective = run.objective_history.back();
            run.converged = true;
            return run;
        }

        auto updated = update_step(set, assigned.assignments, k, options.workers);
        const bool repaired = !updated.empty_clusters.empty();
        if (repaired) {
            repair_empty_clusters(set, assigned.assignments, updated.empty_clusters,
                                  updated.centroids, options.workers);
        }
        shift_below_epsilon = !repaired && max_shift(updated.centroids, run.centroids) <
                                               options.epsilon;
        run.centroids = std::move(updated.centroids);
        previous = std::move(assigned.assignments);
    }

    // Out of iterations: settle on the last assignment with matching means.
    auto final_assign = assign_step(set, run.centroids, options.workers);
    auto final_update = update_step(set, final_assign, k, options.workers);
    if (!final_update.empty_clusters.empty()) {
        throw DataError("k-means stopped at max_iter with empty clusters");
    }
    run.centroids = std::move(final_update.centroids);
    run.assignments = std::move(final_assign);
    run.objective = objective(set, run.assignments, run.centroids, options.workers);
    run.converged = false;
    return run;
}

KMeansResult kmeans_centered(const CenteredSet& set, const KMeansOptions& options) {
    const std::size_t runs = std::max<std::size_t>(1, options.restarts);
    KMeansResult result;
    for (std::size_t r = 0; r < runs; ++r) {
        LloydRun run = lloyd_run(set, options, r);
        result.run_objectives.push_back(run.objective);
        if (r == 0 || run.objective < result.best.objective) {
            result.best = std::move(run);
            result.best_run = r;
        }
    }
    return result;
}

ClusterModel kmeans(const PatchLibrary& lib, const KMeansOptions& options) {
    if (lib.empty()) throw ValidationError("empty patch library");
    const CenteredSet set = CenteredSet::from_library(lib);
    KMeansResult result = kmeans_centered(set, options);

    ClusterModel model;
    model.n = lib.n();
    model.stride = lib.stride();
    model.side = lib.side();
    model.seed = options.seed;
    model.epsilon = options.epsilon;
    model.max_iter = options.max_iter;
    model.restarts = std::max<std::size_t>(1, options.restarts);
    model.init = options.init;
    model.iterations_run = result.best.iterations;
    model.final_objective = result.best.objective;
    model.converged = result.best.converged;
    model.dataset_digest = lib.digest();
    model.centroids = std::move(result.best.centroids);
    model.members = group_members(result.best.assignments, options.k);
    model.member_refs.resize(options.k);
    for (std::size_t j = 0; j < options.k; ++j) {
        model.member_refs[j].reserve(model.members[j].size());
        for (auto i : model.members[j]) model.member_refs[j].push_back(lib.ref(i));
    }
    return model;
}

std::uint32_t nearest_cluster(const CenteredPatch& query, const ClusterModel& model) {
    return nearest_centroid(query.values, model.centroids);
}

std::string init_method_name(InitMethod m) {
    return m == InitMethod::kmeans_plus_plus ? "kmeans++" : "random";
}

InitMethod parse_init_method(const std::string& name) {
    if (name == "random") return InitMethod::random_patches;
    if (name == "kmeans++") return InitMethod::kmeans_plus_plus;
    throw ValidationError("unknown init method '" + name + "' (random or kmeans++)");
}

// ---------------------------------------------------------------------------
// Model container ("PMCM")
//
// header: k, dim, n, stride, side, seed, epsilon, max_iter, restarts, init,
//         iterations_run, final_objective, converged, dataset_digest,
//         member_counts[k]
// payload: k * dim f64 centroids (row-major), then for each cluster in order
//          member_counts[j] records of (u64 patch_index, u32 image_index,
//          u32 x, u32 y).

namespace {
constexpr std::array<char, 4> kModelMagic{'P', 'M', 'C', 'M'};
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

std::vector<std::uint8_t> encode_model(const ClusterModel& m) {
    Container c;
    c.magic = kModelMagic;
    c.version = kModelVersion;
    std::vector<std::size_t> counts;
    for (const auto& members : m.members) counts.push_back(members.size());
    c.header = {{"k", m.k()},
                {"dim", m.dim()},
                {"n", m.n},
                {"stride", m.stride},
                {"side", m.side},
                {"seed", m.seed},
                {"epsilon", m.epsilon},
                {"max_iter", m.max_iter},
                {"restarts", m.restarts},
                {"init", init_method_name(m.init)},
                {"iterations_run", m.iterations_run},
                {"final_objective", m.final_objective},
                {"converged", m.converged},
                {"dataset_digest", m.dataset_digest},
                {"member_counts", counts}};
    ByteWriter w(c.payload);
    for (double v : m.centroids.values) w.f64(v);
    for (std::size_t j = 0; j < m.members.size(); ++j) {
        for (std::size_t t = 0; t < m.members[j].size(); ++t) {
            w.u64(m.members[j][t]);
            w.u32(m.member_refs[j][t].image_index);
            w.u32(m.member_refs[j][t].x);
            w.u32(m.member_refs[j][t].y);
        }
    }
    return encode_container(c);
}

ClusterModel decode_model(std::span<const std::uint8_t> bytes) {
    Container c = decode_container(bytes, kModelMagic);
    if (c.version != kModelVersion) {
        throw DataError("unsupported model format version " + std::to_string(c.version));
    }
    ClusterModel m;
    try {
        const auto& h = c.header;
        const auto k = h.at("k").get<std::size_t>();
        const auto dim = h.at("dim").get<std::size_t>();
        m.n = h.at("n").get<std::size_t>();
        m.stride = h.at("stride").get<std::size_t>();
        m.side = h.at("side").get<std::size_t>();
        m.seed = h.at("seed").get<std::uint64_t>();
        m.epsilon = h.at("epsilon").get<double>();
        m.max_iter = h.at("max_iter").get<std::size_t>();
        m.restarts = h.at("restarts").get<std::size_t>();
        m.init = parse_init_method(h.at("init").get<std::string>());
        m.iterations_run = h.at("iterations_run").get<std::size_t>();
        m.final_objective = h.at("final_objective").get<double>();
        m.converged = h.at("converged").get<bool>();
        m.dataset_digest = h.at("dataset_digest").get<std::string>();
        const auto counts = h.at("member_counts").get<std::vector<std::size_t>>();
        if (k == 0 || dim != m.n * m.n || counts.size() != k) {
            throw DataError("model header is inconsistent");
        }
        ByteReader r(c.payload);
        m.centroids = Centroids(k, dim);
        for (auto& v : m.centroids.values) v = r.f64();
        m.members.resize(k);
        m.member_refs.resize(k);
        const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
        std::vector<bool> seen(total, false);
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] == 0) throw DataError("model has an empty cluster");
            for (std::size_t t = 0; t < counts[j]; ++t) {
                const std::uint64_t idx = r.u64();
                PatchRef ref{r.u32(), r.u32(), r.u32()};
                if (idx >= total || seen[idx]) {
                    throw DataError("model member lists do not partition the patch set");
                }
                seen[idx] = true;
                m.members[j].push_back(idx);
                m.member_refs[j].push_back(ref);
            }
        }
        if (r.remaining() != 0) throw DataError("trailing bytes in model file");
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model header: ") + e.what());
    } catch (const ValidationError& e) {
        throw DataError(std::string("malformed model header: ") + e.what());
    }
    return m;
}

void save_model(const ClusterModel& model, const std::filesystem::path& path) {
    write_file_bytes(path, encode_model(model));
}

ClusterModel load_model(const std::filesystem::path& path) {
    return decode_model(read_file_bytes(path));
}

}  // namespace patchmosaic
