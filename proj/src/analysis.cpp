#include "patchmosaic/analysis.hpp"

#include "patchmosaic/container.hpp"
#include "patchmosaic/error.hpp"
#include "patchmosaic/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace patchmosaic {

std::string component_order_name(ComponentOrder order) {
    switch (order) {
        case ComponentOrder::pca_descending_eigenvalue: return "pca-descending-eigenvalue";
        case ComponentOrder::dct_zigzag: return "dct-zigzag";
        case ComponentOrder::cluster_size_descending: return "cluster-size-descending";
    }
    return "unknown";
}

namespace {

ComponentOrder parse_component_order(const std::string& s) {
    for (auto o : {ComponentOrder::pca_descending_eigenvalue, ComponentOrder::dct_zigzag,
                   ComponentOrder::cluster_size_descending}) {
        if (component_order_name(o) == s) return o;
    }
    throw DataError("unknown component order '" + s + "'");
}

void fix_sign(std::vector<double>& v) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    }
    if (v[arg] < 0.0) {
        for (auto& x : v) x = -x;
    }
}

}  // namespace

ComponentGrid pca_components(const PatchLibrary& library, std::size_t m, std::size_t workers) {
    if (library.empty()) throw ValidationError("empty patch library");
    const std::size_t d = library.dim();
    if (m < 1 || m > d) {
        throw ValidationError("component count " + std::to_string(m) + " outside [1, " +
                              std::to_string(d) + "]");
    }
    const CenteredSet set = CenteredSet::from_library(library);
    const std::size_t count = set.size();

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    std::vector<double> buf(d);
    for (std::size_t i = 0; i < count; ++i) {
        set.fill(i, buf);
        mean += Eigen::Map<const Eigen::VectorXd>(buf.data(), static_cast<Eigen::Index>(d));
    }
    mean /= static_cast<double>(count);

    // Scatter matrix accumulated from fixed-size row blocks; each block writes
    // its own partial, and partials are summed in block order.
    constexpr std::size_t kBlock = 1024;
    const std::size_t blocks = (count + kBlock - 1) / kBlock;
    std::vector<Eigen::MatrixXd> partial(blocks);
    parallel_for(blocks, workers, [&](std::size_t begin, std::size_t end) {
        std::vector<double> row(d);
        for (std::size_t b = begin; b < end; ++b) {
            const std::size_t lo = b * kBlock;
            const std::size_t hi = std::min(count, lo + kBlock);
            Eigen::MatrixXd x(static_cast<Eigen::Index>(hi - lo), static_cast<Eigen::Index>(d));
            for (std::size_t i = lo; i < hi; ++i) {
                set.fill(i, row);
                x.row(static_cast<Eigen::Index>(i - lo)) =
                    Eigen::Map<const Eigen::RowVectorXd>(row.data(),
                                                         static_cast<Eigen::Index>(d)) -
                    mean.transpose();
            }
            partial[b] = x.transpose() * x;
        }
    });
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                                static_cast<Eigen::Index>(d));
    for (const auto& p : partial) cov += p;
    cov /= static_cast<double>(count);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw DataError("covariance eigendecomposition failed");
    const auto& values = solver.eigenvalues();  // ascending
    const double top = values(values.size() - 1);
    if (!(top > 1e-12)) throw DataError("degenerate corpus: patches have no variance");

    ComponentGrid grid;
    grid.n = library.n();
    grid.order = ComponentOrder::pca_descending_eigenvalue;
    for (std::size_t c = 0; c < m; ++c) {
        const auto col = static_cast<Eigen::Index>(d - 1 - c);
        std::vector<double> v(d);
        for (std::size_t t = 0; t < d; ++t) {
            v[t] = solver.eigenvectors()(static_cast<Eigen::Index>(t), col);
        }
        fix_sign(v);
        grid.vectors.push_back(std::move(v));
        grid.weights.push_back(values(col));
    }
    return grid;
}

ComponentGrid dct_basis(std::size_t n, std::size_t m) {
    if (n == 0) throw ValidationError("DCT size must be positive");
    if (m < 1 || m > n * n) {
        throw ValidationError("component count " + std::to_string(m) + " outside [1, " +
                              std::to_string(n * n) + "]");
    }
    std::vector<std::pair<std::size_t, std::size_t>> freqs;  // (u, v)
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t u = 0; u < n; ++u) freqs.emplace_back(u, v);
    }
    std::sort(freqs.begin(), freqs.end(), [](const auto& a, const auto& b) {
        const auto sa = a.first + a.second;
        const auto sb = b.first + b.second;
        return sa != sb ? sa < sb : a.first < b.first;
    });

    const double nd = static_cast<double>(n);
    auto alpha = [nd](std::size_t f) { return f == 0 ? std::sqrt(1.0 / nd) : std::sqrt(2.0 / nd); };
    auto basis_1d = [nd](std::size_t f, std::size_t x) {
        return std::cos(std::numbers::pi * (2.0 * static_cast<double>(x) + 1.0) *
                        static_cast<double>(f) / (2.0 * nd));
    };

    ComponentGrid grid;
    grid.n = n;
    grid.order = ComponentOrder::dct_zigzag;
    for (std::size_t c = 0; c < m; ++c) {
        const auto [u, v] = freqs[c];
        std::vector<double> b(n * n);
        for (std::size_t y = 0; y < n; ++y) {
            for (std::size_t x = 0; x < n; ++x) {
                b[y * n + x] = alpha(u) * alpha(v) * basis_1d(u, x) * basis_1d(v, y);
            }
        }
        grid.vectors.push_back(std::move(b));
        grid.weights.push_back(0.0);
    }
    return grid;
}

ComponentGrid centroid_components(const ClusterModel& model) {
    std::vector<std::size_t> order(model.k());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return model.members[a].size() > model.members[b].size();
    });
    ComponentGrid grid;
    grid.n = model.n;
    grid.order = ComponentOrder::cluster_size_descending;
    for (auto j : order) {
        auto row = model.centroids.row(j);
        grid.vectors.emplace_back(row.begin(), row.end());
        grid.weights.push_back(static_cast<double>(model.members[j].size()));
    }
    return grid;
}

GrayImage render_montage(const ComponentGrid& grid, std::size_t columns) {
    if (grid.vectors.empty()) throw ValidationError("nothing to render");
    if (columns == 0) throw ValidationError("montage needs at least one column");
    const std::size_t n = grid.n;
    const std::size_t cols = std::min(columns, grid.count());
    const std::size_t rows = (grid.count() + cols - 1) / cols;
    GrayImage out(cols * n + cols - 1, rows * n + rows - 1, 0);
    for (std::size_t c = 0; c < grid.count(); ++c) {
        const auto& v = grid.vectors[c];
        if (v.size() != n * n) throw ValidationError("component has the wrong length");
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        const double range = *hi - *lo;
        const std::size_t x0 = (c % cols) * (n + 1);
        const std::size_t y0 = (c / cols) * (n + 1);
        for (std::size_t y = 0; y < n; ++y) {
            for (std::size_t x = 0; x < n; ++x) {
                out.at(x0 + x, y0 + y) =
                    range > 0.0 ? round_to_u8((v[y * n + x] - *lo) / range * 255.0) : 128;
            }
        }
    }
    return out;
}

namespace {
constexpr std::array<char, 4> kComponentMagic{'P', 'M', 'C', 'G'};
constexpr std::uint32_t kComponentVersion = 1;
}  // namespace

void save_components(const ComponentGrid& grid, const std::filesystem::path& path) {
    Container c;
    c.magic = kComponentMagic;
    c.version = kComponentVersion;
    c.header = {{"n", grid.n},
                {"count", grid.count()},
                {"order", component_order_name(grid.order)},
                {"weights", grid.weights}};
    ByteWriter w(c.payload);
    for (const auto& v : grid.vectors) {
        for (double x : v) w.f64(x);
    }
    write_file_bytes(path, encode_container(c));
}

ComponentGrid load_components(const std::filesystem::path& path) {
    Container c = decode_container(read_file_bytes(path), kComponentMagic);
    if (c.version != kComponentVersion) throw DataError("unsupported component file version");
    ComponentGrid grid;
    try {
        grid.n = c.header.at("n").get<std::size_t>();
        grid.order = parse_component_order(c.header.at("order").get<std::string>());
        grid.weights = c.header.at("weights").get<std::vector<double>>();
        const auto count = c.header.at("count").get<std::size_t>();
        ByteReader r(c.payload);
        grid.vectors.assign(count, std::vector<double>(grid.n * grid.n));
        for (auto& v : grid.vectors) {
            for (auto& x : v) x = r.f64();
        }
        if (r.remaining() != 0) throw DataError("trailing bytes in component file");
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed component header: ") + e.what());
    }
    return grid;
}

}  // namespace patchmosaic
