#include "patchmosaic/analysis.hpp"
#include "patchmosaic/container.hpp"
#include "patchmosaic/error.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace patchmosaic;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Covariance of the centered patches, computed straight from pixel bytes.
std::vector<double> oracle_covariance(const PatchLibrary& lib) {
    const std::size_t d = lib.dim();
    const std::size_t m = lib.size();
    std::vector<std::vector<double>> rows(m, std::vector<double>(d));
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const Patch p = lib.patch(i);
        double mu = 0.0;
        for (auto v : p.values) mu += v;
        mu /= static_cast<double>(d);
        for (std::size_t t = 0; t < d; ++t) {
            rows[i][t] = p.values[t] - mu;
            mean[t] += rows[i][t];
        }
    }
    for (auto& x : mean) x /= static_cast<double>(m);
    std::vector<double> cov(d * d, 0.0);
    for (const auto& r : rows) {
        for (std::size_t a = 0; a < d; ++a) {
            for (std::size_t b = 0; b < d; ++b) cov[a * d + b] += (r[a] - mean[a]) * (r[b] - mean[b]);
        }
    }
    for (auto& x : cov) x /= static_cast<double>(m);
    return cov;
}

PatchLibrary random_library(std::uint64_t seed, std::size_t images, std::size_t side,
                            std::size_t n) {
    std::mt19937_64 rng(seed);
    std::vector<GrayImage> imgs;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < images; ++i) {
        imgs.push_back(testing_support::random_image(rng, side, side));
        names.push_back(std::to_string(i));
    }
    return PatchLibrary::from_images(imgs, names, n, n);
}

}  // namespace

TEST(Dct, TwoByTwoEntries) {
    const auto g = dct_basis(2, 4);
    ASSERT_EQ(g.count(), 4u);
    for (const auto& v : g.vectors) {
        for (double x : v) EXPECT_NEAR(std::abs(x), 0.5, 1e-15);
    }
}

TEST(Dct, FirstBasisIsConstant) {
    for (std::size_t n : {2u, 4u, 8u, 16u, 32u}) {
        const auto g = dct_basis(n, 1);
        for (double x : g.vectors[0]) EXPECT_NEAR(x, 1.0 / static_cast<double>(n), 1e-15);
    }
}

TEST(Dct, OrthonormalGram) {
    for (std::size_t n : {2u, 8u, 16u}) {
        const auto g = dct_basis(n, n * n);
        for (std::size_t a = 0; a < g.count(); ++a) {
            for (std::size_t b = 0; b < g.count(); ++b) {
                ASSERT_NEAR(dot(g.vectors[a], g.vectors[b]), a == b ? 1.0 : 0.0, 1e-10);
            }
        }
    }
}

TEST(Dct, ConstantPatchHasOnlyDc) {
    const auto g = dct_basis(8, 64);
    const std::vector<double> flat(64, 77.0);
    EXPECT_NEAR(dot(flat, g.vectors[0]), 77.0 * 8.0, 1e-9);
    for (std::size_t c = 1; c < 64; ++c) EXPECT_NEAR(dot(flat, g.vectors[c]), 0.0, 1e-9);
}

TEST(Dct, ZigzagOrder) {
    const std::size_t n = 4;
    const auto g = dct_basis(n, 3);
    // Second basis varies vertically only, third horizontally only.
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 1; x < n; ++x) {
            EXPECT_NEAR(g.vectors[1][y * n + x], g.vectors[1][y * n], 1e-15);
            EXPECT_NEAR(g.vectors[2][x * n + y], g.vectors[2][y], 1e-15);
        }
    }
    EXPECT_THROW(dct_basis(4, 17), ValidationError);
    EXPECT_THROW(dct_basis(4, 0), ValidationError);
}

TEST(Pca, RecoversSingleDirection) {
    const std::size_t n = 4;
    std::vector<double> pattern(16);
    for (std::size_t t = 0; t < 16; ++t) pattern[t] = ((t * 7 + t / 4) % 2) ? 1.0 : -1.0;
    double sum = 0.0;
    for (double x : pattern) sum += x;
    ASSERT_EQ(sum, 0.0);

    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> amp(-40, 40);
    std::vector<GrayImage> imgs;
    for (int i = 0; i < 3; ++i) {
        GrayImage img(16, 16);
        for (std::size_t cy = 0; cy < 4; ++cy) {
            for (std::size_t cx = 0; cx < 4; ++cx) {
                const int a = amp(rng);
                for (std::size_t y = 0; y < n; ++y) {
                    for (std::size_t x = 0; x < n; ++x) {
                        img.at(cx * n + x, cy * n + y) =
                            static_cast<std::uint8_t>(128 + a * pattern[y * n + x]);
                    }
                }
            }
        }
        imgs.push_back(img);
    }
    const auto lib = PatchLibrary::from_images(imgs, {"a", "b", "c"}, n, n);
    const auto g = pca_components(lib, 3);
    const auto oracle = testing_support::jacobi_eigen(oracle_covariance(lib), 16);
    std::vector<double> unit = pattern;
    for (auto& x : unit) x /= 4.0;
    EXPECT_GE(std::abs(dot(g.vectors[0], unit)), 1.0 - 1e-6);
    EXPECT_GE(std::abs(dot(g.vectors[0], oracle.vectors[0])), 1.0 - 1e-6);
    EXPECT_NEAR(g.weights[0], oracle.values[0], 1e-9 * oracle.values[0]);
    EXPECT_NEAR(g.weights[1], 0.0, 1e-9);
}

TEST(Pca, MatchesJacobiOnRandomCorpus) {
    const auto lib = random_library(42, 3, 16, 4);
    const auto g = pca_components(lib, 16);
    const auto oracle = testing_support::jacobi_eigen(oracle_covariance(lib), 16);
    for (std::size_t c = 0; c < 4; ++c) {
        EXPECT_NEAR(g.weights[c], oracle.values[c], 1e-8 * oracle.values[0]);
        EXPECT_GE(std::abs(dot(g.vectors[c], oracle.vectors[c])), 1.0 - 1e-6);
    }
}

TEST(Pca, OrthonormalAndFullRankRoundTrip) {
    const auto lib = random_library(43, 2, 32, 8);
    const auto g = pca_components(lib, 64, 2);
    for (std::size_t a = 0; a < 64; ++a) {
        for (std::size_t b = 0; b < 64; ++b) {
            ASSERT_NEAR(dot(g.vectors[a], g.vectors[b]), a == b ? 1.0 : 0.0, 1e-10);
        }
        for (std::size_t t = 1; t < 64; ++t) {
            // Largest-magnitude coordinate is positive.
            ASSERT_LE(std::abs(g.vectors[a][t]),
                      *std::max_element(g.vectors[a].begin(), g.vectors[a].end()) + 1e-15);
        }
    }
    for (std::size_t i = 0; i < lib.size(); i += 7) {
        const auto x = center_patch(lib.patch(i)).values;
        std::vector<double> back(64, 0.0);
        for (const auto& v : g.vectors) {
            const double c = dot(x, v);
            for (std::size_t t = 0; t < 64; ++t) back[t] += c * v[t];
        }
        for (std::size_t t = 0; t < 64; ++t) ASSERT_NEAR(back[t], x[t], 1e-8);
    }
}

TEST(Pca, IndependentOfImageOrder) {
    std::mt19937_64 rng(44);
    std::vector<GrayImage> imgs;
    for (int i = 0; i < 3; ++i) imgs.push_back(testing_support::random_image(rng, 16, 16));
    const auto a = PatchLibrary::from_images(imgs, {"0", "1", "2"}, 4, 4);
    std::vector<GrayImage> rev(imgs.rbegin(), imgs.rend());
    const auto b = PatchLibrary::from_images(rev, {"2", "1", "0"}, 4, 4);
    const auto ga = pca_components(a, 4);
    const auto gb = pca_components(b, 4);
    for (std::size_t c = 0; c < 4; ++c) {
        EXPECT_NEAR(ga.weights[c], gb.weights[c], 1e-9 * ga.weights[0]);
        for (std::size_t t = 0; t < 16; ++t) EXPECT_NEAR(ga.vectors[c][t], gb.vectors[c][t], 1e-7);
    }
}

TEST(Pca, Errors) {
    const auto flat = PatchLibrary::from_images(std::vector<GrayImage>{GrayImage(8, 8, 50)},
                                                {"flat"}, 4, 4);
    EXPECT_THROW(pca_components(flat, 1), DataError);
    const auto lib = random_library(45, 1, 8, 4);
    EXPECT_THROW(pca_components(lib, 0), ValidationError);
    EXPECT_THROW(pca_components(lib, 17), ValidationError);
}

TEST(Montage, LayoutAndScaling) {
    ComponentGrid g;
    g.n = 32;
    for (int c = 0; c < 64; ++c) {
        std::vector<double> v(1024);
        for (std::size_t t = 0; t < 1024; ++t) v[t] = c == 0 ? 3.5 : static_cast<double>(t) - c;
        g.vectors.push_back(v);
        g.weights.push_back(0.0);
    }
    const GrayImage img = render_montage(g, 8);
    EXPECT_EQ(img.width, 263u);
    EXPECT_EQ(img.height, 263u);
    EXPECT_EQ(img.at(0, 0), 128);
    EXPECT_EQ(img.at(31, 31), 128);
    EXPECT_EQ(img.at(32, 0), 0);   // separator
    EXPECT_EQ(img.at(33, 0), 0);   // ramp minimum
    EXPECT_EQ(img.at(33 + 31, 31), 255);
    EXPECT_EQ(img.at(0, 32), 0);

    ComponentGrid three = g;
    three.vectors.resize(3);
    const GrayImage partial = render_montage(three, 2);
    EXPECT_EQ(partial.width, 65u);
    EXPECT_EQ(partial.height, 65u);
    EXPECT_EQ(partial.at(33 + 5, 33 + 5), 0);  // empty trailing tile
    EXPECT_THROW(render_montage(g, 0), ValidationError);
}

TEST(Montage, CentroidOrdering) {
    ClusterModel model;
    model.n = 2;
    model.centroids = Centroids(4, 4);
    for (std::size_t j = 0; j < 4; ++j) model.centroids.row(j)[0] = static_cast<double>(j);
    model.members = {{0}, {1, 2, 3}, {4, 5, 6}, {7, 8}};
    const auto g = centroid_components(model);
    ASSERT_EQ(g.count(), 4u);
    const std::vector<double> expected_first{1, 2, 3, 0};
    const std::vector<double> expected_weight{3, 3, 2, 1};
    for (std::size_t c = 0; c < 4; ++c) {
        EXPECT_EQ(g.vectors[c][0], expected_first[c]);
        EXPECT_EQ(g.weights[c], expected_weight[c]);
    }
}

TEST(Components, FileRoundTrip) {
    testing_support::TempDir dir;
    const auto g = dct_basis(4, 10);
    save_components(g, dir / "c.pmcg");
    const auto back = load_components(dir / "c.pmcg");
    EXPECT_EQ(back.n, g.n);
    EXPECT_EQ(back.order, g.order);
    EXPECT_EQ(back.vectors, g.vectors);
    EXPECT_EQ(back.weights, g.weights);
    const std::vector<std::uint8_t> junk{'P', 'M', 'L', 'B', 0, 0, 0, 0};
    write_file_bytes(dir / "bad.pmcg", junk);
    EXPECT_THROW(load_components(dir / "bad.pmcg"), DataError);
}
