// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include "patchmosaic/analysis.hpp"
#include "patchmosaic/animation.hpp"
#include "patchmosaic/clustering.hpp"
#include "patchmosaic/image_io.hpp"
#include "patchmosaic/patching.hpp"
#include "patchmosaic/reconstruction.hpp"

#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

using namespace patchmosaic;
namespace ts = testing_support;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Records the first failure; later checks still run but keep the first message.
struct Check {
    Outcome& o;
    bool operator()(bool ok, const std::string& what) {
        if (!ok && o.pass) {
            o.pass = false;
            o.detail = what;
        }
        return ok;
    }
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Patch cell_of(const GrayImage& img, std::size_t n, std::size_t c) {
    const std::size_t cells = img.width / n;
    Patch p{n, std::vector<std::uint8_t>(n * n)};
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t x = 0; x < n; ++x) {
            p.values[r * n + x] = img.at((c % cells) * n + x, (c / cells) * n + r);
        }
    }
    return p;
}

std::vector<std::vector<double>> centroid_rows(const Centroids& c) {
    std::vector<std::vector<double>> rows;
    for (std::size_t j = 0; j < c.k; ++j) rows.emplace_back(c.row(j).begin(), c.row(j).end());
    return rows;
}

PatchLibrary structured_library(std::size_t images, std::size_t side, std::size_t n,
                                std::uint64_t seed) {
    std::vector<GrayImage> imgs;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < images; ++i) {
        imgs.push_back(ts::structured_image(seed * 1000 + i, side));
        names.push_back("img" + std::to_string(i));
    }
    return PatchLibrary::from_images(imgs, names, n, n);
}

// Monotone objective history and a Lloyd fixed point.
void check_lloyd(Check& check, const CenteredSet& set, const KMeansOptions& opt,
                 const std::string& label) {
    const auto r = kmeans_centered(set, opt);
    const auto& h = r.best.objective_history;
    for (std::size_t i = 1; i < h.size(); ++i) {
        if (!check(h[i] <= h[i - 1] * (1.0 + 1e-9), label + ": objective increased")) return;
    }
    check(r.best.converged, label + ": did not converge");
    const auto again = assign_step(set, r.best.centroids);
    check(again == r.best.assignments, label + ": assignment not stable");
    const auto upd = update_step(set, again, opt.k);
    check(upd.empty_clusters.empty(), label + ": empty cluster at fixed point");
    for (std::size_t j = 0; j < opt.k; ++j) {
        check(std::sqrt(squared_distance(upd.centroids.row(j), r.best.centroids.row(j))) <
                  opt.epsilon,
              label + ": centroid moves under update");
    }
}

// Every cell is a member of its matched cluster, and no centroid is strictly
// closer than the matched one.
void check_membership(Check& check, const GrayImage& target, const Reconstruction& r,
                      const ClusterModel& model, const PatchLibrary& lib,
                      const std::string& label) {
    const auto rows = centroid_rows(model.centroids);
    const std::size_t n = model.n;
    for (std::size_t c = 0; c < r.grid.cells.size(); ++c) {
        const auto& cell = r.grid.cells[c];
        const auto& members = model.members[cell.cluster];
        if (!check(std::binary_search(members.begin(), members.end(), cell.member.patch_index),
                   label + ": sampled patch outside its cluster"))
            return;
        if (!check(cell_of(r.image, n, c) == lib.patch(cell.member.patch_index),
                   label + ": cell differs from library patch"))
            return;
        const auto q = center_patch(cell_of(target, n, c)).values;
        const double chosen = squared_distance(q, rows[cell.cluster]);
        const auto best = ts::brute_nearest(q, rows);
        if (!check(!(squared_distance(q, rows[best]) < chosen),
                   label + ": a strictly closer centroid exists"))
            return;
    }
}

Outcome criterion1() {
    Outcome o;
    Check check{o};
    ts::TempDir dir;
    std::mt19937_64 rng(1);
    std::vector<std::filesystem::path> paths;
    for (int i = 0; i < 38; ++i) {
        const auto p = dir / ("img" + std::to_string(i) + ".pgm");
        save_image(ts::random_image(rng, 1024, 1024), p, ImageFormat::pgm);
        paths.push_back(p);
    }
    auto t0 = Clock::now();
    const auto lib38 = build_library(paths, 32, 32);
    double elapsed = seconds_since(t0);
    check(lib38.size() == 38912, "38 images gave " + std::to_string(lib38.size()));

    std::vector<GrayImage> imgs;
    std::vector<std::string> names;
    for (int i = 0; i < 230; ++i) {
        imgs.push_back(ts::random_image(rng, 1024, 1024));
        names.push_back(std::to_string(i));
    }
    t0 = Clock::now();
    const auto lib230 = PatchLibrary::from_images(imgs, names, 32, 32);
    elapsed += seconds_since(t0);
    check(lib230.size() == 235520, "230 images gave " + std::to_string(lib230.size()));
    check(elapsed < 30.0, "extraction took " + std::to_string(elapsed) + " s");
    o.detail = o.pass ? "38912 and 235520 patches, extraction " + std::to_string(elapsed) + " s"
                      : o.detail;
    return o;
}

Outcome criterion2() {
    Outcome o;
    Check check{o};
    std::mt19937_64 rng(2);
    for (int i = 0; i < 200; ++i) {
        const std::size_t side = std::size_t{4} << (rng() % 6);
        std::size_t n = std::size_t{2} << (rng() % 9);
        while (n > side) n >>= 1;
        const GrayImage img = ts::random_image(rng, side, side);
        std::vector<Patch> grid;
        for (auto& e : extract_patches(img, n, n)) grid.push_back(std::move(e.patch));
        check(assemble(grid, side) == img, "round trip differs at case " + std::to_string(i));
    }
    if (o.pass) o.detail = "200 cases bit-identical";
    return o;
}

Outcome criterion3() {
    Outcome o;
    Check check{o};
    std::mt19937_64 rng(3);
    for (int run = 0; run < 50; ++run) {
        const auto lib = structured_library(2, 32, 4, 300 + run);
        const auto set = CenteredSet::from_library(lib);
        KMeansOptions opt;
        opt.k = 2 + rng() % 14;
        opt.seed = rng();
        opt.restarts = 1;
        opt.init = run % 2 ? InitMethod::kmeans_plus_plus : InitMethod::random_patches;
        check_lloyd(check, set, opt, "run " + std::to_string(run));
    }

    const auto set = CenteredSet::dense(1, {0.0, 1.0, 10.0, 11.0});
    const auto best = ts::enumerate_two_partitions({0.0, 1.0, 10.0, 11.0});
    check(best.objective == 1.0 && best.masks.size() == 1, "enumeration oracle disagrees");
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        for (auto init : {InitMethod::random_patches, InitMethod::kmeans_plus_plus}) {
            KMeansOptions opt;
            opt.k = 2;
            opt.seed = seed;
            opt.restarts = 1;
            opt.init = init;
            const auto r = kmeans_centered(set, opt);
            unsigned mask = 0;
            for (std::size_t i = 0; i < 4; ++i) {
                if (r.best.assignments[i] != r.best.assignments[0]) mask |= 1u << i;
            }
            check(r.best.objective == 1.0 && mask == best.masks.front(),
                  "four-point instance missed the optimum for seed " + std::to_string(seed));
        }
    }
    if (o.pass) o.detail = "50 runs monotone and fixed; four-point J = 1 for 200 runs";
    return o;
}

Outcome criterion4() {
    Outcome o;
    Check check{o};
    const auto lib = structured_library(4, 64, 8, 4);
    const GrayImage target = ts::structured_image(4040, 64);
    std::vector<std::uint8_t> model_bytes;
    std::vector<std::uint8_t> image_bytes;
    std::vector<std::string> frame_digests;
    for (std::size_t workers : {1u, 2u, 8u}) {
        KMeansOptions opt;
        opt.k = 12;
        opt.seed = 44;
        opt.workers = workers;
        const auto model = kmeans(lib, opt);
        const auto bytes = encode_model(model);
        const auto r = reconstruct(target, model, lib, 45, {true, workers});
        const auto img = encode_pgm(r.image);
        const auto seq = generate_frames(target, model, lib, 10, 46, {true, workers});
        std::vector<std::string> digests;
        for (const auto& f : seq.frames) digests.push_back(image_digest(f));
        if (workers == 1) {
            model_bytes = bytes;
            image_bytes = img;
            frame_digests = digests;
        } else {
            const auto w = std::to_string(workers);
            check(bytes == model_bytes, "model differs with " + w + " workers");
            check(img == image_bytes, "reconstruction differs with " + w + " workers");
            check(digests == frame_digests, "frames differ with " + w + " workers");
        }
    }
    if (o.pass) o.detail = "model, reconstruction and 10 frames identical for 1, 2, 8 workers";
    return o;
}

Outcome criterion5() {
    Outcome o;
    Check check{o};
    std::mt19937_64 rng(5);
    for (int i = 0; i < 20; ++i) {
        const std::size_t n = std::size_t{4} << (i % 2);
        const auto lib = structured_library(2, 32, n, 500 + i);
        KMeansOptions opt;
        opt.k = 2 + rng() % 8;
        opt.seed = rng();
        opt.restarts = 1;
        const auto model = kmeans(lib, opt);
        const GrayImage target = ts::structured_image(rng(), 64);
        const auto r = reconstruct(target, model, lib, rng(), {false, 1});
        check_membership(check, target, r, model, lib, "instance " + std::to_string(i));
    }
    if (o.pass) o.detail = "20 instances, every cell verified";
    return o;
}

Outcome criterion6() {
    Outcome o;
    Check check{o};
    std::mt19937_64 rng(6);
    for (int i = 0; i < 1000; ++i) {
        const int span = 1 + static_cast<int>(rng() % 256);
        std::uniform_int_distribution<int> d(0, span - 1);
        Patch src{16, std::vector<std::uint8_t>(256)};
        Patch ref{16, std::vector<std::uint8_t>(256)};
        for (auto& v : src.values) v = static_cast<std::uint8_t>(d(rng));
        for (auto& v : ref.values) v = static_cast<std::uint8_t>(rng() % 256);
        check(histogram_match(src, ref).values == ts::rank_histogram_match(src.values, ref.values),
              "oracle mismatch at pair " + std::to_string(i));
        check(histogram_match(src, src) == src, "identity fails at pair " + std::to_string(i));
        const Patch flat{16, std::vector<std::uint8_t>(256, static_cast<std::uint8_t>(i % 256))};
        check(histogram_match(src, flat) == flat, "constant reference fails at pair " +
                                                      std::to_string(i));
    }
    if (o.pass) o.detail = "1000 pairs exact";
    return o;
}

Outcome criterion7() {
    Outcome o;
    Check check{o};
    double gram_err = 0.0;
    for (std::size_t n : {2u, 8u, 16u}) {
        const auto g = dct_basis(n, n * n);
        for (std::size_t a = 0; a < g.count(); ++a) {
            for (std::size_t b = 0; b < g.count(); ++b) {
                gram_err = std::max(gram_err,
                                    std::abs(dot(g.vectors[a], g.vectors[b]) - (a == b ? 1.0 : 0.0)));
            }
        }
    }
    check(gram_err <= 1e-10, "DCT Gram error " + std::to_string(gram_err));

    // Corpus of centered patches 128 + a * pattern.
    const std::size_t n = 8;
    std::vector<double> pattern(n * n);
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) pattern[y * n + x] = (x < n / 2) == (y % 2 == 0) ? 1 : -1;
    }
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> amp(-60, 60);
    std::vector<GrayImage> imgs;
    for (int i = 0; i < 4; ++i) {
        GrayImage img(64, 64);
        for (std::size_t c = 0; c < 64; ++c) {
            const int a = amp(rng);
            for (std::size_t t = 0; t < n * n; ++t) {
                img.at((c % 8) * n + t % n, (c / 8) * n + t / n) =
                    static_cast<std::uint8_t>(128 + a * pattern[t]);
            }
        }
        imgs.push_back(img);
    }
    const auto lib = PatchLibrary::from_images(imgs, {"0", "1", "2", "3"}, n, n);
    const std::size_t d = n * n;
    std::vector<double> cov(d * d, 0.0);
    std::vector<double> mean(d, 0.0);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < lib.size(); ++i) {
        const Patch p = lib.patch(i);
        double mu = 0.0;
        for (auto v : p.values) mu += v;
        mu /= static_cast<double>(d);
        std::vector<double> r(d);
        for (std::size_t t = 0; t < d; ++t) {
            r[t] = p.values[t] - mu;
            mean[t] += r[t] / static_cast<double>(lib.size());
        }
        rows.push_back(r);
    }
    for (const auto& r : rows) {
        for (std::size_t a = 0; a < d; ++a) {
            for (std::size_t b = 0; b < d; ++b) {
                cov[a * d + b] += (r[a] - mean[a]) * (r[b] - mean[b]) / static_cast<double>(lib.size());
            }
        }
    }
    const auto oracle = ts::jacobi_eigen(cov, d);
    const auto pca = pca_components(lib, 1);
    const double agreement = std::abs(dot(pca.vectors[0], oracle.vectors[0]));
    check(agreement >= 1.0 - 1e-6, "PCA direction |dot| = " + std::to_string(agreement));

    const auto rich = structured_library(2, 64, 8, 77);
    const auto full = pca_components(rich, 64);
    double worst = 0.0;
    for (std::size_t i = 0; i < rich.size(); ++i) {
        const auto x = center_patch(rich.patch(i)).values;
        std::vector<double> back(64, 0.0);
        for (const auto& v : full.vectors) {
            const double c = dot(x, v);
            for (std::size_t t = 0; t < 64; ++t) back[t] += c * v[t];
        }
        double err = 0.0;
        for (std::size_t t = 0; t < 64; ++t) err += (back[t] - x[t]) * (back[t] - x[t]);
        const double norm = std::sqrt(dot(x, x));
        if (norm > 0.0) worst = std::max(worst, std::sqrt(err) / norm);
    }
    check(worst <= 1e-8, "PCA round-trip relative error " + std::to_string(worst));
    if (o.pass) {
        std::ostringstream s;
        s << "Gram err " << gram_err << ", |dot| " << agreement << ", round trip " << worst;
        o.detail = s.str();
    }
    return o;
}

Outcome criterion8() {
    Outcome o;
    Check check{o};
    ts::TempDir dir;
    const auto t0 = Clock::now();
    const auto manifest = ts::write_dataset(dir.path(), 20, 256, 8);
    const auto lib = build_library(read_manifest(manifest), 16, 16, 0, 1);
    check(lib.size() == 5120, "library has " + std::to_string(lib.size()) + " patches");
    KMeansOptions opt;
    opt.k = 32;
    opt.seed = 88;
    opt.restarts = 3;
    const auto model = kmeans(lib, opt);
    save_model(model, dir / "model.pmcm");
    const GrayImage target = ts::structured_image(8080, 256);
    const auto seq = generate_frames(target, model, lib, 10, 89, {true, 1});
    write_frames(seq, dir / "frames");
    const double elapsed = seconds_since(t0);
    check(elapsed < 60.0, "pipeline took " + std::to_string(elapsed) + " s");

    // Invariants of the run: fixed point and monotone objective, a shared
    // cluster layer, members drawn from matched clusters.
    check(model.converged, "model did not converge");
    check(load_model(dir / "model.pmcm") == model, "model file does not round trip");
    const auto set = CenteredSet::from_library(lib);
    check_lloyd(check, set, opt, "end-to-end");
    const auto matches = match_target(target, model);
    const auto plain = generate_frames(target, model, lib, 10, 89, {false, 1});
    for (std::size_t f = 0; f < 10; ++f) {
        for (std::size_t c = 0; c < matches.size(); ++c) {
            check(seq.grids[f].cells[c].cluster == matches[c], "cluster layer differs by frame");
        }
        check(plain.grids[f] == seq.grids[f], "histogram matching changed member choice");
        check_membership(check, target, {plain.frames[f], plain.grids[f]}, model, lib,
                         "frame " + std::to_string(f));
    }
    const auto m = read_frame_manifest(dir / "frames" / kFrameManifestName);
    for (std::size_t f = 0; f < 10; ++f) {
        check(m.digests[f] == image_digest(load_image(dir / "frames" / m.files[f])),
              "frame digest mismatch");
    }
    if (o.pass) o.detail = "5120 patches, k=32, 10 frames in " + std::to_string(elapsed) + " s";
    return o;
}

Outcome criterion9() {
    Outcome o;
    Check check{o};
    const auto lib = structured_library(1, 32, 4, 9);
    ClusterModel model;
    model.n = 4;
    model.stride = 4;
    model.side = 32;
    model.dataset_digest = lib.digest();
    model.centroids = Centroids(lib.size(), lib.dim());
    for (std::size_t i = 0; i < lib.size(); ++i) {
        const auto c = center_patch(lib.patch(i));
        std::copy(c.values.begin(), c.values.end(), model.centroids.row(i).begin());
        model.members.push_back({i});
        model.member_refs.push_back({lib.ref(i)});
    }
    const GrayImage target = ts::structured_image(909, 64);
    for (bool hm : {false, true}) {
        const auto seq = generate_frames(target, model, lib, 10, 99, {hm, 1});
        for (std::size_t f = 1; f < seq.frame_count(); ++f) {
            check(seq.frames[f] == seq.frames[0], "frame " + std::to_string(f) + " differs");
        }
    }
    if (o.pass) o.detail = "10 frames identical with and without histogram matching";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"1 patch counts", criterion1},
        {"2 extract/assemble round trip", criterion2},
        {"3 k-means correctness", criterion3},
        {"4 determinism across workers", criterion4},
        {"5 reconstruction membership", criterion5},
        {"6 histogram matching oracle", criterion6},
        {"7 spectral checks", criterion7},
        {"8 end-to-end pipeline", criterion8},
        {"9 singleton clusters give static frames", criterion9},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
