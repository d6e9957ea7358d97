#include "patchmosaic/cli.hpp"

#include "patchmosaic/analysis.hpp"
#include "patchmosaic/animation.hpp"
#include "patchmosaic/clustering.hpp"
#include "patchmosaic/error.hpp"
#include "patchmosaic/image_io.hpp"
#include "patchmosaic/parallel.hpp"
#include "patchmosaic/patching.hpp"
#include "patchmosaic/reconstruction.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <functional>
#include <ostream>
#include <random>

namespace patchmosaic {

namespace {

std::size_t parse_count(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ValidationError("invalid value for " + key + ": '" + v + "'");
    }
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ValidationError("invalid value for " + key + ": '" + v + "'");
    }
    return out;
}

double parse_real(const std::string& key, const std::string& v) {
    double out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ValidationError("invalid value for " + key + ": '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ValidationError("invalid value for " + key + ": '" + v + "' (expected true/false)");
}

std::string format_real(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

std::size_t RunConfig::effective_stride() const {
    if (stride != 0) return stride;
    return overlap ? std::max<std::size_t>(1, n / 2) : n;
}

void RunConfig::apply(const std::map<std::string, std::string>& values) {
    const std::map<std::string, std::function<void(const std::string&)>> setters = {
        {"n", [&](const std::string& v) { n = parse_count("n", v); }},
        {"stride", [&](const std::string& v) { stride = parse_count("stride", v); }},
        {"overlap", [&](const std::string& v) { overlap = parse_bool("overlap", v); }},
        {"side", [&](const std::string& v) { side = parse_count("side", v); }},
        {"k", [&](const std::string& v) { k = parse_count("k", v); }},
        {"epsilon", [&](const std::string& v) { epsilon = parse_real("epsilon", v); }},
        {"max_iter", [&](const std::string& v) { max_iter = parse_count("max_iter", v); }},
        {"restarts", [&](const std::string& v) { restarts = parse_count("restarts", v); }},
        {"init", [&](const std::string& v) { init = v; }},
        {"seed", [&](const std::string& v) { seed = parse_u64("seed", v); }},
        {"frames", [&](const std::string& v) { frames = parse_count("frames", v); }},
        {"histogram_match",
         [&](const std::string& v) { histogram_match = parse_bool("histogram_match", v); }},
        {"mode", [&](const std::string& v) { mode = v; }},
        {"components", [&](const std::string& v) { components = parse_count("components", v); }},
        {"columns", [&](const std::string& v) { columns = parse_count("columns", v); }},
        {"workers", [&](const std::string& v) { workers = parse_count("workers", v); }},
        {"manifest", [&](const std::string& v) { manifest = v; }},
        {"library", [&](const std::string& v) { library = v; }},
        {"model", [&](const std::string& v) { model = v; }},
        {"target", [&](const std::string& v) { target = v; }},
        {"output", [&](const std::string& v) { output = v; }},
        {"grid", [&](const std::string& v) { grid = v; }},
        {"dump", [&](const std::string& v) { dump = v; }},
    };
    for (const auto& [key, value] : values) {
        auto it = setters.find(key);
        if (it == setters.end()) throw ValidationError("unknown configuration key '" + key + "'");
        it->second(value);
    }
}

std::vector<std::pair<std::string, std::string>> RunConfig::to_pairs() const {
    std::vector<std::pair<std::string, std::string>> out = {
        {"n", std::to_string(n)},
        {"stride", std::to_string(effective_stride())},
        {"side", std::to_string(side)},
        {"k", std::to_string(k)},
        {"epsilon", format_real(epsilon)},
        {"max_iter", std::to_string(max_iter)},
        {"restarts", std::to_string(restarts)},
        {"init", init},
        {"frames", std::to_string(frames)},
        {"histogram_match", histogram_match ? "true" : "false"},
    };
    if (seed) out.emplace_back("seed", std::to_string(*seed));
    if (!mode.empty()) {
        out.emplace_back("mode", mode);
        out.emplace_back("components", std::to_string(components));
        out.emplace_back("columns", std::to_string(columns));
    }
    for (const auto& [key, path] :
         {std::pair{"manifest", manifest}, {"library", library}, {"model", model},
          {"target", target}, {"output", output}, {"grid", grid}, {"dump", dump}}) {
        if (!path.empty()) out.emplace_back(key, path.string());
    }
    return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path.string());
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": expected key = value");
        }
        out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return out;
}

void write_run_file(const RunConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "# patchmosaic run configuration; replay with --config " << path.filename().string()
        << "\n";
    for (const auto& [key, value] : config.to_pairs()) out << key << " = " << value << "\n";
    if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Commands

namespace {

void require_input(const std::filesystem::path& p, const char* key) {
    if (p.empty()) throw ValidationError(std::string("missing --") + key);
    if (!std::filesystem::exists(p)) {
        throw ValidationError(std::string("--") + key + ": no such file: " + p.string());
    }
}

void require_output(const std::filesystem::path& p) {
    if (p.empty()) throw ValidationError("missing --output");
}

std::uint64_t resolve_seed(RunConfig& cfg, std::ostream& out) {
    if (!cfg.seed) {
        std::random_device rd;
        cfg.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        out << "seed=" << *cfg.seed << " (generated; pass --seed " << *cfg.seed
            << " to replay)\n";
    }
    return *cfg.seed;
}

GrayImage load_target(const RunConfig& cfg, std::ostream& out) {
    GrayImage img = load_image(cfg.target);
    if (cfg.side != 0 && (img.width != cfg.side || img.height != cfg.side)) {
        return prepare_image(img, cfg.side);
    }
    if (img.needs_preparation()) {
        const std::size_t side = floor_power_of_two(std::min(img.width, img.height));
        out << "target " << img.width << "x" << img.height << " center-cropped to " << side
            << "x" << side << "\n";
        return prepare_image(img, side);
    }
    return img;
}

void cmd_extract(RunConfig& cfg, std::ostream& out) {
    const std::size_t stride = cfg.effective_stride();
    // Geometry first, so bad parameters fail before touching the filesystem.
    if (!is_power_of_two(cfg.n)) {
        throw ValidationError("patch side must be a power of two, got " + std::to_string(cfg.n));
    }
    validate_patch_geometry(cfg.side != 0 ? cfg.side : std::bit_ceil(cfg.n), cfg.n, stride);
    require_output(cfg.output);
    require_input(cfg.manifest, "manifest");

    const auto paths = read_manifest(cfg.manifest);
    const PatchLibrary lib = build_library(paths, cfg.n, stride, cfg.side, cfg.workers);
    save_library(lib, cfg.output);
    out << "T=" << lib.image_count() << " L=" << lib.size() / lib.image_count()
        << " M=" << lib.size() << " (N=" << lib.side() << ", n=" << lib.n()
        << ", s=" << lib.stride() << ")\n";
}

void cmd_cluster(RunConfig& cfg, std::ostream& out) {
    require_input(cfg.library, "library");
    require_output(cfg.output);
    KMeansOptions opt;
    opt.k = cfg.k;
    opt.epsilon = cfg.epsilon;
    opt.max_iter = cfg.max_iter;
    opt.restarts = cfg.restarts;
    opt.init = parse_init_method(cfg.init);
    opt.workers = cfg.workers;
    if (opt.k < 1) throw ValidationError("k must be at least 1");
    if (!(opt.epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    if (opt.max_iter < 1) throw ValidationError("max_iter must be at least 1");

    const PatchLibrary lib = load_library(cfg.library);
    if (opt.k > lib.size()) {
        throw ValidationError("k = " + std::to_string(opt.k) + " exceeds patch count M = " +
                              std::to_string(lib.size()));
    }
    opt.seed = resolve_seed(cfg, out);
    const ClusterModel model = kmeans(lib, opt);
    save_model(model, cfg.output);
    out << "k=" << model.k() << " iterations=" << model.iterations_run
        << " converged=" << (model.converged ? "true" : "false")
        << " J=" << format_real(model.final_objective) << "\n";
}

// Recorded configs describe the model actually used, not the defaults.
void record_model_geometry(RunConfig& cfg, const ClusterModel& model) {
    cfg.n = model.n;
    cfg.stride = model.stride;
    cfg.k = model.k();
}

ReconstructOptions reconstruct_options(const RunConfig& cfg) {
    return {cfg.histogram_match, cfg.workers};
}

void cmd_reconstruct(RunConfig& cfg, std::ostream& out) {
    require_input(cfg.model, "model");
    require_input(cfg.library, "library");
    require_input(cfg.target, "target");
    require_output(cfg.output);
    const auto format = format_for_path(cfg.output);

    const ClusterModel model = load_model(cfg.model);
    const PatchLibrary lib = load_library(cfg.library);
    record_model_geometry(cfg, model);
    const GrayImage target = load_target(cfg, out);
    const std::uint64_t seed = resolve_seed(cfg, out);
    const Reconstruction r = reconstruct(target, model, lib, seed, reconstruct_options(cfg));

    save_image(r.image, cfg.output, format);
    std::vector<std::string> comments;
    for (const auto& [key, value] : cfg.to_pairs()) comments.push_back(key + "=" + value);
    if (!cfg.grid.empty()) write_grid_sidecar(r.grid, cfg.grid, comments);
    write_run_file(cfg, cfg.output.string() + ".run");
    out << "reconstructed " << r.grid.grid_side << "x" << r.grid.grid_side << " cells -> "
        << cfg.output.string() << "\n";
}

void cmd_animate(RunConfig& cfg, std::ostream& out) {
    require_input(cfg.model, "model");
    require_input(cfg.library, "library");
    require_input(cfg.target, "target");
    require_output(cfg.output);
    if (cfg.frames < 1) throw ValidationError("frames must be at least 1");

    const ClusterModel model = load_model(cfg.model);
    const PatchLibrary lib = load_library(cfg.library);
    record_model_geometry(cfg, model);
    const GrayImage target = load_target(cfg, out);
    const std::uint64_t seed = resolve_seed(cfg, out);
    const FrameSequence seq =
        generate_frames(target, model, lib, cfg.frames, seed, reconstruct_options(cfg));
    write_frames(seq, cfg.output, cfg.to_pairs());
    out << "wrote " << seq.frame_count() << " frames to " << cfg.output.string() << "\n";
}

void cmd_analyze(RunConfig& cfg, std::ostream& out) {
    require_output(cfg.output);
    const auto format = format_for_path(cfg.output);
    ComponentGrid grid;
    if (cfg.mode == "pca") {
        require_input(cfg.library, "library");
        const PatchLibrary lib = load_library(cfg.library);
        grid = pca_components(lib, cfg.components, cfg.workers);
    } else if (cfg.mode == "dct") {
        if (!is_power_of_two(cfg.n)) throw ValidationError("n must be a power of two");
        grid = dct_basis(cfg.n, cfg.components);
    } else if (cfg.mode == "centroids") {
        require_input(cfg.model, "model");
        grid = centroid_components(load_model(cfg.model));
        if (cfg.components < grid.count()) {
            grid.vectors.resize(cfg.components);
            grid.weights.resize(cfg.components);
        }
    } else {
        throw ValidationError("--mode must be pca, dct or centroids");
    }
    save_image(render_montage(grid, cfg.columns), cfg.output, format);
    if (!cfg.dump.empty()) save_components(grid, cfg.dump);
    write_run_file(cfg, cfg.output.string() + ".run");
    out << cfg.mode << ": " << grid.count() << " components of " << grid.n << "x" << grid.n
        << " -> " << cfg.output.string() << "\n";
}

struct OptionSpec {
    const char* key;
    const char* flags;
    const char* help;
};

constexpr OptionSpec kOptions[] = {
    {"manifest", "--manifest", "Dataset manifest: one image path per line"},
    {"n", "-n,--patch-size", "Patch side n (power of two)"},
    {"stride", "-s,--stride", "Stride s between patch origins (power of two <= n)"},
    {"side", "--side", "Center-crop images to this square side (power of two)"},
    {"k", "-k,--clusters",
     "Cluster count. Larger patch sizes need fewer clusters: around 166 for 128x128 "
     "patches up to 512 for 8x8 patches is a reasonable range"},
    {"epsilon", "--epsilon", "Convergence threshold on centroid movement"},
    {"max_iter", "--max-iter", "Maximum Lloyd iterations per run"},
    {"restarts", "--restarts", "Independent k-means runs; the lowest objective wins"},
    {"init", "--init", "Initialisation: random (k distinct patches) or kmeans++"},
    {"seed", "--seed", "Master seed for all randomness"},
    {"frames", "--frames", "Number of frames to render"},
    {"histogram_match", "--histogram-match", "Match each patch histogram to the target (true/false)"},
    {"mode", "--mode", "Analysis mode: pca, dct or centroids"},
    {"components", "-m,--components", "Number of components to show"},
    {"columns", "--columns", "Montage columns"},
    {"workers", "-j,--workers", "Worker threads (default: PATCHMOSAIC_WORKERS or 1)"},
    {"library", "--library", "Patch library file"},
    {"model", "--model", "Cluster model file"},
    {"target", "--target", "Target image (PGM or PNG)"},
    {"output", "-o,--output", "Output file or directory"},
    {"grid", "--grid", "Write the per-cell provenance sidecar to this file"},
    {"dump", "--dump", "Also write the raw components to this file"},
};

struct Subcommand {
    const char* name;
    const char* help;
    std::vector<std::string> keys;
    void (*run)(RunConfig&, std::ostream&);
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"patchmosaic: rebuild and animate grayscale images from clustered patches"};
    app.require_subcommand(1);

    const std::vector<Subcommand> commands = {
        {"extract", "Cut a dataset into patches and write a patch library",
         {"manifest", "n", "stride", "side", "output", "workers"}, cmd_extract},
        {"cluster", "Run k-means on a patch library and write a cluster model",
         {"library", "k", "epsilon", "max_iter", "restarts", "init", "seed", "output", "workers"},
         cmd_cluster},
        {"reconstruct", "Rebuild a target image from random cluster members",
         {"model", "library", "target", "side", "seed", "histogram_match", "output", "grid",
          "workers"},
         cmd_reconstruct},
        {"animate", "Render a frame sequence with fresh random members per frame",
         {"model", "library", "target", "side", "seed", "histogram_match", "frames", "output",
          "workers"},
         cmd_animate},
        {"analyze", "Render PCA, DCT or centroid montages",
         {"mode", "library", "model", "n", "components", "columns", "output", "dump", "workers"},
         cmd_analyze},
    };

    std::map<std::string, std::string> given;
    std::string config_path;
    const Subcommand* chosen = nullptr;
    for (const auto& cmd : commands) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->add_option("--config", config_path, "key = value file; flags override it");
        for (const auto& key : cmd.keys) {
            const auto* spec = std::find_if(std::begin(kOptions), std::end(kOptions),
                                            [&](const OptionSpec& o) { return o.key == key; });
            sub->add_option_function<std::string>(
                spec->flags, [&given, key](const std::string& v) { given[key] = v; }, spec->help);
        }
        if (std::string(cmd.name) == "extract") {
            sub->add_flag_callback("--overlap", [&given] { given["overlap"] = "true"; },
                                   "Overlapping patches; stride defaults to n/2");
        }
        if (std::string(cmd.name) == "reconstruct" || std::string(cmd.name) == "animate") {
            sub->add_flag_callback("--no-histogram-match",
                                   [&given] { given["histogram_match"] = "false"; },
                                   "Keep sampled patches unmodified");
        }
        sub->callback([&chosen, &cmd] { chosen = &cmd; });
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    }

    try {
        RunConfig cfg;
        cfg.workers = default_workers();
        if (!config_path.empty()) cfg.apply(read_config_file(config_path));
        cfg.apply(given);
        if (cfg.workers == 0) throw ValidationError("workers must be at least 1");
        chosen->run(cfg, out);
        return exit_ok;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return exit_data;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return exit_io;
    }
}

}  // namespace patchmosaic
