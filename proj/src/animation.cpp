#include "patchmosaic/animation.hpp"

#include "patchmosaic/digest.hpp"
#include "patchmosaic/error.hpp"

#include <fstream>
#include <sstream>

namespace patchmosaic {

FrameSequence generate_frames(const GrayImage& target, const ClusterModel& model,
                              const PatchLibrary& library, std::size_t frame_count,
                              std::uint64_t seed, const ReconstructOptions& options) {
    if (frame_count < 1) throw ValidationError("frame_count must be at least 1");
    check_consistency(model, library);
    const auto matches = match_target(target, model, options.workers);

    FrameSequence seq;
    seq.seed = seed;
    seq.n = model.n;
    seq.k = model.k();
    seq.histogram_match = options.histogram_match;
    seq.frames.reserve(frame_count);
    seq.grids.reserve(frame_count);
    for (std::size_t f = 0; f < frame_count; ++f) {
        auto r = render_frame(target, matches, model, library, seed, f, options);
        seq.frames.push_back(std::move(r.image));
        seq.grids.push_back(std::move(r.grid));
    }
    return seq;
}

std::string frame_file_name(std::size_t frame) {
    std::string digits = std::to_string(frame);
    if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
    return "frame_" + digits + ".png";
}

std::string image_digest(const GrayImage& img) {
    Sha256 h;
    h.update_u64(img.width);
    h.update_u64(img.height);
    h.update(img.pixels);
    return h.hex_digest();
}

// Manifest format, one key=value per line:
//   format=patchmosaic-frames/1
//   seed, frame_count, n, k, histogram_match
//   config.<key>=<value>     (zero or more)
//   config_hash=<sha256 of every preceding line, each with its '\n'>
//   frame=<index> <file> <image_digest>   (frame_count lines)

namespace {

std::string manifest_head(const FrameManifest& m) {
    std::ostringstream out;
    out << "format=patchmosaic-frames/1\n";
    out << "seed=" << m.seed << "\n";
    out << "frame_count=" << m.frame_count << "\n";
    out << "n=" << m.n << "\n";
    out << "k=" << m.k << "\n";
    out << "histogram_match=" << (m.histogram_match ? "true" : "false") << "\n";
    for (const auto& [key, value] : m.config) out << "config." << key << "=" << value << "\n";
    return out.str();
}

}  // namespace

void write_frames(const FrameSequence& seq, const std::filesystem::path& directory,
                  const std::vector<std::pair<std::string, std::string>>& config) {
    if (seq.frames.empty()) throw ValidationError("no frames to write");
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) throw IoError("cannot create directory " + directory.string() + ": " + ec.message());

    FrameManifest m;
    m.seed = seq.seed;
    m.frame_count = seq.frames.size();
    m.n = seq.n;
    m.k = seq.k;
    m.histogram_match = seq.histogram_match;
    m.config = config;
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
        m.files.push_back(frame_file_name(f));
        m.digests.push_back(image_digest(seq.frames[f]));
        save_image(seq.frames[f], directory / m.files.back(), ImageFormat::png);
    }
    const std::string head = manifest_head(m);
    std::ofstream out(directory / kFrameManifestName, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest in " + directory.string());
    out << head << "config_hash=" << sha256_hex(head) << "\n";
    for (std::size_t f = 0; f < m.files.size(); ++f) {
        out << "frame=" << f << ' ' << m.files[f] << ' ' << m.digests[f] << "\n";
    }
    if (!out) throw IoError("write failed: " + (directory / kFrameManifestName).string());
}

FrameManifest read_frame_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open frame manifest: " + path.string());
    FrameManifest m;
    std::string line;
    bool have_format = false;
    try {
        while (std::getline(in, line)) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw DataError("malformed manifest line: " + line);
            const std::string key = line.substr(0, eq);
            const std::string value = line.substr(eq + 1);
            if (key == "format") {
                if (value != "patchmosaic-frames/1") throw DataError("unknown manifest format");
                have_format = true;
            } else if (key == "seed") {
                m.seed = std::stoull(value);
            } else if (key == "frame_count") {
                m.frame_count = std::stoull(value);
            } else if (key == "n") {
                m.n = std::stoull(value);
            } else if (key == "k") {
                m.k = std::stoull(value);
            } else if (key == "histogram_match") {
                m.histogram_match = value == "true";
            } else if (key.rfind("config.", 0) == 0) {
                m.config.emplace_back(key.substr(7), value);
            } else if (key == "config_hash") {
                m.config_hash = value;
            } else if (key == "frame") {
                std::istringstream ss(value);
                std::size_t index = 0;
                std::string file;
                std::string digest;
                if (!(ss >> index >> file >> digest) || index != m.files.size()) {
                    throw DataError("malformed frame entry: " + line);
                }
                m.files.push_back(file);
                m.digests.push_back(digest);
            } else {
                throw DataError("unknown manifest key: " + key);
            }
        }
    } catch (const std::logic_error&) {
        throw DataError("malformed manifest value: " + line);
    }
    if (!have_format) throw DataError("manifest lacks a format line");
    if (m.files.size() != m.frame_count) throw DataError("manifest frame count mismatch");
    if (m.config_hash != sha256_hex(manifest_head(m))) {
        throw DataError("manifest config_hash does not match its contents");
    }
    return m;
}

}  // namespace patchmosaic
