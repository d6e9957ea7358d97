#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace patchmosaic {

/// Exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_usage = 2, exit_data = 3, exit_io = 4 };

/// Fully resolved parameters of one run. Sources, lowest precedence first:
/// built-in defaults, PATCHMOSAIC_WORKERS, --config file, command-line flags.
struct RunConfig {
    std::size_t n = 32;
    std::size_t stride = 0;  // 0: n, or n / 2 with overlap
    bool overlap = false;
    std::size_t side = 0;    // 0: largest power of two that fits
    std::size_t k = 64;
    double epsilon = 1e-4;
    std::size_t max_iter = 300;
    std::size_t restarts = 3;
    std::string init = "random";
    std::optional<std::uint64_t> seed;
    std::size_t frames = 10;
    bool histogram_match = true;
    std::string mode;
    std::size_t components = 64;
    std::size_t columns = 8;
    std::size_t workers = 1;
    std::filesystem::path manifest;
    std::filesystem::path library;
    std::filesystem::path model;
    std::filesystem::path target;
    std::filesystem::path output;
    std::filesystem::path grid;
    std::filesystem::path dump;

    std::size_t effective_stride() const;

    /// Applies key=value pairs; unknown keys or bad values throw ValidationError.
    void apply(const std::map<std::string, std::string>& values);

    /// key=value pairs for replay. Worker count is left out, since it never
    /// changes results.
    std::vector<std::pair<std::string, std::string>> to_pairs() const;
};

/// Parses "key = value" lines; '#' starts a comment line.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Writes to_pairs() in the read_config_file format.
void write_run_file(const RunConfig& config, const std::filesystem::path& path);

/// Entry point of the `patchmosaic` tool. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace patchmosaic
