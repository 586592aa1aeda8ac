#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rstrace::cli {

using KeyMap = std::map<std::string, std::string>;

const std::vector<std::string>& subcommands();
const std::vector<std::string>& known_keys();

/// Flat `key = value` text with `[section]` headers. Keys before the first header,
/// and keys under `[run]`, apply to every subcommand; `[<subcommand>]` overrides them.
/// `#` starts a comment. Values are kept verbatim after trimming.
class Config {
public:
    static Config parse(std::string_view text);
    static Config load(const std::filesystem::path& file);

    /// Sections and keys in sorted order, one `key = value` per line.
    std::string serialize() const;

    void set(const std::string& section, const std::string& key, const std::string& value);
    std::optional<std::string> get(const std::string& section, const std::string& key) const;
    const std::map<std::string, KeyMap>& sections() const { return sections_; }

    /// [run] merged with [subcommand].
    KeyMap effective(const std::string& subcommand) const;

    friend bool operator==(const Config&, const Config&) = default;

private:
    std::map<std::string, KeyMap> sections_;
};

/// Typed parameters of one run after defaults and range checks.
struct RunParams {
    std::string subcommand;
    double alpha = 1.0;
    double mass = 0.0;
    int dim = 2;
    std::string domain = "disk:1";
    std::vector<double> t_grid;
    std::vector<double> r_grid;
    double t = 1.0;
    std::uint64_t paths = 100000;
    double step = 0.01;
    double refine = 0.25;
    std::uint64_t seed = 1;
    bool antithetic = false;
    unsigned threads = 0;
    double grid_h = 0.05;
    std::size_t eigs = 0;  // 0: full spectrum
    double tolerance = 1e-10;
    std::string cache_dir;
    std::string out = "out";
    std::string curve;
    std::string prediction;
    double c2 = 0.0;
    std::string fixed;
    bool quick = false;

    KeyMap canonical;  // effective keys that determine the outputs
};

RunParams resolve(const std::string& subcommand, const KeyMap& keys);

/// "a,b,c" or "lo:hi:n" (n equally spaced points) or "lo:hi:n:log" (geometric).
std::vector<double> parse_grid(const std::string& text);
double parse_real(const std::string& key, const std::string& text);
std::uint64_t parse_count(const std::string& key, const std::string& text);

} // namespace rstrace::cli
