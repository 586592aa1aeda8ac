#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "config.hpp"

namespace rstrace::cli {

inline constexpr int kCsvSchema = 1;
inline constexpr const char* kVersion = "rstrace 0.1.0";

std::string sha256_hex(std::string_view data);
std::string file_sha256(const std::filesystem::path& file);

/// Writes to a sibling temporary file and renames it over `file`.
void write_atomic(const std::filesystem::path& file, std::string_view content);

/// Digest of the canonical parameter set and the code version.
std::string params_digest(const KeyMap& canonical);

/// CSV with a comment line carrying schema and parameter digest, then a header
/// row whose names carry units, e.g. "r[L]".
class CsvWriter {
public:
    CsvWriter(std::vector<std::string> columns, std::string digest);
    void row(const std::vector<double>& values);
    void row(const std::vector<std::string>& values);
    std::string str() const;

private:
    std::vector<std::string> columns_;
    std::string digest_;
    std::vector<std::string> rows_;
};

std::string format_real(double v);
std::string utc_now();

/// Appends one JSON line to out/manifest.jsonl (rewritten atomically).
void append_manifest(const std::filesystem::path& out_dir, const nlohmann::json& record);

/// Cache directory stamp; a different schema or table version is refused.
void check_cache_stamp(const std::filesystem::path& cache_dir);

} // namespace rstrace::cli
