#include "artifacts.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rstrace/density.hpp"
#include "rstrace/errors.hpp"

namespace rstrace::cli {

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string file_sha256(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw ValidationError("cannot read " + file.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return sha256_hex(ss.str());
}

void write_atomic(const std::filesystem::path& file, std::string_view content) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    const auto tmp = file.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw ValidationError("cannot write " + tmp);
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os) throw ValidationError("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, file);
}

std::string params_digest(const KeyMap& canonical) {
    std::string s = std::string(kVersion) + "\nschema=" + std::to_string(kCsvSchema) + "\n";
    for (const auto& [k, v] : canonical) s += k + "=" + v + "\n";
    return sha256_hex(s);
}

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> columns, std::string digest)
    : columns_(std::move(columns)), digest_(std::move(digest)) {}

void CsvWriter::row(const std::vector<double>& values) {
    std::vector<std::string> s;
    for (double v : values) s.push_back(format_real(v));
    row(s);
}

void CsvWriter::row(const std::vector<std::string>& values) {
    if (values.size() != columns_.size()) throw std::logic_error("CSV row width does not match the header");
    std::string line;
    for (std::size_t i = 0; i < values.size(); ++i) line += (i ? "," : "") + values[i];
    rows_.push_back(std::move(line));
}

std::string CsvWriter::str() const {
    std::string out = "# schema=" + std::to_string(kCsvSchema) + " params=" + digest_ + "\n";
    for (std::size_t i = 0; i < columns_.size(); ++i) out += (i ? "," : "") + columns_[i];
    out += "\n";
    for (const auto& r : rows_) out += r + "\n";
    return out;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void append_manifest(const std::filesystem::path& out_dir, const nlohmann::json& record) {
    const auto file = out_dir / "manifest.jsonl";
    std::string content;
    if (std::filesystem::exists(file)) {
        std::ifstream is(file, std::ios::binary);
        std::stringstream ss;
        ss << is.rdbuf();
        content = ss.str();
        if (!content.empty() && content.back() != '\n') content += '\n';
    }
    content += record.dump() + "\n";
    write_atomic(file, content);
}

void check_cache_stamp(const std::filesystem::path& cache_dir) {
    std::filesystem::create_directories(cache_dir);
    const auto stamp = cache_dir / "VERSION";
    const std::string want = "schema=" + std::to_string(kCsvSchema) + " density=" + std::to_string(RadialDensityTable::kVersion) + "\n";
    if (std::filesystem::exists(stamp)) {
        std::ifstream is(stamp);
        std::stringstream ss;
        ss << is.rdbuf();
        if (ss.str() != want)
            throw CacheVersionError("cache " + cache_dir.string() + " was written by another version (" + ss.str().substr(0, 40) +
                                    "); clear it or choose another --cache-dir");
        return;
    }
    write_atomic(stamp, want);
}

} // namespace rstrace::cli
