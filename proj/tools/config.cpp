#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rstrace/errors.hpp"

namespace rstrace::cli {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool contains(const std::vector<std::string>& v, const std::string& s) { return std::find(v.begin(), v.end(), s) != v.end(); }

void check_section(const std::string& s) {
    if (s != "run" && !contains(subcommands(), s)) throw ConfigError("unknown config section [" + s + "]");
}

void check_key(const std::string& k) {
    if (!contains(known_keys(), k)) throw ConfigError("unknown config key '" + k + "'");
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

bool parse_flag(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ValidationError(key + ": expected a boolean, got '" + v + "'");
}

const char* kC2Grid = "0.02,0.05,0.1,0.2,0.3,0.45,0.65,0.9,1.25,1.75,2.5,3.5,5,7";

} // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> v{"density", "levy", "fh", "c2", "trace-mc", "trace-spectral", "weyl", "fit", "verify"};
    return v;
}

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> v{"alpha", "mass",  "dim",      "domain",    "t-grid", "r-grid", "t",
                                            "paths", "step",  "refine",   "seed",      "antithetic", "threads",
                                            "grid-h", "eigs", "tolerance", "cache-dir", "out",    "curve",  "prediction",
                                            "c2",    "fixed", "quick"};
    return v;
}

Config Config::parse(std::string_view text) {
    Config c;
    std::string section = "run";
    std::istringstream is{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            check_section(section);
            c.sections_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        try {
            c.set(section, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return c;
}

Config Config::load(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) throw ConfigError("cannot read config file " + file.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
}

std::string Config::serialize() const {
    std::string out;
    for (const auto& [name, keys] : sections_) {
        out += "[" + name + "]\n";
        for (const auto& [k, v] : keys) out += k + " = " + v + "\n";
        out += "\n";
    }
    return out;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    check_section(section);
    check_key(key);
    if (value.find('#') != std::string::npos || value.find('\n') != std::string::npos)
        throw ConfigError("value of '" + key + "' may not contain '#' or a newline");
    sections_[section][key] = value;
}

std::optional<std::string> Config::get(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return std::nullopt;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second;
}

KeyMap Config::effective(const std::string& subcommand) const {
    KeyMap out;
    if (auto s = sections_.find("run"); s != sections_.end()) out = s->second;
    if (auto s = sections_.find(subcommand); s != sections_.end())
        for (const auto& [k, v] : s->second) out[k] = v;
    return out;
}

double parse_real(const std::string& key, const std::string& text) {
    double v = 0.0;
    const std::string s = trim(text);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw ValidationError(key + ": expected a number, got '" + text + "'");
    return v;
}

std::uint64_t parse_count(const std::string& key, const std::string& text) {
    const double v = parse_real(key, text);
    if (v < 0.0 || v != std::floor(v) || v > 9e15) throw ValidationError(key + ": expected a nonnegative integer, got '" + text + "'");
    return static_cast<std::uint64_t>(v);
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(trim(p));
        if (parts.size() != 3 && !(parts.size() == 4 && parts[3] == "log"))
            throw ValidationError("grid '" + text + "': expected lo:hi:n or lo:hi:n:log");
        const double lo = parse_real("grid", parts[0]), hi = parse_real("grid", parts[1]);
        const auto n = parse_count("grid", parts[2]);
        if (n < 2 || !(hi > lo)) throw ValidationError("grid '" + text + "': need n >= 2 and hi > lo");
        const bool geometric = parts.size() == 4;
        if (geometric && !(lo > 0.0)) throw ValidationError("grid '" + text + "': a log grid needs lo > 0");
        for (std::uint64_t i = 0; i < n; ++i) {
            const double f = static_cast<double>(i) / static_cast<double>(n - 1);
            out.push_back(geometric ? lo * std::pow(hi / lo, f) : lo + (hi - lo) * f);
        }
        return out;
    }
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(parse_real("grid", p));
    if (out.empty()) throw ValidationError("empty grid");
    return out;
}

RunParams resolve(const std::string& subcommand, const KeyMap& keys) {
    if (!contains(subcommands(), subcommand)) throw ValidationError("unknown subcommand '" + subcommand + "'");
    for (const auto& [k, v] : keys) check_key(k);
    RunParams p;
    p.subcommand = subcommand;
    auto has = [&](const char* k) { return keys.count(k) > 0; };
    auto val = [&](const char* k) { return keys.at(k); };

    if (subcommand == "density") {
        p.t_grid = {0.1, 0.5, 1.0};
        p.r_grid = parse_grid("0.001:10:41:log");
    } else if (subcommand == "levy") {
        p.r_grid = parse_grid("0.001:10:41:log");
    } else if (subcommand == "fh" || subcommand == "c2") {
        p.r_grid = parse_grid(kC2Grid);
    } else if (subcommand == "trace-mc") {
        p.t_grid = {0.1, 0.15, 0.2};
        p.paths = 20000;
    } else if (subcommand == "trace-spectral") {
        p.t_grid = parse_grid("0.1:0.3:9");
    }

    if (has("alpha")) p.alpha = parse_real("alpha", val("alpha"));
    if (has("mass")) p.mass = parse_real("mass", val("mass"));
    if (has("dim")) p.dim = static_cast<int>(parse_count("dim", val("dim")));
    if (has("domain")) p.domain = val("domain");
    if (has("t-grid")) p.t_grid = parse_grid(val("t-grid"));
    if (has("r-grid")) p.r_grid = parse_grid(val("r-grid"));
    if (has("t")) p.t = parse_real("t", val("t"));
    if (has("paths")) p.paths = parse_count("paths", val("paths"));
    if (has("step")) p.step = parse_real("step", val("step"));
    if (has("refine")) p.refine = parse_real("refine", val("refine"));
    if (has("seed")) p.seed = parse_count("seed", val("seed"));
    if (has("antithetic")) p.antithetic = parse_flag("antithetic", val("antithetic"));
    if (has("threads")) p.threads = static_cast<unsigned>(parse_count("threads", val("threads")));
    if (has("grid-h")) p.grid_h = parse_real("grid-h", val("grid-h"));
    if (has("eigs")) p.eigs = parse_count("eigs", val("eigs"));
    if (has("tolerance")) p.tolerance = parse_real("tolerance", val("tolerance"));
    if (has("cache-dir")) p.cache_dir = val("cache-dir");
    if (has("out")) p.out = val("out");
    if (has("curve")) p.curve = val("curve");
    if (has("prediction")) p.prediction = val("prediction");
    if (has("c2")) p.c2 = parse_real("c2", val("c2"));
    if (has("fixed")) p.fixed = val("fixed");
    if (has("quick")) p.quick = parse_flag("quick", val("quick"));

    if (!(p.alpha > 0.0 && p.alpha < 2.0)) throw ValidationError("alpha must lie in (0, 2)");
    if (!(p.mass >= 0.0)) throw ValidationError("mass must be nonnegative");
    if (p.dim < 1 || p.dim > 3) throw ValidationError("dim must be 1, 2 or 3");
    if (!(p.t > 0.0)) throw ValidationError("t must be positive");
    if (!(p.step > 0.0)) throw ValidationError("step must be positive");
    if (!(p.refine > 0.0 && p.refine <= 1.0)) throw ValidationError("refine must lie in (0, 1]");
    if (p.paths < 1) throw ValidationError("paths must be at least 1");
    if (!(p.grid_h > 0.0)) throw ValidationError("grid-h must be positive");
    if (!(p.tolerance > 0.0 && p.tolerance < 1.0)) throw ValidationError("tolerance must lie in (0, 1)");
    for (double t : p.t_grid)
        if (!(t > 0.0)) throw ValidationError("t-grid entries must be positive");
    for (double r : p.r_grid)
        if (!(r > 0.0)) throw ValidationError("r-grid entries must be positive");
    for (const auto* g : {&p.t_grid, &p.r_grid})
        for (std::size_t i = 1; i < g->size(); ++i)
            if (!((*g)[i] > (*g)[i - 1])) throw ValidationError("grids must be strictly increasing");

    // Everything that can change an output file; out, cache-dir and threads cannot.
    KeyMap& c = p.canonical;
    c["subcommand"] = subcommand;
    c["alpha"] = fmt(p.alpha);
    c["mass"] = fmt(p.mass);
    c["dim"] = std::to_string(p.dim);
    c["domain"] = p.domain;
    c["t-grid"] = join(p.t_grid);
    c["r-grid"] = join(p.r_grid);
    c["t"] = fmt(p.t);
    c["paths"] = std::to_string(p.paths);
    c["step"] = fmt(p.step);
    c["refine"] = fmt(p.refine);
    c["seed"] = std::to_string(p.seed);
    c["antithetic"] = p.antithetic ? "true" : "false";
    c["grid-h"] = fmt(p.grid_h);
    c["eigs"] = std::to_string(p.eigs);
    c["tolerance"] = fmt(p.tolerance);
    c["curve"] = p.curve;
    c["prediction"] = p.prediction;
    c["c2"] = fmt(p.c2);
    c["fixed"] = p.fixed;
    c["quick"] = p.quick ? "true" : "false";
    return p;
}

} // namespace rstrace::cli
