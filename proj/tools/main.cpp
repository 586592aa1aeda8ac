// rstrace command-line runner: one subcommand per process, artifacts and a manifest
// record written to the output directory.

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "rstrace/errors.hpp"

#include "artifacts.hpp"
#include "commands.hpp"
#include "config.hpp"

using namespace rstrace;
using namespace rstrace::cli;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Flag {
    const char* key;
    const char* help;
    std::optional<std::string> value;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Killed relativistic stable processes: densities, remainders, heat traces"};
    app.require_subcommand(1, 1);
    std::string config_file;
    app.add_option("--config", config_file, "config file ([run] and per-subcommand sections)");

    std::vector<Flag> flags{
        {"alpha", "stability index in (0, 2)", {}},
        {"mass", "mass m >= 0", {}},
        {"dim", "dimension", {}},
        {"domain", "disk:R[,cx,cy] | rectangle:a,b | polygon:x,y;... | halfspace | plane", {}},
        {"t-grid", "times: a,b,c | lo:hi:n | lo:hi:n:log", {}},
        {"r-grid", "radii, same grammar as --t-grid", {}},
        {"t", "time for fh", {}},
        {"paths", "Monte Carlo paths (1e6 notation accepted)", {}},
        {"step", "base time step", {}},
        {"refine", "step factor near the boundary", {}},
        {"seed", "master seed", {}},
        {"antithetic", "antithetic Gaussian pairs (true/false)", {}},
        {"threads", "worker threads, 0 = all cores", {}},
        {"grid-h", "lattice spacing for spectral runs", {}},
        {"eigs", "eigenvalues to compute, 0 = all", {}},
        {"tolerance", "quadrature / eigensolver tolerance", {}},
        {"cache-dir", "density table cache (overrides RSTRACE_CACHE_DIR)", {}},
        {"out", "output directory", {}},
        {"curve", "curve CSV for fit", {}},
        {"prediction", "prediction JSON for fit", {}},
        {"c2", "surface constant for fit without --prediction", {}},
        {"fixed", "comma-separated term labels held at their predictions", {}},
    };
    for (auto& f : flags) app.add_option(std::string("--") + f.key, f.value, f.help);
    bool quick = false;
    app.add_flag("--quick", quick, "reduced path counts for verify");

    for (const auto& s : subcommands()) app.add_subcommand(s)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitValidation;
    }
    const std::string sub = app.get_subcommands().front()->get_name();

    RunParams params;
    std::string out_dir = "out";
    try {
        KeyMap keys;
        if (!config_file.empty()) keys = Config::load(config_file).effective(sub);
        for (const auto& f : flags)
            if (f.value) keys[f.key] = *f.value;
        if (quick) keys["quick"] = "true";
        // cache directory: flag, then environment, then config, then <out>/cache
        const bool cache_flag = std::any_of(flags.begin(), flags.end(),
                                            [](const Flag& f) { return std::string(f.key) == "cache-dir" && f.value; });
        if (!cache_flag)
            if (const char* env = std::getenv("RSTRACE_CACHE_DIR"); env && *env) keys["cache-dir"] = env;
        params = resolve(sub, keys);
        out_dir = params.out;
        if (params.cache_dir.empty()) params.cache_dir = (std::filesystem::path(params.out) / "cache").string();
        check_cache_stamp(params.cache_dir);
    } catch (const ValidationError& e) {
        std::cerr << "rstrace: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "rstrace: " << e.what() << "\n";
        return kExitValidation;
    }

    nlohmann::json record{{"subcommand", sub}, {"params", params.canonical}, {"params_digest", params_digest(params.canonical)},
                          {"version", kVersion}, {"started", utc_now()}};
    int rc = kExitOk;
    CommandResult res;
    try {
        res = run_command(params);
        record["status"] = res.ok ? "ok" : "check-failed";
        if (!res.ok) rc = kExitNumerical;
    } catch (const ValidationError& e) {
        std::cerr << "rstrace: " << e.what() << "\n";
        record["status"] = "validation-error";
        record["error"] = e.what();
        rc = kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "rstrace: " << e.what() << "\n";
        record["status"] = "numerical-error";
        record["error"] = e.what();
        rc = kExitNumerical;
    }
    record["finished"] = utc_now();
    nlohmann::json digests = nlohmann::json::object();
    for (const auto& f : res.files) digests[f.filename().string()] = file_sha256(f);
    record["outputs"] = digests;
    record["summary"] = res.summary;
    try {
        append_manifest(out_dir, record);
    } catch (const std::exception& e) {
        std::cerr << "rstrace: manifest not written: " << e.what() << "\n";
        if (rc == kExitOk) rc = kExitValidation;
    }

    if (sub == "verify" && res.summary.contains("checks")) {
        for (const auto& c : res.summary["checks"])
            std::cout << (c["passed"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << ": "
                      << c["detail"].get<std::string>() << "\n";
        std::cout << (res.ok ? "all invariant suites passed" : "some invariant suites FAILED") << "\n";
    } else if (rc == kExitOk) {
        for (const auto& f : res.files) std::cout << f.string() << "\n";
    }
    return rc;
}
