#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rstrace/asymptotics.hpp"
#include "rstrace/montecarlo.hpp"

#include "config.hpp"

namespace rstrace::cli {

struct CommandResult {
    std::vector<std::filesystem::path> files;
    nlohmann::json summary;
    bool ok = true;  // false when a verify check failed
};

/// Runs one subcommand and writes its artifacts into params.out (created if missing).
/// The caller resolves the cache directory beforehand.
CommandResult run_command(const RunParams& params);

PathConfig path_config(const RunParams& params);

/// Curve CSV written by trace-mc / trace-spectral: t, Z, stderr, source.
TraceCurve read_curve_csv(const std::filesystem::path& file);
nlohmann::json prediction_to_json(const ExpansionPrediction& pred, const std::string& domain, double mass, double c2);
ExpansionPrediction prediction_from_json(const nlohmann::json& j);

struct VerifyCheck {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct VerifySettings {
    bool quick = false;
    std::uint64_t seed = 1;
    unsigned threads = 0;
};

/// Probabilistic identities and invariants; each entry is one named check.
/// `progress` (if set) is called after every check.
std::vector<VerifyCheck> verify_suite(const VerifySettings& settings,
                                      const std::function<void(const VerifyCheck&)>& progress = {});

} // namespace rstrace::cli
