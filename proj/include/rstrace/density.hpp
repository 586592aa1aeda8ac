#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rstrace/process.hpp"

namespace rstrace {

struct DensityOptions {
    double abs_tol = 1e-9;  ///< absolute target for p^m(t, r), r > 0
    double zero_tol = 1e-10; ///< absolute target for p^m(t, 0)
    int max_intervals = 20000;
};

/// p^m(t, x) at |x| = r. Large r/t^{1/alpha} goes through the subordination
/// series, the rest through zero-split oscillatory quadrature.
double free_density(const ProcessParams& p, double t, double r, const DensityOptions& opt = {});

/// p^m(t, 0) by non-oscillatory radial quadrature.
double density_at_zero(const ProcessParams& p, double t, const DensityOptions& opt = {});

/// The two evaluation routes, exposed for cross-checking. Both work on the
/// scaled profile q(mu, rho) = p^mu(1, rho); p^m(t, r) = t^{-d/a} q(mt, r t^{-1/a}).
namespace density_routes {
/// Returns nullopt when the series cannot reach `rel_tol`.
std::optional<double> far_field(double alpha, double mu, int dim, double rho, double rel_tol = 1e-12);
double oscillatory(double alpha, double mu, int dim, double rho, double abs_tol, int max_intervals = 20000);
double at_zero(double alpha, double mu, int dim, double abs_tol);
} // namespace density_routes

struct ExpansionTerms {
    int k = 0;
    std::vector<double> partial_sums; ///< prediction truncated after n = 1..k
    double prediction = 0.0;
    double numeric_difference = 0.0;
    double residual = 0.0;
};

/// p^m(t,0) - p^0(t,0) against C t^{-d/a} sum_{n<=k} (mt)^n / n!.
ExpansionTerms density_diff_expansion(const ProcessParams& p, double t, const DensityOptions& opt = {});

/// sup over t in [L, M] of p^m(t,0) - p^0(t,0), one entry per mass.
std::vector<double> uniform_convergence_gap(const ProcessParams& base, const std::vector<double>& masses,
                                            double t_lo, double t_hi, const DensityOptions& opt = {});

/// Radial profile of p^m(t, .) on geometric radii plus r = 0.
class RadialDensityTable {
public:
    static constexpr std::uint32_t kVersion = 3;
    static constexpr int kPerDecade = 64;

    static RadialDensityTable build(const ProcessParams& p, double t, const DensityOptions& opt = {});
    /// Reads from `cache_dir` when a matching file exists, otherwise builds and writes it.
    static RadialDensityTable cached(const ProcessParams& p, double t, const DensityOptions& opt,
                                     const std::filesystem::path& cache_dir);

    double operator()(double r) const;

    const ProcessParams& params() const { return params_; }
    double time() const { return time_; }
    double tolerance() const { return tolerance_; }
    const std::vector<double>& radii() const { return radii_; }
    const std::vector<double>& values() const { return values_; }
    double tail_exponent() const { return tail_exponent_; }

    void save(const std::filesystem::path& file) const;
    static RadialDensityTable load(const std::filesystem::path& file);
    static std::string cache_name(const ProcessParams& p, double t, double tol);

private:
    RadialDensityTable(ProcessParams p, double t, double tol) : params_(p), time_(t), tolerance_(tol) {}
    void finalize();

    ProcessParams params_;
    double time_;
    double tolerance_;
    std::vector<double> radii_;  // radii_[0] = 0, then geometric
    std::vector<double> values_;
    std::vector<double> log_values_;
    double tail_exponent_ = 0.0;
    double log_r1_ = 0.0;
    double inv_log_step_ = 0.0;
};

/// p^m(s, r) for all 0 < s <= t_max. Stores the scaled profiles
/// q(mu, .) at mu = m s_k, s_k geometric with 64 times per decade, plus the
/// mu = 0 profile; interpolates log q linearly in log mu (linearly in mu
/// below the first bucket).
class DensityTableSet {
public:
    DensityTableSet(const ProcessParams& p, double t_max, const DensityOptions& opt = {},
                    std::optional<std::filesystem::path> cache_dir = std::nullopt);

    double operator()(double s, double r) const;
    const ProcessParams& params() const { return params_; }
    double t_max() const { return t_max_; }
    std::size_t bucket_count() const { return tables_.size(); }

private:
    double scaled(double mu, double rho) const;

    ProcessParams params_;
    double t_max_;
    std::vector<RadialDensityTable> tables_; // tables_[0] is mu = 0
    std::vector<double> mus_;
    double mu_first_ = 0.0;
    double inv_log_step_ = 0.0;
};

} // namespace rstrace
