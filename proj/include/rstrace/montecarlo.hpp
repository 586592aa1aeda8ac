#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rstrace/density.hpp"
#include "rstrace/geometry.hpp"
#include "rstrace/process.hpp"

namespace rstrace {

using Rng = std::mt19937_64;

/// Independent stream for path `index` of sub-experiment `stream` under a master seed.
Rng path_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

struct PathConfig {
    std::uint64_t n_paths = 100000;
    double base_step = 0.01;
    double boundary_refine = 0.25;  // step factor near the boundary; 1 disables refinement
    int refine_levels = 2;
    std::uint64_t seed = 1;
    bool antithetic = false;
    unsigned threads = 0;  // 0: hardware concurrency

    void validate() const;
    std::string step_rule() const;
};

struct ExitSample {
    double tau = 0.0;  // +inf when alive at the horizon
    Point exit_position = Point::Zero();
    bool alive = true;
};

struct EstimateWithError {
    double value = 0.0;
    double error = 0.0;  // one standard error
    std::uint64_t n_effective = 0;
    std::string bias_note;
};

/// Combined standard error of a - b for independent estimates.
double combined_error(const EstimateWithError& a, const EstimateWithError& b);

/// E exp(-lambda S) = exp(-t lambda^index), 0 < index < 1 (Kanter's representation).
double sample_positive_stable(double index, double t, Rng& rng);

/// E exp(-lambda T) = exp(-dt [(lambda + m^{2/alpha})^{alpha/2} - m]) by exponential tilting.
double sample_tempered_subordinator(const ProcessParams& p, double dt, Rng& rng);

/// Increment with characteristic function exp(-dt Phi(xi)); `sign` flips the Gaussian (antithetic).
Point sample_increment(const ProcessParams& p, double dt, Rng& rng, double sign = 1.0);

/// Exit from D observed on the step grid, censored at the horizon; tau is the midpoint
/// of the step in which the exit is detected.
ExitSample simulate_exit(const ProcessParams& p, const Domain& d, const Point& x, double horizon, const PathConfig& cfg,
                         Rng& rng, double sign = 1.0);

/// Running mean/variance over paths, reduced in a worker-count independent order.
struct PathStats {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::uint64_t n = 0;

    double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
    double variance() const;
    double standard_error() const;
};

/// Evaluates f(index) for index in [0, n) in parallel; blocks of fixed size are summed
/// sequentially and the block partials pairwise, so the result does not depend on threads.
PathStats accumulate_paths(std::uint64_t n, unsigned threads, const std::function<double(std::uint64_t)>& f);

/// r_D^m(t, x, x) = E_x[tau < t; p^m(t - tau, X_tau, x)].
EstimateWithError estimate_r_D(const ProcessParams& p, const Domain& d, double t, const Point& x, const PathConfig& cfg,
                               const DensityTableSet& tables, std::uint64_t stream = 0);
EstimateWithError estimate_r_D(const ProcessParams& p, const Domain& d, double t, const Point& x, const PathConfig& cfg);

/// f_H^m(t, r): the remainder for the half-space {x1 > 0} at distance r.
EstimateWithError estimate_f_H(const ProcessParams& p, double t, double r, const PathConfig& cfg,
                               const DensityTableSet& tables, std::uint64_t stream = 0);
EstimateWithError estimate_f_H(const ProcessParams& p, double t, double r, const PathConfig& cfg);

struct C2Result {
    EstimateWithError value;                       // step-extrapolated
    std::vector<EstimateWithError> per_step;       // one trapezoid total per step size
    std::vector<double> steps;
    std::vector<double> r_grid;
    std::vector<std::vector<EstimateWithError>> profiles;  // f_H(1, r) per step
    double sliver = 0.0;
    double sliver_bound = 0.0;
    double tail = 0.0;
    double tail_slope = 0.0;
};

/// int_0^inf f_H^0(1, r) dr: trapezoid on r_grid (with f_H(1, 0+) = p(1, 0)), power tail
/// from the last three points, Richardson extrapolation in step^{1/alpha} over cfg.base_step
/// and its halving.
C2Result compute_C2(double alpha, int dim, const PathConfig& cfg, const std::vector<double>& r_grid);

/// Shell edges of delta / t^{1/alpha} used for stratification.
std::vector<double> trace_strata();

/// int_D r_D^m(t, x, x) dx with x stratified by distance shells.
EstimateWithError estimate_trace_remainder(const ProcessParams& p, const Domain& d, double t, const PathConfig& cfg,
                                           const DensityTableSet& tables, std::uint64_t stream = 0);
EstimateWithError estimate_trace_remainder(const ProcessParams& p, const Domain& d, double t, const PathConfig& cfg);

/// Two sides of the Ikeda-Watanabe identity for exits of the disk centred at its
/// centre, landing in a concentric annulus target: left = P(t1 < tau < t2, X_tau in target),
/// right = int_{t1}^{t2} int_D p_D(s, x, y) K(y) dy ds with p_D = p - r_D.
struct IkedaWatanabeResult {
    EstimateWithError left;
    EstimateWithError right;
    double free_part = 0.0;  // deterministic int int p K
};

IkedaWatanabeResult ikeda_watanabe_check(const ProcessParams& p, const Domain& disk, double r_in, double r_out, double t1,
                                         double t2, const PathConfig& cfg);

/// P(t1 < tau <= t2, X_tau in target) for paths started at x.
EstimateWithError landing_probability(const ProcessParams& p, const Domain& d, const Point& x, double t1, double t2,
                                      const std::function<bool(const Point&)>& target, const PathConfig& cfg,
                                      std::uint64_t stream = 0);

/// Probability of leaving D before the horizon, observed directly.
EstimateWithError exit_probability(const ProcessParams& p, const Domain& d, const Point& x, double horizon,
                                   const PathConfig& cfg, std::uint64_t stream = 0);

} // namespace rstrace
