#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rstrace/geometry.hpp"
#include "rstrace/process.hpp"

namespace rstrace {

/// Lattice points strictly inside a bounded planar domain. Disks use the lattice
/// centred on the disk centre, other kinds a cell-centred lattice in the bounding box.
struct GridDiscretization {
    double h = 0.0;
    Point origin = Point::Zero();
    std::vector<Point> points;
    std::vector<Eigen::Vector2i> index;  // points[i] = origin + h * index[i]

    std::size_t size() const { return points.size(); }
};

GridDiscretization make_grid(const Domain& domain, double h, std::size_t min_points = 100);

/// Coefficient c of the five-point stencil c h^{-alpha} (4 u_i - sum of neighbours) that
/// matches the small-xi curvature of the lattice symbol to the continuum symbol.
double stencil_correction(const ProcessParams& p, double h);

struct AssemblyOptions {
    bool stencil = true;
    unsigned threads = 0;  // 0: hardware concurrency
};

struct KilledGenerator {
    GridDiscretization grid;
    Eigen::VectorXd kappa;
    double stencil = 0.0;  // physical coefficient c h^{-alpha}
    Eigen::MatrixXd matrix;
};

/// Negative killed generator on the grid: A_ij = -h^2 J^m(|x_i - x_j|), A_ii = row sum + kappa + stencil.
KilledGenerator assemble_killed_generator(const ProcessParams& p, const Domain& domain, double h,
                                          const AssemblyOptions& opt = {});

struct Spectrum {
    Eigen::VectorXd eigenvalues;  // ascending
    Eigen::VectorXd residuals;    // ||A v - lambda v|| / ||A||
    double h = 0.0;
    std::size_t dimension = 0;    // size of the matrix the values came from
    bool complete() const { return static_cast<std::size_t>(eigenvalues.size()) == dimension; }
};

struct EigenOptions {
    std::size_t dense_limit = 4000;  // dense solver up to this size
    double dense_fraction = 0.1;     // ... or whenever k exceeds this fraction of N
    double tol = 1e-10;
    std::uint64_t seed = 0x5eed;
};

Spectrum eigen_spectrum(const Eigen::MatrixXd& a, std::size_t k, double h = 0.0, const EigenOptions& opt = {});
Spectrum dense_spectrum(const Eigen::MatrixXd& a, std::size_t k, double h = 0.0);
Spectrum lanczos_spectrum(const Eigen::MatrixXd& a, std::size_t k, double h = 0.0, const EigenOptions& opt = {});

struct TraceValue {
    double value = 0.0;
    double tail_bound = 0.0;  // Weyl-envelope estimate of the omitted eigenvalues
};

/// sum_{n <= k} e^{-lambda_n t}; throws TailTooHeavyError if the tail bound exceeds max_tail of the sum.
TraceValue trace_from_spectrum(const Spectrum& s, double t, const ProcessParams& p, double max_tail = 0.005);

/// p_h(t, 0) of the lattice operator on the infinite grid (same kernel, same stencil).
double lattice_free_density(const ProcessParams& p, double h, double t, bool stencil = true, int half_width = 512);

/// Trace with the interior lattice bias removed: Z_h - N h^2 (p_h(t,0) - p(t,0)).
double bias_corrected_trace(const Spectrum& s, const KilledGenerator& g, const ProcessParams& p, double t);

std::size_t weyl_counting(const Spectrum& s, double lambda);

/// Largest n such that the first n eigenvalues of two grids agree to tol (relative).
std::size_t trust_ceiling(const Spectrum& coarse, const Spectrum& fine, double tol = 0.03);

} // namespace rstrace
