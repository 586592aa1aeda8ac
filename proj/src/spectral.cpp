#include "rstrace/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <thread>

#include <unsupported/Eigen/FFT>

#include "rstrace/density.hpp"
#include "rstrace/errors.hpp"
#include "rstrace/levy.hpp"
#include "rstrace/quadrature.hpp"

namespace rstrace {

namespace {

constexpr double kPi = std::numbers::pi;

void require_planar(const ProcessParams& p) {
    if (p.dim() != 2) throw ValidationError("the spectral pipeline is planar (d = 2)");
}

// Lattice-unit kernel A |j|^{-2-alpha} psi(M h |j|), memoised by n = |j|^2.
class LatticeKernel {
public:
    LatticeKernel(const ProcessParams& p, double h)
        : a_(levy_constant(2, p.alpha())), alpha_(p.alpha()), scale_(p.mass_scale() * h),
          prof_(PsiProfile::for_params(p)) {}

    double shape(double r) const { return scale_ == 0.0 ? 1.0 : psi(prof_, scale_ * r); }

    double operator()(long n) {
        if (n >= static_cast<long>(cache_.size())) cache_.resize(n + 1, -1.0);
        double& v = cache_[n];
        if (v < 0.0) {
            const double r = std::sqrt(static_cast<double>(n));
            v = a_ * std::pow(r, -2.0 - alpha_) * shape(r);
        }
        return v;
    }

private:
    double a_, alpha_, scale_;
    PsiProfile prof_;
    std::vector<double> cache_;
};

double upper_gamma(double a, double x) {
    if (x <= 0.0) return std::tgamma(a);
    auto f = [a](double s) { return std::exp((a - 1.0) * std::log(s) - s); };
    return integrate_to_infinity(f, x, std::max(1.0, x), {1e-300, 1e-10, 2000}).value;
}

template <class F>
void parallel_rows(std::size_t n, unsigned threads, F&& f) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, n / 64)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += threads) f(i);
        });
    for (auto& t : pool) t.join();
}

Eigen::VectorXd residual_norms(const Eigen::MatrixXd& a, const Eigen::MatrixXd& v, const Eigen::VectorXd& lambda) {
    const double scale = std::max(a.cwiseAbs().rowwise().sum().maxCoeff(), 1e-300);
    Eigen::VectorXd res(lambda.size());
    constexpr Eigen::Index block = 256;
    for (Eigen::Index c = 0; c < lambda.size(); c += block) {
        const Eigen::Index w = std::min(block, lambda.size() - c);
        const Eigen::MatrixXd av = a * v.middleCols(c, w);
        for (Eigen::Index j = 0; j < w; ++j) res(c + j) = (av.col(j) - lambda(c + j) * v.col(c + j)).norm() / scale;
    }
    return res;
}

} // namespace

GridDiscretization make_grid(const Domain& domain, double h, std::size_t min_points) {
    if (!domain.bounded()) throw GeometryError("grids need a bounded domain");
    if (!(h > 0.0)) throw DomainError("grid spacing must be positive");
    GridDiscretization g;
    g.h = h;
    const auto [lo, hi] = domain.bounding_box();
    if (domain.kind() == DomainKind::Disk) {
        g.origin = domain.center();
    } else {
        g.origin = lo + Point(0.5 * h, 0.5 * h);
    }
    const int i0 = static_cast<int>(std::floor((lo.x() - g.origin.x()) / h)) - 1;
    const int i1 = static_cast<int>(std::ceil((hi.x() - g.origin.x()) / h)) + 1;
    const int j0 = static_cast<int>(std::floor((lo.y() - g.origin.y()) / h)) - 1;
    const int j1 = static_cast<int>(std::ceil((hi.y() - g.origin.y()) / h)) + 1;
    for (int i = i0; i <= i1; ++i)
        for (int j = j0; j <= j1; ++j) {
            const Point x = g.origin + h * Point(i, j);
            if (domain.contains(x) && domain.distance_to_complement(x) > 0.0) {
                g.points.push_back(x);
                g.index.emplace_back(i, j);
            }
        }
    if (g.points.size() < min_points)
        throw GeometryError("grid too coarse: " + std::to_string(g.points.size()) + " interior points at h = " + std::to_string(h));
    return g;
}

double stencil_correction(const ProcessParams& p, double h) {
    require_planar(p);
    const double a = p.alpha();
    const double rc = 50.0;
    const int k = static_cast<int>(6 * rc);
    LatticeKernel w(p, h);
    // Lattice second moment of the Gaussian-damped kernel, one octant times symmetry.
    double lattice = 0.0;
    for (int i = 0; i <= k; ++i)
        for (int j = 0; j <= i; ++j) {
            if (i == 0) continue;
            const long n = static_cast<long>(i) * i + static_cast<long>(j) * j;
            const double mult = (j == 0 || j == i) ? 4.0 : 8.0;
            lattice += mult * w(n) * n * std::exp(-n / (rc * rc));
        }
    // Continuum counterpart, 2 pi A int r^{1-alpha} psi(Mhr) e^{-(r/rc)^2} dr with r = u^{1/(2-alpha)}.
    double continuum;
    const double big_a = levy_constant(2, a);
    if (p.mass() == 0.0) {
        continuum = big_a * kPi * std::pow(rc, 2.0 - a) * std::tgamma(1.0 - 0.5 * a);
    } else {
        const double e = 1.0 / (2.0 - a);
        auto f = [&](double u) {
            const double r = std::pow(u, e);
            return w.shape(r) * std::exp(-(r / rc) * (r / rc));
        };
        const double scale = std::pow(rc, 2.0 - a);
        continuum = 2 * kPi * big_a * e * integrate_to_infinity(f, 0.0, scale, {1e-300, 1e-12, 4000}).value;
    }
    return (continuum - lattice) / 4.0;
}

KilledGenerator assemble_killed_generator(const ProcessParams& p, const Domain& domain, double h, const AssemblyOptions& opt) {
    require_planar(p);
    KilledGenerator g;
    g.grid = make_grid(domain, h);
    const std::size_t n = g.grid.size();
    const double a = p.alpha();
    const double unit = std::pow(h, -a);  // h^2 J(h r) = h^{-alpha} (lattice kernel)

    // Kernel values for every squared lattice offset that occurs.
    long max_n = 0;
    Eigen::Vector2i lo = g.grid.index[0], hi = g.grid.index[0];
    for (const auto& ij : g.grid.index) {
        lo = lo.cwiseMin(ij);
        hi = hi.cwiseMax(ij);
    }
    const Eigen::Vector2i span = hi - lo;
    max_n = static_cast<long>(span.x()) * span.x() + static_cast<long>(span.y()) * span.y();
    std::vector<double> table(max_n + 1, 0.0);
    {
        LatticeKernel w(p, h);
        std::vector<char> used(max_n + 1, 0);
        for (int i = 0; i <= span.x(); ++i)
            for (int j = 0; j <= span.y(); ++j) used[static_cast<long>(i) * i + static_cast<long>(j) * j] = 1;
        for (long m = 1; m <= max_n; ++m)
            if (used[m]) table[m] = unit * w(m);
    }

    g.kappa.resize(static_cast<Eigen::Index>(n));
    const KillingRate kill(p);
    parallel_rows(n, opt.threads, [&](std::size_t i) { g.kappa(static_cast<Eigen::Index>(i)) = kill(domain, g.grid.points[i]); });

    g.stencil = opt.stencil ? stencil_correction(p, h) * unit : 0.0;

    g.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    parallel_rows(n, opt.threads, [&](std::size_t i) {
        const Eigen::Vector2i& xi = g.grid.index[i];
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const Eigen::Vector2i d = g.grid.index[j] - xi;
            const long m = static_cast<long>(d.x()) * d.x() + static_cast<long>(d.y()) * d.y();
            double v = table[m];
            row += v;
            if (m == 1) v += g.stencil;
            g.matrix(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = -v;
        }
        g.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = row + g.kappa(static_cast<Eigen::Index>(i)) + 4.0 * g.stencil;
    });
    return g;
}

Spectrum dense_spectrum(const Eigen::MatrixXd& a, std::size_t k, double h) {
    const auto n = static_cast<std::size_t>(a.rows());
    if (k == 0 || k > n) throw DomainError("requested eigenvalue count must lie in [1, N]");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw ConvergenceError("dense symmetric eigensolver did not converge");
    Spectrum s;
    s.h = h;
    s.dimension = n;
    s.eigenvalues = es.eigenvalues().head(static_cast<Eigen::Index>(k));
    s.residuals = residual_norms(a, es.eigenvectors().leftCols(static_cast<Eigen::Index>(k)), s.eigenvalues);
    return s;
}

Spectrum lanczos_spectrum(const Eigen::MatrixXd& a, std::size_t k, double h, const EigenOptions& opt) {
    const auto n = static_cast<Eigen::Index>(a.rows());
    if (k == 0 || static_cast<Eigen::Index>(k) > n) throw DomainError("requested eigenvalue count must lie in [1, N]");
    const Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) throw ConvergenceError("shift-invert Lanczos needs a positive definite matrix");

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> normal;
    auto random_unit = [&] {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
        return v;
    };

    const Eigen::Index kk = static_cast<Eigen::Index>(k);
    Eigen::Index cap = std::min<Eigen::Index>(n, 2 * kk + 40);
    Eigen::MatrixXd q(n, cap);
    std::vector<double> alpha, beta;
    Eigen::VectorXd v = random_unit();
    v.normalize();
    Eigen::Index m = 0;
    Eigen::VectorXd theta;
    Eigen::MatrixXd s;
    while (true) {
        if (m == cap) {
            if (cap == n) break;
            cap = std::min<Eigen::Index>(n, cap + cap / 2);
            q.conservativeResize(n, cap);
        }
        q.col(m) = v;
        Eigen::VectorXd w = llt.solve(v);
        if (m > 0) w -= beta.back() * q.col(m - 1);
        alpha.push_back(v.dot(w));
        w -= alpha.back() * v;
        for (int pass = 0; pass < 2; ++pass) w -= q.leftCols(m + 1) * (q.leftCols(m + 1).transpose() * w);
        double b = w.norm();
        ++m;
        if (b < 1e-13 * std::abs(alpha.back()) && m < n) {
            // Invariant subspace found; continue with a fresh orthogonal direction.
            w = random_unit();
            for (int pass = 0; pass < 2; ++pass) w -= q.leftCols(m) * (q.leftCols(m).transpose() * w);
            w.normalize();
            b = 0.0;
            v = w;
        } else {
            v = w / b;
        }
        beta.push_back(b);
        if (m < kk || (m % 10 != 0 && m != n)) continue;

        Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
        Eigen::VectorXd off = Eigen::Map<Eigen::VectorXd>(beta.data(), m - 1);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
        tri.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
        theta = tri.eigenvalues();  // ascending; largest correspond to smallest eigenvalues of a
        s = tri.eigenvectors();
        bool done = true;
        for (Eigen::Index i = 0; i < kk && done; ++i) {
            const Eigen::Index c = m - 1 - i;
            done = std::abs(b * s(m - 1, c)) <= opt.tol * std::abs(theta(c));
        }
        if (done || m == n) break;
    }
    if (theta.size() == 0) throw ConvergenceError("Lanczos produced no Ritz values");
    Spectrum out;
    out.h = h;
    out.dimension = static_cast<std::size_t>(n);
    out.eigenvalues.resize(kk);
    Eigen::MatrixXd vecs(n, kk);
    for (Eigen::Index i = 0; i < kk; ++i) {
        const Eigen::Index c = m - 1 - i;
        out.eigenvalues(i) = 1.0 / theta(c);
        vecs.col(i) = q.leftCols(m) * s.col(c);
    }
    out.residuals = residual_norms(a, vecs, out.eigenvalues);
    const double worst = out.residuals.maxCoeff();
    if (!(worst <= 1e-8))
        throw ConvergenceError("Lanczos residual " + std::to_string(worst) + " after " + std::to_string(m) + " steps for " +
                               std::to_string(k) + " eigenpairs");
    return out;
}

Spectrum eigen_spectrum(const Eigen::MatrixXd& a, std::size_t k, double h, const EigenOptions& opt) {
    const auto n = static_cast<std::size_t>(a.rows());
    if (n <= opt.dense_limit || static_cast<double>(k) > opt.dense_fraction * static_cast<double>(n)) return dense_spectrum(a, k, h);
    return lanczos_spectrum(a, k, h, opt);
}

TraceValue trace_from_spectrum(const Spectrum& s, double t, const ProcessParams& p, double max_tail) {
    if (!(t > 0.0)) throw DomainError("trace needs t > 0");
    const Eigen::Index k = s.eigenvalues.size();
    TraceValue out;
    // Ascending eigenvalues: sum from the small terms up.
    for (Eigen::Index i = k - 1; i >= 0; --i) out.value += std::exp(-s.eigenvalues(i) * t);
    if (s.complete()) return out;
    // N(lambda) ~ c lambda^{d/alpha} fitted on the upper half of the computed values.
    const double e = p.dim() / p.alpha();
    double c = 0.0;
    int used = 0;
    for (Eigen::Index i = k / 2; i < k; ++i) {
        c += static_cast<double>(i + 1) / std::pow(s.eigenvalues(i), e);
        ++used;
    }
    c /= std::max(used, 1);
    const double lk = s.eigenvalues(k - 1);
    out.tail_bound = c * e * std::pow(t, -e) * upper_gamma(e, t * lk);
    if (out.tail_bound > max_tail * out.value)
        throw TailTooHeavyError("trace tail " + std::to_string(out.tail_bound) + " exceeds " + std::to_string(max_tail) +
                                    " of the partial sum " + std::to_string(out.value) + "; increase k or t",
                                out.tail_bound, out.value);
    return out;
}

double lattice_free_density(const ProcessParams& p, double h, double t, bool stencil, int half_width) {
    require_planar(p);
    const int n = 2 * half_width;
    LatticeKernel w(p, h);
    // Kernel truncated to |j| < half_width; the rest enters as a constant.
    std::vector<double> wj(static_cast<std::size_t>(n) * n, 0.0);
    double total = 0.0;
    auto wrap = [n](int i) { return i < n / 2 ? i : i - n; };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const long a = wrap(i), b = wrap(j);
            const long m = a * a + b * b;
            if (m == 0 || m >= static_cast<long>(half_width) * half_width) continue;
            const double v = w(m);
            wj[static_cast<std::size_t>(i) * n + j] = v;
            total += v;
        }
    const ProcessParams lattice_params(p.alpha(), p.mass() * std::pow(h, p.alpha()), 2);
    total += 2.0 * kPi * LevyTail(lattice_params)(half_width);

    // Real even kernel: its 2D transform is a cosine sum, computed as two passes of 1D FFTs.
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> line(n), out(n);
    std::vector<std::complex<double>> grid(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) line[j] = wj[static_cast<std::size_t>(i) * n + j];
        fft.fwd(out, line);
        for (int j = 0; j < n; ++j) grid[static_cast<std::size_t>(i) * n + j] = out[j];
    }
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) line[i] = grid[static_cast<std::size_t>(i) * n + j];
        fft.fwd(out, line);
        for (int i = 0; i < n; ++i) grid[static_cast<std::size_t>(i) * n + j] = out[i];
    }
    const double c = stencil ? stencil_correction(p, h) : 0.0;
    const double tau = t * std::pow(h, -p.alpha());
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
        const double si = std::sin(kPi * i / n);
        for (int j = 0; j < n; ++j) {
            const double sj = std::sin(kPi * j / n);
            const double phi = total - grid[static_cast<std::size_t>(i) * n + j].real() + 4.0 * c * (si * si + sj * sj);
            mean += std::exp(-tau * phi);
        }
    }
    mean /= static_cast<double>(n) * n;
    return mean / (h * h);
}

double bias_corrected_trace(const Spectrum& s, const KilledGenerator& g, const ProcessParams& p, double t) {
    const double z = trace_from_spectrum(s, t, p).value;
    const double h = g.grid.h;
    const double lattice = lattice_free_density(p, h, t, g.stencil != 0.0);
    const double exact = free_density(p, t, 0.0);
    return z - static_cast<double>(g.grid.size()) * h * h * (lattice - exact);
}

std::size_t weyl_counting(const Spectrum& s, double lambda) {
    const double* b = s.eigenvalues.data();
    return static_cast<std::size_t>(std::upper_bound(b, b + s.eigenvalues.size(), lambda) - b);
}

std::size_t trust_ceiling(const Spectrum& coarse, const Spectrum& fine, double tol) {
    const Eigen::Index n = std::min(coarse.eigenvalues.size(), fine.eigenvalues.size());
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(coarse.eigenvalues(i) - fine.eigenvalues(i)) > tol * fine.eigenvalues(i)) return static_cast<std::size_t>(i);
    return static_cast<std::size_t>(n);
}

} // namespace rstrace
