#include "rstrace/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "rstrace/errors.hpp"
#include "rstrace/levy.hpp"
#include "rstrace/quadrature.hpp"

namespace rstrace {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kBlock = 4096;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double open_uniform(Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double v;
    do v = u(rng);
    while (v <= 0.0);
    return v;
}

void require_planar(const ProcessParams& p) {
    if (p.dim() != 2) throw ValidationError("path simulation is planar (d = 2)");
}

// Step size for the next move from a point at distance delta to the complement.
double local_step(const PathConfig& cfg, double alpha, double delta) {
    double dt = cfg.base_step;
    for (int level = 0; level < cfg.refine_levels && cfg.boundary_refine < 1.0; ++level) {
        if (delta >= 3.0 * std::pow(dt, 1.0 / alpha)) break;
        dt *= cfg.boundary_refine;
    }
    return dt;
}

PathStats pairwise(const std::vector<PathStats>& parts, std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return parts[lo];
    const std::size_t mid = lo + (hi - lo) / 2;
    const PathStats a = pairwise(parts, lo, mid), b = pairwise(parts, mid, hi);
    return {a.sum + b.sum, a.sum_sq + b.sum_sq, a.n + b.n};
}

EstimateWithError to_estimate(const PathStats& s, std::string note) {
    return {s.mean(), s.standard_error(), s.n, std::move(note)};
}

// One sample (or antithetic pair average) per index.
PathStats run(const PathConfig& cfg, const std::function<double(Rng&, double)>& path, std::uint64_t stream) {
    const std::uint64_t n = cfg.antithetic ? std::max<std::uint64_t>(1, cfg.n_paths / 2) : cfg.n_paths;
    return accumulate_paths(n, cfg.threads, [&](std::uint64_t i) {
        Rng rng = path_rng(cfg.seed, stream, i);
        if (!cfg.antithetic) return path(rng, 1.0);
        Rng twin = rng;
        return 0.5 * (path(rng, 1.0) + path(twin, -1.0));
    });
}

} // namespace

Rng path_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    const std::uint64_t a = splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
    return Rng(splitmix64(a ^ splitmix64(index)));
}

void PathConfig::validate() const {
    if (n_paths < 1) throw ValidationError("n_paths must be at least 1");
    if (!(base_step > 0.0) || !std::isfinite(base_step)) throw ValidationError("base_step must be positive");
    if (!(boundary_refine > 0.0 && boundary_refine <= 1.0)) throw ValidationError("boundary_refine must lie in (0, 1]");
    if (refine_levels < 0) throw ValidationError("refine_levels must be nonnegative");
}

std::string PathConfig::step_rule() const {
    std::ostringstream os;
    os << "dt=" << base_step;
    if (boundary_refine < 1.0 && refine_levels > 0)
        os << " x" << boundary_refine << "^k (k<=" << refine_levels << ") while delta<3dt^(1/alpha)";
    if (antithetic) os << " antithetic";
    return os.str();
}

double combined_error(const EstimateWithError& a, const EstimateWithError& b) { return std::hypot(a.error, b.error); }

double PathStats::variance() const {
    if (n < 2) return 0.0;
    const double m = mean();
    return std::max(0.0, (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
}

double PathStats::standard_error() const { return n ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }

double sample_positive_stable(double index, double t, Rng& rng) {
    if (!(index > 0.0 && index < 1.0)) throw DomainError("stable index must lie in (0, 1)");
    if (!(t > 0.0)) throw DomainError("subordinator time must be positive");
    const double u = kPi * open_uniform(rng);
    std::exponential_distribution<double> ex(1.0);
    double e;
    do e = ex(rng);
    while (e <= 0.0);
    const double a = index;
    const double log_s = std::log(t) / a + std::log(std::sin(a * u)) - std::log(std::sin(u)) / a +
                         (1.0 - a) / a * (std::log(std::sin((1.0 - a) * u)) - std::log(e));
    return std::exp(log_s);
}

double sample_tempered_subordinator(const ProcessParams& p, double dt, Rng& rng) {
    const double index = 0.5 * p.alpha();
    if (p.mass() == 0.0) return sample_positive_stable(index, dt, rng);
    const double acceptance = std::exp(-p.mass() * dt);
    if (acceptance < 1e-4)
        throw RejectionError("tilted subordinator acceptance " + std::to_string(acceptance) + " below 1e-4; shrink the step",
                             acceptance);
    const double shift = p.mass_shift();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (;;) {
        const double s = sample_positive_stable(index, dt, rng);
        if (u(rng) < std::exp(-shift * s)) return s;
    }
}

Point sample_increment(const ProcessParams& p, double dt, Rng& rng, double sign) {
    require_planar(p);
    const double scale = std::sqrt(2.0 * sample_tempered_subordinator(p, dt, rng));
    std::normal_distribution<double> g;
    const double a = g(rng), b = g(rng);
    return Point(sign * scale * a, sign * scale * b);
}

ExitSample simulate_exit(const ProcessParams& p, const Domain& d, const Point& x, double horizon, const PathConfig& cfg,
                         Rng& rng, double sign) {
    ExitSample out;
    out.tau = kInf;
    Point pos = x;
    double time = 0.0;
    while (time < horizon) {
        const double dt = std::min(local_step(cfg, p.alpha(), d.distance_to_complement(pos)), horizon - time);
        pos += sample_increment(p, dt, rng, sign);
        const double start = time;
        time = (horizon - time <= dt) ? horizon : time + dt;
        if (!d.contains(pos)) {
            out.tau = 0.5 * (start + time);
            out.exit_position = pos;
            out.alive = false;
            return out;
        }
    }
    out.exit_position = pos;
    return out;
}

PathStats accumulate_paths(std::uint64_t n, unsigned threads, const std::function<double(std::uint64_t)>& f) {
    if (n == 0) return {};
    const std::uint64_t blocks = (n + kBlock - 1) / kBlock;
    std::vector<PathStats> parts(blocks);
    auto work = [&](std::uint64_t b) {
        PathStats s;
        const std::uint64_t end = std::min(n, (b + 1) * kBlock);
        for (std::uint64_t i = b * kBlock; i < end; ++i) {
            const double v = f(i);
            s.sum += v;
            s.sum_sq += v * v;
            ++s.n;
        }
        parts[b] = s;
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, blocks));
    if (threads <= 1) {
        for (std::uint64_t b = 0; b < blocks; ++b) work(b);
    } else {
        std::atomic<std::uint64_t> next{0};
        std::vector<std::thread> pool;
        std::exception_ptr failure;
        std::mutex mu;
        for (unsigned w = 0; w < threads; ++w)
            pool.emplace_back([&] {
                try {
                    for (std::uint64_t b = next++; b < blocks; b = next++) work(b);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                    next = blocks;
                }
            });
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }
    return pairwise(parts, 0, parts.size());
}

EstimateWithError estimate_r_D(const ProcessParams& p, const Domain& d, double t, const Point& x, const PathConfig& cfg,
                               const DensityTableSet& tables, std::uint64_t stream) {
    require_planar(p);
    cfg.validate();
    if (!(t > 0.0)) throw DomainError("remainder needs t > 0");
    if (!d.contains(x)) throw DomainError("remainder needs x inside the domain");
    if (!(tables.params() == p) || tables.t_max() < t) throw ValidationError("density tables do not cover the query");
    const auto stats = run(cfg, [&](Rng& rng, double sign) {
        const ExitSample e = simulate_exit(p, d, x, t, cfg, rng, sign);
        if (e.alive || e.tau >= t) return 0.0;
        return tables(t - e.tau, (e.exit_position - x).norm());
    }, stream);
    return to_estimate(stats, cfg.step_rule());
}

EstimateWithError estimate_r_D(const ProcessParams& p, const Domain& d, double t, const Point& x, const PathConfig& cfg) {
    return estimate_r_D(p, d, t, x, cfg, DensityTableSet(p, t));
}

EstimateWithError estimate_f_H(const ProcessParams& p, double t, double r, const PathConfig& cfg, const DensityTableSet& tables,
                               std::uint64_t stream) {
    require_planar(p);
    cfg.validate();
    if (!(t > 0.0) || !(r > 0.0)) throw DomainError("f_H needs t > 0 and r > 0");
    if (!(tables.params() == p) || tables.t_max() < t) throw ValidationError("density tables do not cover the query");
    // Only the normal coordinate decides the exit; the tangential one is drawn at the exit
    // from the accumulated subordinator time.
    const auto stats = run(cfg, [&](Rng& rng, double sign) {
        double x1 = r, clock = 0.0, time = 0.0;
        std::normal_distribution<double> g;
        while (time < t) {
            const double dt = std::min(local_step(cfg, p.alpha(), x1), t - time);
            const double s = sample_tempered_subordinator(p, dt, rng);
            x1 += sign * std::sqrt(2.0 * s) * g(rng);
            clock += s;
            const double start = time;
            time = (t - time <= dt) ? t : time + dt;
            if (x1 <= 0.0) {
                const double x2 = sign * std::sqrt(2.0 * clock) * g(rng);
                return tables(t - 0.5 * (start + time), std::hypot(x1 - r, x2));
            }
        }
        return 0.0;
    }, stream);
    return to_estimate(stats, cfg.step_rule());
}

EstimateWithError estimate_f_H(const ProcessParams& p, double t, double r, const PathConfig& cfg) {
    return estimate_f_H(p, t, r, cfg, DensityTableSet(p, t));
}

C2Result compute_C2(double alpha, int dim, const PathConfig& cfg, const std::vector<double>& r_grid) {
    const ProcessParams p(alpha, 0.0, dim);
    require_planar(p);
    cfg.validate();
    if (r_grid.size() < 3) throw ValidationError("C2 needs at least three grid radii");
    for (std::size_t i = 0; i < r_grid.size(); ++i)
        if (!(r_grid[i] > 0.0) || (i > 0 && !(r_grid[i] > r_grid[i - 1]))) throw ValidationError("r_grid must be positive and ascending");
    if (r_grid.back() < 4.0) throw ValidationError("r_grid must reach r_max >= 4");

    C2Result res;
    res.r_grid = r_grid;
    res.steps = {cfg.base_step, 0.5 * cfg.base_step};
    const DensityTableSet tables(p, 1.0);
    const double p0 = tables(1.0, 0.0);
    const double e = dim + alpha;
    const std::size_t n = r_grid.size();

    for (std::size_t k = 0; k < res.steps.size(); ++k) {
        PathConfig c = cfg;
        c.base_step = res.steps[k];
        std::vector<EstimateWithError> prof;
        for (std::size_t j = 0; j < n; ++j) prof.push_back(estimate_f_H(p, 1.0, r_grid[j], c, tables, 1000 * (k + 1) + j));

        // Trapezoid with f(0+) = p(1, 0).
        double value = 0.5 * r_grid[0] * (p0 + prof[0].value);
        const double sliver = value;
        for (std::size_t j = 1; j < n; ++j) {
            const double w = 0.5 * (r_grid[j] - r_grid[j - 1]);
            value += w * (prof[j - 1].value + prof[j].value);
        }
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double w = 0.5 * ((j + 1 < n ? r_grid[j + 1] : r_grid[j]) - (j > 0 ? r_grid[j - 1] : 0.0));
            var += std::pow(w * prof[j].error, 2);
        }
        // Power tail from the last three points.
        double sx = 0, sy = 0, sxx = 0, sxy = 0, cmean = 0, cvar = 0;
        for (std::size_t j = n - 3; j < n; ++j) {
            if (!(prof[j].value > 0.0)) throw TailFitError("f_H is not positive on the last grid points");
            const double lx = std::log(r_grid[j]), ly = std::log(prof[j].value);
            sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
            cmean += prof[j].value * std::pow(r_grid[j], e) / 3.0;
            cvar += std::pow(prof[j].error * std::pow(r_grid[j], e) / 3.0, 2);
        }
        const double slope = (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
        // The bound c r^{-d-alpha} is not sharp (single-jump exits decay like r^{-d-2 alpha}), so only
        // a tail heavier than the bound is rejected.
        if (!(slope <= 0.5 - e))
            throw TailFitError("last three points decay like r^" + std::to_string(slope) + ", slower than the r^-" + std::to_string(e) + " bound");
        const double tail_w = std::pow(r_grid.back(), 1.0 - e) / (e - 1.0);
        const double tail = cmean * tail_w;
        value += tail;
        var += cvar * tail_w * tail_w;
        if (k == 0) {
            res.sliver = sliver;
            res.sliver_bound = r_grid[0] * p0;
            res.tail = tail;
            res.tail_slope = slope;
        }
        res.per_step.push_back({value, std::sqrt(var), c.n_paths * n, c.step_rule()});
        res.profiles.push_back(std::move(prof));
    }
    const double w = std::pow(2.0, 1.0 / alpha);
    const auto& a = res.per_step[0];
    const auto& b = res.per_step[1];
    res.value.value = (w * b.value - a.value) / (w - 1.0);
    res.value.error = std::hypot(w * b.error, a.error) / (w - 1.0);
    res.value.n_effective = a.n_effective + b.n_effective;
    res.value.bias_note = "Richardson in dt^(1/alpha) over dt=" + std::to_string(res.steps[0]) + "," + std::to_string(res.steps[1]);
    return res;
}

std::vector<double> trace_strata() { return {0.0, 0.25, 0.5, 1.0, 2.0, 4.0, kInf}; }

EstimateWithError estimate_trace_remainder(const ProcessParams& p, const Domain& d, double t, const PathConfig& cfg,
                                           const DensityTableSet& tables, std::uint64_t stream) {
    require_planar(p);
    cfg.validate();
    if (!d.bounded()) throw GeometryError("trace remainder needs a bounded domain");
    if (!(t > 0.0)) throw DomainError("trace remainder needs t > 0");
    const double scale = std::pow(t, 1.0 / p.alpha());
    const auto edges = trace_strata();
    const double in = d.inradius();
    const auto [lo, hi] = d.bounding_box();
    double value = 0.0, var = 0.0;
    std::uint64_t used = 0;
    std::size_t shells = 0;
    for (std::size_t k = 0; k + 1 < edges.size(); ++k)
        if (edges[k] * scale < in) ++shells;
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
        const double q0 = edges[k] * scale, q1 = std::min(edges[k + 1] * scale, in);
        if (!(q0 < in)) continue;
        const double area = d.inner_area(q0) - d.inner_area(q1);
        if (!(area > 0.0)) continue;
        PathConfig c = cfg;
        c.n_paths = std::max<std::uint64_t>(2, cfg.n_paths / shells);
        const auto stats = run(c, [&](Rng& rng, double sign) {
            std::uniform_real_distribution<double> ux(lo.x(), hi.x()), uy(lo.y(), hi.y());
            Point x;
            for (int tries = 0;; ++tries) {
                if (tries > 10000000) throw GeometryError("could not sample the distance shell");
                x = Point(ux(rng), uy(rng));
                if (!d.contains(x)) continue;
                const double delta = d.distance_to_complement(x);
                if (delta >= q0 && delta < q1) break;
            }
            const ExitSample e = simulate_exit(p, d, x, t, cfg, rng, sign);
            if (e.alive || e.tau >= t) return 0.0;
            return tables(t - e.tau, (e.exit_position - x).norm());
        }, stream * 16 + k);
        value += area * stats.mean();
        var += area * area * stats.variance() / static_cast<double>(stats.n);
        used += stats.n;
    }
    return {value, std::sqrt(var), used, cfg.step_rule() + " stratified"};
}

EstimateWithError estimate_trace_remainder(const ProcessParams& p, const Domain& d, double t, const PathConfig& cfg) {
    return estimate_trace_remainder(p, d, t, cfg, DensityTableSet(p, t));
}

EstimateWithError landing_probability(const ProcessParams& p, const Domain& d, const Point& x, double t1, double t2,
                                      const std::function<bool(const Point&)>& target, const PathConfig& cfg,
                                      std::uint64_t stream) {
    require_planar(p);
    cfg.validate();
    if (!(t1 >= 0.0 && t2 >= t1)) throw DomainError("need 0 <= t1 <= t2");
    if (!d.contains(x)) throw DomainError("start point must lie inside the domain");
    if (t2 == t1) return {0.0, 0.0, cfg.n_paths, cfg.step_rule()};
    const auto stats = run(cfg, [&](Rng& rng, double sign) {
        const ExitSample e = simulate_exit(p, d, x, t2, cfg, rng, sign);
        return (!e.alive && e.tau > t1 && target(e.exit_position)) ? 1.0 : 0.0;
    }, stream);
    return to_estimate(stats, cfg.step_rule());
}

EstimateWithError exit_probability(const ProcessParams& p, const Domain& d, const Point& x, double horizon, const PathConfig& cfg,
                                   std::uint64_t stream) {
    require_planar(p);
    cfg.validate();
    const auto stats = run(cfg, [&](Rng& rng, double sign) { return simulate_exit(p, d, x, horizon, cfg, rng, sign).alive ? 0.0 : 1.0; },
                           stream);
    return to_estimate(stats, cfg.step_rule());
}

namespace {

// Linear interpolation on a sorted grid, clamped at the ends.
double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
    const double w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    return (1 - w) * ys[i] + w * ys[i + 1];
}

} // namespace

IkedaWatanabeResult ikeda_watanabe_check(const ProcessParams& p, const Domain& disk, double r_in, double r_out, double t1,
                                         double t2, const PathConfig& cfg) {
    require_planar(p);
    cfg.validate();
    if (disk.kind() != DomainKind::Disk) throw GeometryError("the Ikeda-Watanabe benchmark uses a disk");
    const double big_r = disk.radius();
    const Point c = disk.center();
    if (!(r_in > big_r) || !(r_out > r_in)) throw GeometryError("the annulus target must keep a positive distance from the disk");
    if (!(t1 >= 0.0 && t2 >= t1)) throw DomainError("need 0 <= t1 <= t2");
    IkedaWatanabeResult res;
    auto in_target = [&](const Point& z) {
        const double r = (z - c).norm();
        return r > r_in && r < r_out;
    };
    res.left = landing_probability(p, disk, c, t1, t2, in_target, cfg, 1);
    if (t2 == t1) {
        res.right = {0.0, 0.0, cfg.n_paths, cfg.step_rule()};
        return res;
    }

    // K(r) = int_target J(y, z) dz for |y - c| = r, as a difference of disk killing rates.
    const KillingRate kill(p);
    const Domain inner = Domain::disk(r_in, c), outer = Domain::disk(r_out, c);
    std::vector<double> kr, kv;
    for (int i = 0; i <= 1024; ++i) {
        const double r = big_r * i / 1024.0;
        const Point y = c + Point(r, 0.0);
        kr.push_back(r);
        kv.push_back(kill(inner, y) - kill(outer, y));
    }
    auto big_k = [&](double r) { return interp(kr, kv, r); };

    const DensityTableSet tables(p, t2);
    const QuadOptions opt{1e-300, 1e-8, 4000};

    // Free part: int_{t1}^{t2} int_D p(s, |y|) K(|y|) dy ds, in log r since the time integral grows like 1/r.
    auto radial = [&](double w) {
        const double r = std::exp(w);
        auto f = [&](double s) { return tables(s, r); };
        return 2.0 * kPi * r * r * big_k(r) * integrate(f, t1, t2, opt).value;
    };
    const double w_lo = std::log(1e-8 * big_r), w_hi = std::log(big_r);
    const GaussLegendre gr(16);
    for (int k = 0; k < 20; ++k) res.free_part += gr(radial, w_lo + (w_hi - w_lo) * k / 20, w_lo + (w_hi - w_lo) * (k + 1) / 20);

    // G(U, rho) = int_D K(y) int_0^U p(u, z, y) du dy for |z - c| = rho > R.
    std::vector<double> us;
    const int nu = 48;
    for (int i = 0; i <= nu; ++i) us.push_back(t2 * std::pow(static_cast<double>(i) / nu, 2));
    std::vector<double> ws;  // log distance outside the disk
    const int nw = 48;
    for (int j = 0; j <= nw; ++j) ws.push_back(std::log(1e-4) + (std::log(20.0) - std::log(1e-4)) * j / nw);

    // P(U, r) = int_0^U p(u, r) du on a log radial grid, cumulative in U.
    std::vector<double> pr;
    for (int j = 0; j <= 400; ++j) pr.push_back(std::log(1e-5) + (std::log(r_out + 30.0) - std::log(1e-5)) * j / 400.0);
    std::vector<std::vector<double>> big_p(us.size(), std::vector<double>(pr.size(), 0.0));
    const QuadOptions popt{1e-300, 1e-9, 2000};
    for (std::size_t i = 1; i < us.size(); ++i)
        for (std::size_t j = 0; j < pr.size(); ++j) {
            const double r = std::exp(pr[j]);
            big_p[i][j] = big_p[i - 1][j] + integrate([&](double u) { return tables(u, r); }, us[i - 1], us[i], popt, false).value;
        }
    auto p_of = [&](std::size_t i, double r) {
        const double lr = std::log(std::max(r, 1e-5));
        return interp(pr, big_p[i], lr);
    };
    // Polar coordinates about z: y = z + s e(theta), theta from the direction of c. With
    // sin(theta) = (R / rho) sin(phi) the chord is b +- R cos(phi); s is integrated in log s.
    std::vector<std::vector<double>> big_g(us.size(), std::vector<double>(ws.size(), 0.0));
    const GaussLegendre gphi(32), gw(8);
    for (std::size_t i = 1; i < us.size(); ++i)
        for (std::size_t j = 0; j < ws.size(); ++j) {
            const double rho = big_r + std::exp(ws[j]);
            auto along = [&](double phi) {
                const double sn = big_r / rho * std::sin(phi);
                const double cs = std::sqrt(std::max(0.0, 1.0 - sn * sn));
                const double b = rho * cs, hh = big_r * std::cos(phi);
                const double lo = std::log(std::max(b - hh, 1e-12)), hi = std::log(b + hh);
                auto integrand = [&](double w) {
                    const double s = std::exp(w);
                    const double ry = std::sqrt(std::max(0.0, rho * rho + s * s - 2.0 * rho * s * cs));
                    return s * s * p_of(i, s) * big_k(std::min(ry, big_r));
                };
                const int panels = std::max(1, static_cast<int>(std::ceil(hi - lo)));
                double acc = 0.0;
                for (int k = 0; k < panels; ++k)
                    acc += gw(integrand, lo + (hi - lo) * k / panels, lo + (hi - lo) * (k + 1) / panels);
                return acc * (big_r / rho) * std::cos(phi) / cs;
            };
            big_g[i][j] = 2.0 * gphi(along, 0.0, 0.5 * kPi);
        }
    auto g_of = [&](double u_len, double rho) {
        if (u_len <= 0.0) return 0.0;
        const double w = std::log(std::max(rho - big_r, 1e-4));
        if (w > ws.back()) return 0.0;
        // linear in U between nodes, linear in log distance
        const auto it = std::upper_bound(us.begin(), us.end(), u_len);
        const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - us.begin()), us.size() - 1);
        const double gi = interp(ws, big_g[i], w), gim = interp(ws, big_g[i - 1], w);
        const double t = (u_len - us[i - 1]) / (us[i] - us[i - 1]);
        return (1 - t) * gim + t * gi;
    };

    const auto stats = run(cfg, [&](Rng& rng, double sign) {
        const ExitSample e = simulate_exit(p, disk, c, t2, cfg, rng, sign);
        if (e.alive || e.tau >= t2) return 0.0;
        const double rho = (e.exit_position - c).norm();
        return g_of(t2 - e.tau, rho) - g_of(std::max(t1 - e.tau, 0.0), rho);
    }, 2);
    res.right.value = res.free_part - stats.mean();
    res.right.error = stats.standard_error();
    res.right.n_effective = stats.n;
    res.right.bias_note = cfg.step_rule() + " free part by quadrature";
    return res;
}

} // namespace rstrace
