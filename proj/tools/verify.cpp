#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <tuple>

#include "rstrace/density.hpp"
#include "rstrace/errors.hpp"
#include "rstrace/levy.hpp"
#include "rstrace/montecarlo.hpp"
#include "rstrace/spectral.hpp"

#include "commands.hpp"

namespace rstrace::cli {

namespace {

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Budget {
    std::uint64_t scale;  // path-count divisor in quick mode
    std::uint64_t paths(std::uint64_t full) const { return std::max<std::uint64_t>(1000, full / scale); }
};

PathConfig cfg_for(const VerifySettings& s, std::uint64_t paths, double step = 0.01) {
    PathConfig c;
    c.n_paths = paths;
    c.base_step = step;
    c.seed = s.seed;
    c.threads = s.threads;
    return c;
}

VerifyCheck characteristic_function(const VerifySettings& s, Budget b) {
    const int n = static_cast<int>(b.paths(200000));
    int bad = 0;
    double worst = 0.0;
    std::uint64_t stream = 100;
    for (auto [a, m, dt] : {std::tuple{1.0, 1.0, 0.25}, std::tuple{0.6, 0.5, 0.5}, std::tuple{1.5, 2.0, 0.1}}) {
        const ProcessParams p(a, m, 2);
        for (double xi : {0.5, 1.0, 2.0}) {
            Rng rng = path_rng(s.seed, stream++, 0);
            double sum = 0.0, sum2 = 0.0;
            for (int i = 0; i < n; ++i) {
                const double c = std::cos(xi * sample_increment(p, dt, rng).x());
                sum += c;
                sum2 += c * c;
            }
            const double mean = sum / n, err = std::sqrt(std::max(0.0, sum2 / n - mean * mean) / n);
            const double z = std::abs(mean - std::exp(-dt * char_exponent(p, xi))) / err;
            worst = std::max(worst, z);
            bad += !(z < 3.0);
        }
    }
    return {"characteristic function of increments", bad == 0,
            fmt("9 cases, %d samples each, worst |diff| = %.2f stderr (limit 3)", n, worst)};
}

VerifyCheck sigma_mass_check() {
    double worst = 0.0;
    for (auto [a, m] : {std::pair{0.6, 0.5}, std::pair{1.0, 1.0}, std::pair{1.4, 2.5}})
        worst = std::max(worst, std::abs(sigma_mass(ProcessParams(a, m, 2)) - m));
    return {"sigma mass equals m", worst < 1e-6, fmt("3 parameter sets, max |l - m| = %.2e (limit 1e-6)", worst)};
}

VerifyCheck levy_ordering() {
    int bad = 0, n = 0;
    for (auto [a, m] : {std::pair{0.6, 0.5}, std::pair{1.0, 1.0}, std::pair{1.4, 2.5}}) {
        const ProcessParams pm(a, m, 2), p0(a, 0.0, 2);
        for (int i = 0; i <= 50; ++i, ++n) {
            const double r = std::pow(10.0, -3.0 + 5.0 * i / 50);
            bad += !(levy_density(pm, r) <= levy_density(p0, r));
        }
    }
    return {"J^m <= J^0 on a log grid", bad == 0, fmt("%d points on [1e-3, 1e2], %d violations", n, bad)};
}

VerifyCheck psi_check() {
    double at_zero = 0.0, drift = 0.0;
    bool finite = true;
    for (int d : {1, 2, 3})
        for (double a : {0.5, 1.0, 1.6}) {
            const auto prof = PsiProfile::for_params(ProcessParams(a, 1, d));
            at_zero = std::max(at_zero, std::abs(psi(prof, 0.0) - 1.0));
            auto range = [&](int n) {
                double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
                for (int i = 0; i <= n; ++i) {
                    const double r = 1.0 + 9.0 * i / n;
                    const double q = psi(prof, r) / (std::exp(-r) * std::pow(r, 0.5 * (d + a - 1)));
                    lo = std::min(lo, q);
                    hi = std::max(hi, q);
                }
                return hi / lo;
            };
            const double c1 = range(20), c2 = range(80);
            finite = finite && std::isfinite(c1) && std::isfinite(c2);
            drift = std::max(drift, std::abs(c2 - c1) / c1);
        }
    return {"psi(0) = 1 and envelope stability", finite && at_zero < 1e-12 && drift < 0.02,
            fmt("|psi(0) - 1| = %.1e (limit 1e-12); envelope ratio drift %.2e under 4x refinement (limit 0.02)", at_zero, drift)};
}

VerifyCheck density_scaling() {
    double worst = 0.0;
    for (auto [a, m, t, r] : {std::tuple{0.8, 3.0, 0.5, 0.7}, std::tuple{1.5, 0.4, 0.2, 0.05}, std::tuple{1.0, 2.0, 1.0, 4.0}}) {
        const double lhs = free_density(ProcessParams(a, m, 2), t, r);
        const double rhs = std::pow(m, 2 / a) * free_density(ProcessParams(a, 1.0, 2), m * t, std::pow(m, 1 / a) * r);
        worst = std::max(worst, std::abs(lhs - rhs) / std::abs(rhs));
    }
    return {"mass scaling of the free density (quadrature)", worst < 1e-8,
            fmt("3 cases, max relative difference %.2e (limit 1e-8)", worst)};
}

// r^m_D(t, x, x) = m^{d/alpha} r^1_{m^{1/alpha} D}(m t, m^{1/alpha} x, m^{1/alpha} x)
VerifyCheck remainder_scaling(const VerifySettings& s, Budget b) {
    const double a = 1.0, m = 2.0, t = 0.1, step = 0.005;
    const double ls = std::pow(m, 1 / a);
    auto lhs_cfg = cfg_for(s, b.paths(40000), step);
    auto rhs_cfg = cfg_for(s, b.paths(40000), m * step);
    const auto lhs = estimate_r_D(ProcessParams(a, m, 2), Domain::disk(1.0), t, Point(0.8, 0.0), lhs_cfg,
                                  DensityTableSet(ProcessParams(a, m, 2), t), 11);
    const auto r1 = estimate_r_D(ProcessParams(a, 1.0, 2), Domain::disk(ls), m * t, Point(0.8 * ls, 0.0), rhs_cfg,
                                 DensityTableSet(ProcessParams(a, 1.0, 2), m * t), 12);
    const double f = std::pow(m, 2 / a);
    const double diff = std::abs(lhs.value - f * r1.value), err = std::hypot(lhs.error, f * r1.error);
    return {"mass scaling of the remainder (Monte Carlo)", diff < 3 * err,
            fmt("r^2_D = %.5g, 4 r^1_{2D} = %.5g, |diff| = %.2f stderr (limit 3)", lhs.value, f * r1.value, diff / err)};
}

VerifyCheck ikeda_watanabe(const VerifySettings& s, Budget b) {
    const auto iw = ikeda_watanabe_check(ProcessParams(1.0, 0.5, 2), Domain::disk(1.0), 2.0, 3.0, 0.0, 0.5, cfg_for(s, b.paths(10000)));
    const double err = combined_error(iw.left, iw.right), diff = std::abs(iw.left.value - iw.right.value);
    return {"Ikeda-Watanabe exit law on the disk", iw.left.value > 0.0 && diff < 3 * err,
            fmt("left %.5g +- %.2g, right %.5g +- %.2g, |diff| = %.2f combined stderr (limit 3)", iw.left.value, iw.left.error,
                iw.right.value, iw.right.error, diff / err)};
}

VerifyCheck domination(const VerifySettings& s, Budget b) {
    const Domain disk = Domain::disk(1.0);
    const double t = 0.1;
    double worst = -std::numeric_limits<double>::infinity();
    int bad = 0;
    std::uint64_t stream = 20;
    const ProcessParams p0(1.0, 0.0, 2);
    const DensityTableSet t0(p0, t);
    for (double m : {0.5, 2.0}) {
        const ProcessParams pm(1.0, m, 2);
        const DensityTableSet tm(pm, t);
        for (double x : {0.0, 0.6, 0.9}) {
            const auto cfg = cfg_for(s, b.paths(20000));
            const auto rm = estimate_r_D(pm, disk, t, Point(x, 0), cfg, tm, stream++);
            const auto r0 = estimate_r_D(p0, disk, t, Point(x, 0), cfg, t0, stream++);
            const double e = std::exp(2 * m * t);
            const double z = (rm.value - e * r0.value) / std::hypot(rm.error, e * r0.error);
            if (std::isfinite(z)) worst = std::max(worst, z);
            bad += !(rm.value <= e * r0.value + 3 * std::hypot(rm.error, e * r0.error));
        }
    }
    return {"domination r^m <= e^{2mt} r^0", bad == 0,
            fmt("6 cases, largest excess %.2f stderr (limit 3)", worst)};
}

// c(t) = sup over delta of r_D / min(t^{-d/alpha}, t psi(m^{1/alpha} delta) / delta^{d+alpha}), with delta swept
// on the scale t^{1/alpha}; the bound says c(t) stays bounded, so it must not move with t.
VerifyCheck bound_shape(const VerifySettings& s, Budget b) {
    const ProcessParams p(1.0, 1.0, 2);
    const Domain disk = Domain::disk(1.0);
    const auto prof = PsiProfile::for_params(p);
    std::vector<double> sup;
    std::string detail;
    std::uint64_t stream = 40;
    for (double t : {0.05, 0.1}) {
        const DensityTableSet tables(p, t);
        const double len = std::pow(t, 1 / p.alpha());
        double best = 0.0;
        for (double u : {0.1, 0.3, 1.0, 3.0, 8.0}) {
            const double delta = u * len;
            const auto r = estimate_r_D(p, disk, t, Point(1.0 - delta, 0.0), cfg_for(s, b.paths(20000), 0.0025), tables, stream++);
            const double shape = std::min(std::pow(t, -2 / p.alpha()),
                                          t * psi(prof, p.mass_scale() * delta) / std::pow(delta, 2 + p.alpha()));
            best = std::max(best, r.value / shape);
        }
        sup.push_back(best);
        detail += fmt("c(%.2f) = %.4f; ", t, best);
    }
    const double ratio = *std::max_element(sup.begin(), sup.end()) / *std::min_element(sup.begin(), sup.end());
    detail += fmt("ratio %.3f (limit 1.5)", ratio);
    return {"remainder bound shape is stable in t", sup[0] > 0.0 && std::isfinite(ratio) && ratio < 1.5, detail};
}

VerifyCheck determinism(const VerifySettings& s, Budget b) {
    const ProcessParams p(1.0, 0.5, 2);
    const Domain disk = Domain::disk(1.0);
    const DensityTableSet tables(p, 0.2);
    auto cfg = cfg_for(s, b.paths(9000));
    cfg.threads = 1;
    const auto a = estimate_r_D(p, disk, 0.2, Point(0.7, 0.1), cfg, tables);
    cfg.threads = 3;
    const auto c = estimate_r_D(p, disk, 0.2, Point(0.7, 0.1), cfg, tables);
    const auto d = estimate_r_D(p, disk, 0.2, Point(0.7, 0.1), cfg, tables);
    const bool mc = a.value == c.value && a.error == c.error && c.value == d.value;

    const auto g = assemble_killed_generator(p, disk, 0.1);
    const auto s1 = eigen_spectrum(g.matrix, 40, g.grid.h), s2 = eigen_spectrum(g.matrix, 40, g.grid.h);
    const bool sp = s1.eigenvalues == s2.eigenvalues;
    return {"bit-identical reruns", mc && sp,
            fmt("Monte Carlo (1 vs 3 threads, repeated): %s; spectrum repeated: %s", mc ? "identical" : "DIFFERENT",
                sp ? "identical" : "DIFFERENT")};
}

VerifyCheck step_halving(const VerifySettings& s, Budget b) {
    const ProcessParams p(1.0, 0.0, 2);
    const Domain disk = Domain::disk(1.0);
    const DensityTableSet tables(p, 0.1);
    const auto a = estimate_r_D(p, disk, 0.1, Point(0.8, 0), cfg_for(s, b.paths(40000), 0.0025), tables, 60);
    const auto c = estimate_r_D(p, disk, 0.1, Point(0.8, 0), cfg_for(s, b.paths(40000), 0.00125), tables, 61);
    const double z = std::abs(a.value - c.value) / combined_error(a, c);
    return {"step halving moves the disk remainder by < 2 stderr", z < 2.0,
            fmt("dt 0.0025: %.5g, dt 0.00125: %.5g, |diff| = %.2f stderr (limit 2)", a.value, c.value, z)};
}

} // namespace

std::vector<VerifyCheck> verify_suite(const VerifySettings& settings, const std::function<void(const VerifyCheck&)>& progress) {
    const Budget b{settings.quick ? 4u : 1u};
    const std::vector<std::pair<const char*, std::function<VerifyCheck()>>> checks{
        {"characteristic function", [&] { return characteristic_function(settings, b); }},
        {"sigma mass", [] { return sigma_mass_check(); }},
        {"Levy density ordering", [] { return levy_ordering(); }},
        {"psi", [] { return psi_check(); }},
        {"density scaling", [] { return density_scaling(); }},
        {"remainder scaling", [&] { return remainder_scaling(settings, b); }},
        {"Ikeda-Watanabe", [&] { return ikeda_watanabe(settings, b); }},
        {"domination", [&] { return domination(settings, b); }},
        {"bound shape", [&] { return bound_shape(settings, b); }},
        {"determinism", [&] { return determinism(settings, b); }},
        {"step halving", [&] { return step_halving(settings, b); }},
    };
    std::vector<VerifyCheck> out;
    for (const auto& [name, run] : checks) {
        const auto t0 = std::chrono::steady_clock::now();
        VerifyCheck c;
        try {
            c = run();
        } catch (const std::exception& e) {
            c = {name, false, std::string("raised: ") + e.what()};
        }
        c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (progress) progress(c);
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace rstrace::cli
