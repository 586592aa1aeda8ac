#include "rstrace/density.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "rstrace/errors.hpp"
#include "rstrace/levy.hpp"
#include "rstrace/quadrature.hpp"
#include "rstrace/special.hpp"

namespace rstrace {

namespace {

constexpr double kPi = std::numbers::pi;

struct Scaled {
    double alpha, mu, shift;
    int dim;
    Scaled(double a, double m, int d) : alpha(a), mu(m), shift(m == 0.0 ? 0.0 : std::pow(m, 2.0 / a)), dim(d) {}

    double phi(double s) const {
        if (mu == 0.0) return std::pow(s, alpha);
        if (s * s < shift) return mu * std::expm1(0.5 * alpha * std::log1p(s * s / shift));
        return std::pow(s * s + shift, 0.5 * alpha) - mu;
    }
    double prefactor() const { return sphere_area(dim) / std::pow(2.0 * kPi, dim); }

    // Beyond this frequency exp(-phi) s^{d-1} is below e^{-46} of anything relevant.
    double cutoff() const {
        auto excess = [&](double s) { return phi(s) - (dim - 1) * std::log(std::max(s, 1.0)) - 46.0; };
        double hi = 1.0;
        while (excess(hi) < 0.0) hi *= 2.0;
        double lo = hi / 2.0;
        if (excess(lo) >= 0.0) return hi;
        for (int i = 0; i < 60; ++i) {
            const double mid = 0.5 * (lo + hi);
            (excess(mid) < 0.0 ? lo : hi) = mid;
        }
        return hi;
    }
};

// Adaptive integration over [a, b] cut at a doubling sequence of points, so
// that slowly decaying integrands do not starve the interval budget.
template <class F>
double integrate_doubling(F& f, double a, double b, double abs_tol, int max_intervals) {
    QuadOptions opt{abs_tol, 1e-14, max_intervals};
    double sum = 0.0;
    double lo = a;
    double step = std::max(1.0, a);
    while (lo < b) {
        const double hi = std::min(b, lo + step);
        sum += integrate(f, lo, hi, opt).value;
        lo = hi;
        step *= 2.0;
    }
    return sum;
}

double hankel_log_k(double nu, double x) {
    const double mu = 4.0 * nu * nu;
    double sum = 1.0, term = 1.0;
    for (int k = 1; k < 80; ++k) {
        const double odd = 2.0 * k - 1.0;
        const double next = term * (mu - odd * odd) / (k * 8.0 * x);
        if (std::abs(next) > std::abs(term)) break;
        term = next;
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return 0.5 * std::log(kPi / (2.0 * x)) - x + std::log(sum);
}

double log_bessel_k(double nu, double x) {
    if (x > 500.0) return hankel_log_k(nu, x);
    double k = std::numeric_limits<double>::quiet_NaN();
    try {
        k = std::cyl_bessel_k(nu, x);
    } catch (const std::exception&) {
    }
    if (k > 0.0 && std::isfinite(k)) return std::log(k);
    if (x < nu) return std::lgamma(nu) - std::log(2.0) + nu * std::log(2.0 / x);
    return hankel_log_k(nu, x);
}

double difference_at_zero_scaled(double alpha, double mu, int dim, double abs_tol) {
    if (mu == 0.0) return 0.0;
    const Scaled sc(alpha, mu, dim);
    const ProcessParams pm(alpha, mu, dim);
    auto f = [&](double s) {
        if (s == 0.0) return 0.0;
        return std::exp(-std::pow(s, alpha)) * std::expm1(char_exponent_deficit(pm, s)) * std::pow(s, dim - 1);
    };
    // Stable density beyond the cutoff of the stable exponent is negligible in both terms.
    const Scaled stable(alpha, 0.0, dim);
    const double cut = std::max(sc.cutoff(), stable.cutoff());
    const double pref = sc.prefactor();
    return pref * integrate_doubling(f, 0.0, cut, abs_tol / pref, 100000);
}

double scaled_tolerance(double abs_tol, double t, const ProcessParams& p) {
    const double floor = 1e-15 * volume_constant(p.alpha(), p.dim());
    return std::max(abs_tol * std::pow(t, p.dim() / p.alpha()), floor);
}

} // namespace

namespace density_routes {

std::optional<double> far_field(double alpha, double mu, int dim, double rho, double rel_tol) {
    if (!(rho > 0.0)) return std::nullopt;
    const double beta = 0.5 * alpha;
    const double ms = mu == 0.0 ? 0.0 : std::pow(mu, 1.0 / alpha);
    const double x = rho * ms;
    const bool massless = mu == 0.0 || x < 1e-9;
    const double log_pref = mu - 0.5 * dim * std::log(4.0 * kPi) - std::log(kPi);

    constexpr int kmax = 240;
    // Terms are kept relative to the first one so that far tails do not underflow.
    std::vector<double> terms;
    terms.reserve(kmax);
    double log_ref = std::numeric_limits<double>::quiet_NaN();
    double sum = 0.0;
    for (int k = 1; k <= kmax; ++k) {
        const double s = std::sin(k * kPi * beta);
        if (std::abs(s) < 1e-13) {
            terms.push_back(0.0);
            continue;
        }
        const double nu = 0.5 * dim + k * beta;
        const double log_i = massless ? std::lgamma(nu) + nu * std::log(4.0 / (rho * rho))
                                      : std::log(2.0) + nu * std::log(2.0 * ms / rho) + log_bessel_k(nu, x);
        const double log_mag = std::lgamma(k * beta + 1.0) - std::lgamma(k + 1.0) + std::log(std::abs(s)) + log_i + log_pref;
        if (std::isnan(log_ref)) log_ref = log_mag;
        if (log_mag - log_ref > 700.0) break;
        const double sign = ((k % 2 == 1) ? 1.0 : -1.0) * (s > 0.0 ? 1.0 : -1.0);
        const double term = sign * std::exp(log_mag - log_ref);
        terms.push_back(term);
        sum += term;
        if (std::abs(term) < 1e-3 * rel_tol * std::abs(sum)) break;
        if (k > 8 && std::abs(term) > 1e8 * std::abs(sum)) break;
    }
    // Truncate just before the smallest nonzero term.
    std::size_t cut = terms.size();
    double smallest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const double a = std::abs(terms[i]);
        if (a > 0.0 && a < smallest) {
            smallest = a;
            cut = i;
        }
    }
    double total = 0.0, biggest = 0.0;
    for (std::size_t i = 0; i < cut; ++i) {
        total += terms[i];
        biggest = std::max(biggest, std::abs(terms[i]));
    }
    if (cut == terms.size() || !(total > 0.0)) return std::nullopt;
    const double err = smallest + 64.0 * std::numeric_limits<double>::epsilon() * biggest * static_cast<double>(cut);
    if (err > rel_tol * total) return std::nullopt;
    return total * std::exp(log_ref);
}

double oscillatory(double alpha, double mu, int dim, double rho, double abs_tol, int max_intervals) {
    const Scaled sc(alpha, mu, dim);
    if (rho == 0.0) return at_zero(alpha, mu, dim, abs_tol);
    const double pref = sc.prefactor();
    const double tol = abs_tol / pref;
    const double cut = sc.cutoff();
    auto f = [&](double s) {
        if (s == 0.0) return dim == 1 ? 1.0 : 0.0;
        return std::exp(-sc.phi(s)) * radial_kernel(dim, rho * s) * std::pow(s, dim - 1);
    };
    QuadOptions piece{1e-3 * tol, 1e-14, 2000};
    double lo = 0.0;
    double sum = 0.0;
    EpsilonAccelerator acc;
    int stable = 0;
    for (int k = 1; k <= max_intervals; ++k) {
        double hi = radial_kernel_zero(dim, k) / rho;
        const bool last = hi >= cut;
        if (last) hi = cut;
        sum += (k == 1 || last) ? integrate_doubling(f, lo, hi, piece.abs_tol, 2000) : integrate(f, lo, hi, piece).value;
        if (last) return pref * sum;
        if (k >= 6) {
            acc.push(sum);
            stable = acc.error() < 0.1 * tol ? stable + 1 : 0;
            if (stable >= 3) return pref * acc.estimate();
        }
        lo = hi;
    }
    throw QuadratureError("oscillatory density integral did not converge", pref * acc.error());
}

double at_zero(double alpha, double mu, int dim, double abs_tol) {
    const Scaled sc(alpha, mu, dim);
    const double pref = sc.prefactor();
    auto f = [&](double s) { return std::exp(-sc.phi(s)) * std::pow(s, dim - 1); };
    return pref * integrate_doubling(f, 0.0, sc.cutoff(), abs_tol / pref, 100000);
}

} // namespace density_routes

double density_at_zero(const ProcessParams& p, double t, const DensityOptions& opt) {
    if (!(t > 0.0)) throw DomainError("time must be positive");
    const double q = density_routes::at_zero(p.alpha(), p.mass() * t, p.dim(), scaled_tolerance(opt.zero_tol, t, p));
    return std::pow(t, -p.dim() / p.alpha()) * q;
}

double free_density(const ProcessParams& p, double t, double r, const DensityOptions& opt) {
    if (!(t > 0.0)) throw DomainError("time must be positive");
    if (!(r >= 0.0)) throw DomainError("radius must be nonnegative");
    if (r == 0.0) return density_at_zero(p, t, opt);
    const double a = p.alpha();
    const double rho = r * std::pow(t, -1.0 / a);
    const double mu = p.mass() * t;
    const double scale = std::pow(t, -p.dim() / a);
    if (rho >= 1.0) {
        if (auto v = density_routes::far_field(a, mu, p.dim(), rho)) return scale * *v;
    }
    return scale * density_routes::oscillatory(a, mu, p.dim(), rho, scaled_tolerance(opt.abs_tol, t, p), opt.max_intervals);
}

ExpansionTerms density_diff_expansion(const ProcessParams& p, double t, const DensityOptions& opt) {
    if (!(t > 0.0)) throw DomainError("time must be positive");
    ExpansionTerms out;
    const double a = p.alpha();
    const int d = p.dim();
    out.k = static_cast<int>(std::ceil(2.0 / a)) - 1;
    const double scale = std::pow(t, -d / a);
    const double c = volume_constant(a, d);
    const double mu = p.mass() * t;
    double acc = 0.0, term = 1.0;
    for (int n = 1; n <= out.k; ++n) {
        term *= mu / n;
        acc += term;
        out.partial_sums.push_back(scale * c * acc);
    }
    const double tol = std::min(opt.zero_tol * std::pow(t, d / a), 1e-14 * c);
    const double diff = difference_at_zero_scaled(a, mu, d, std::max(tol, 1e-16 * c));
    out.prediction = scale * c * acc;
    out.numeric_difference = scale * diff;
    out.residual = scale * (diff - c * acc);
    return out;
}

std::vector<double> uniform_convergence_gap(const ProcessParams& base, const std::vector<double>& masses, double t_lo,
                                            double t_hi, const DensityOptions& opt) {
    if (!(t_lo > 0.0 && t_lo < t_hi)) throw ValidationError("time window must satisfy 0 < L < M");
    const double a = base.alpha();
    const int d = base.dim();
    const double c = volume_constant(a, d);
    std::vector<double> out;
    for (double m : masses) {
        if (m < 0.0) throw ValidationError("mass must be nonnegative");
        if (m == 0.0) {
            out.push_back(0.0);
            continue;
        }
        auto gap = [&](double t) {
            const double tol = std::max(1e-2 * opt.zero_tol * std::pow(t, d / a), 1e-15 * c);
            return std::pow(t, -d / a) * difference_at_zero_scaled(a, m * t, d, tol);
        };
        constexpr int n = 33;
        std::vector<double> ts(n), gs(n);
        int best = 0;
        for (int i = 0; i < n; ++i) {
            ts[i] = t_lo * std::pow(t_hi / t_lo, static_cast<double>(i) / (n - 1));
            gs[i] = gap(ts[i]);
            if (gs[i] > gs[best]) best = i;
        }
        double value = gs[best];
        if (best > 0 && best < n - 1) {
            double lo = ts[best - 1], hi = ts[best + 1];
            const double g = 0.5 * (std::sqrt(5.0) - 1.0);
            for (int it = 0; it < 40; ++it) {
                const double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
                if (gap(x1) > gap(x2)) hi = x2;
                else lo = x1;
            }
            value = std::max(value, gap(0.5 * (lo + hi)));
        }
        out.push_back(value);
    }
    return out;
}

// ---------------------------------------------------------------------------

RadialDensityTable RadialDensityTable::build(const ProcessParams& p, double t, const DensityOptions& opt) {
    if (!(t > 0.0)) throw DomainError("time must be positive");
    RadialDensityTable tab(p, t, opt.abs_tol);
    const double a = p.alpha();
    const int d = p.dim();
    const double mu = p.mass() * t;
    const double rscale = std::pow(t, 1.0 / a);
    const double vscale = std::pow(t, -d / a);
    const ProcessParams scaled_params(a, mu, d);

    const double q0 = density_routes::at_zero(a, mu, d, 1e-15 * volume_constant(a, d));
    const double tol = std::min(scaled_tolerance(opt.abs_tol, t, p), 1e-12 * q0);
    tab.radii_.push_back(0.0);
    tab.values_.push_back(vscale * q0);

    const double rho1 = 1e-2;
    const double ratio = std::pow(10.0, 1.0 / kPerDecade);
    double prev = q0;
    for (int i = 0; i < 14 * kPerDecade; ++i) {
        const double rho = rho1 * std::pow(ratio, i);
        std::optional<double> v;
        if (rho >= 1.0) v = density_routes::far_field(a, mu, d, rho);
        double q = v ? *v : density_routes::oscillatory(a, mu, d, rho, tol, opt.max_intervals);
        if (!(q > 0.0)) throw NumericalError("nonpositive density value while building table at rho=" + std::to_string(rho));
        if (q > prev) {
            if (q - prev > 10.0 * tol) throw NumericalError("density table lost radial monotonicity");
            q = prev;
        }
        prev = q;
        tab.radii_.push_back(rscale * rho);
        tab.values_.push_back(vscale * q);
        if (i > kPerDecade && levy_density(scaled_params, rho) < 1e-14 * q0) break;
    }
    tab.finalize();
    return tab;
}

void RadialDensityTable::finalize() {
    const std::size_t n = radii_.size();
    if (n < 4) throw NumericalError("density table too short");
    log_values_.resize(n);
    for (std::size_t i = 0; i < n; ++i) log_values_[i] = std::log(values_[i]);
    log_r1_ = std::log(radii_[1]);
    inv_log_step_ = kPerDecade / std::log(10.0);
    tail_exponent_ = -(log_values_[n - 1] - log_values_[n - 2]) / (std::log(radii_[n - 1]) - std::log(radii_[n - 2]));
}

double RadialDensityTable::operator()(double r) const {
    if (r <= 0.0) return values_[0];
    const double r1 = radii_[1];
    if (r < r1) {
        const double w = (r * r) / (r1 * r1);
        return std::exp((1.0 - w) * log_values_[0] + w * log_values_[1]);
    }
    const double x = (std::log(r) - log_r1_) * inv_log_step_;
    const std::size_t last = radii_.size() - 1;
    if (x >= static_cast<double>(last - 1)) {
        if (r <= radii_[last]) {
            const double w = std::log(r / radii_[last - 1]) / std::log(radii_[last] / radii_[last - 1]);
            return std::exp((1.0 - w) * log_values_[last - 1] + w * log_values_[last]);
        }
        return values_[last] * std::pow(r / radii_[last], -tail_exponent_);
    }
    const auto i = static_cast<std::size_t>(x) + 1;
    const double w = x - static_cast<double>(i - 1);
    return std::exp((1.0 - w) * log_values_[i] + w * log_values_[i + 1]);
}

namespace {

constexpr char kMagic[8] = {'R', 'S', 'D', 'T', 'A', 'B', 'L', 'E'};

std::string hex(double v) {
    std::ostringstream os;
    os << std::hex << std::bit_cast<std::uint64_t>(v);
    return os.str();
}

template <class T>
void put(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw CacheVersionError("truncated density cache file");
    return v;
}

} // namespace

std::string RadialDensityTable::cache_name(const ProcessParams& p, double t, double tol) {
    return "density_v" + std::to_string(kVersion) + "_a" + hex(p.alpha()) + "_m" + hex(p.mass()) + "_d" +
           std::to_string(p.dim()) + "_t" + hex(t) + "_tol" + hex(tol) + ".bin";
}

void RadialDensityTable::save(const std::filesystem::path& file) const {
    const auto tmp = file.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw ValidationError("cannot write density cache " + tmp);
        os.write(kMagic, sizeof kMagic);
        put(os, kVersion);
        put(os, params_.alpha());
        put(os, params_.mass());
        put(os, static_cast<std::int32_t>(params_.dim()));
        put(os, time_);
        put(os, tolerance_);
        put(os, static_cast<std::uint64_t>(radii_.size()));
        os.write(reinterpret_cast<const char*>(radii_.data()), static_cast<std::streamsize>(radii_.size() * sizeof(double)));
        os.write(reinterpret_cast<const char*>(values_.data()), static_cast<std::streamsize>(values_.size() * sizeof(double)));
        put(os, tail_exponent_);
    }
    std::filesystem::rename(tmp, file);
}

RadialDensityTable RadialDensityTable::load(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw ValidationError("cannot open density cache " + file.string());
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw CacheVersionError("not a density cache file: " + file.string());
    const auto version = get<std::uint32_t>(is);
    if (version != kVersion)
        throw CacheVersionError("density cache version " + std::to_string(version) + " does not match " +
                                std::to_string(kVersion) + "; clear the cache directory");
    const double a = get<double>(is), m = get<double>(is);
    const int d = get<std::int32_t>(is);
    const double t = get<double>(is), tol = get<double>(is);
    const auto n = get<std::uint64_t>(is);
    if (n > (1u << 24)) throw CacheVersionError("corrupt density cache size");
    RadialDensityTable tab(ProcessParams(a, m, d), t, tol);
    tab.radii_.resize(n);
    tab.values_.resize(n);
    is.read(reinterpret_cast<char*>(tab.radii_.data()), static_cast<std::streamsize>(n * sizeof(double)));
    is.read(reinterpret_cast<char*>(tab.values_.data()), static_cast<std::streamsize>(n * sizeof(double)));
    tab.tail_exponent_ = get<double>(is);
    tab.finalize();
    return tab;
}

RadialDensityTable RadialDensityTable::cached(const ProcessParams& p, double t, const DensityOptions& opt,
                                              const std::filesystem::path& cache_dir) {
    const auto file = cache_dir / cache_name(p, t, opt.abs_tol);
    if (std::filesystem::exists(file)) {
        auto tab = load(file);
        if (tab.params() == p && tab.time() == t && tab.tolerance() == opt.abs_tol) return tab;
        throw CacheVersionError("density cache key mismatch in " + file.string());
    }
    auto tab = build(p, t, opt);
    std::filesystem::create_directories(cache_dir);
    tab.save(file);
    return tab;
}

// ---------------------------------------------------------------------------

DensityTableSet::DensityTableSet(const ProcessParams& p, double t_max, const DensityOptions& opt,
                                 std::optional<std::filesystem::path> cache_dir)
    : params_(p), t_max_(t_max) {
    if (!(t_max > 0.0)) throw DomainError("table horizon must be positive");
    auto make = [&](double mu) {
        const ProcessParams q(p.alpha(), mu, p.dim());
        return cache_dir ? RadialDensityTable::cached(q, 1.0, opt, *cache_dir) : RadialDensityTable::build(q, 1.0, opt);
    };
    tables_.push_back(make(0.0));
    mus_.push_back(0.0);
    if (p.mass() == 0.0) return;
    const double mu_max = p.mass() * t_max;
    const double mu_floor = std::min(1e-3, mu_max);
    const int per_decade = RadialDensityTable::kPerDecade;
    const int steps = static_cast<int>(std::ceil(per_decade * std::log10(mu_max / mu_floor)));
    mu_first_ = mu_max * std::pow(10.0, -static_cast<double>(steps) / per_decade);
    inv_log_step_ = per_decade / std::log(10.0);
    for (int k = 0; k <= steps; ++k) {
        const double mu = k == steps ? mu_max : mu_first_ * std::pow(10.0, static_cast<double>(k) / per_decade);
        tables_.push_back(make(mu));
        mus_.push_back(mu);
    }
}

double DensityTableSet::scaled(double mu, double rho) const {
    if (tables_.size() == 1) return tables_[0](rho);
    if (mu <= mu_first_) {
        const double w = mu / mu_first_;
        return (1.0 - w) * tables_[0](rho) + w * tables_[1](rho);
    }
    const double x = std::log(mu / mu_first_) * inv_log_step_;
    const std::size_t buckets = tables_.size() - 1;
    std::size_t i = std::min(static_cast<std::size_t>(x), buckets >= 2 ? buckets - 2 : 0);
    if (buckets < 2) return tables_[1](rho);
    const double lo = std::log(mus_[i + 1]), hi = std::log(mus_[i + 2]);
    const double w = std::clamp((std::log(mu) - lo) / (hi - lo), 0.0, 1.0);
    return std::exp((1.0 - w) * std::log(tables_[i + 1](rho)) + w * std::log(tables_[i + 2](rho)));
}

double DensityTableSet::operator()(double s, double r) const {
    if (!(s > 0.0)) throw DomainError("density time must be positive");
    if (s > t_max_ * (1.0 + 1e-12)) throw DomainError("density time beyond the tabulated horizon");
    const double a = params_.alpha();
    const double ia = 1.0 / a;
    return std::pow(s, -params_.dim() * ia) * scaled(params_.mass() * s, r * std::pow(s, -ia));
}

} // namespace rstrace
