#include "rstrace/levy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "rstrace/errors.hpp"
#include "rstrace/quadrature.hpp"
#include "rstrace/special.hpp"

namespace rstrace {

namespace {

constexpr double kPi = std::numbers::pi;

double psi_norm(double nu) { return std::exp(-2.0 * nu * std::log(2.0) - std::lgamma(nu)); }

// int_0^inf s^{nu-1} e^{-s/4} w(s) ds over doubling pieces.
template <class W>
double gamma_weighted(double nu, W&& w, double tol) {
    auto f = [&](double s) { return s == 0.0 ? 0.0 : std::exp((nu - 1.0) * std::log(s) - 0.25 * s) * w(s); };
    QuadOptions opt{tol, tol, 2000};
    double total = integrate(f, 0.0, 1.0, opt).value;
    for (double lo = 1.0; lo < 4.0 * nu + 400.0; lo *= 2.0) total += integrate(f, lo, 2.0 * lo, opt).value;
    return total;
}

double psi_large(double nu, double r, double tol) {
    // s = r u; the exponent r(u/4 + 1/u) has its minimum r at u = 2.
    auto f = [&](double u) {
        if (u <= 0.0) return 0.0;
        return std::exp((nu - 1.0) * std::log(u) - r * (u - 2.0) * (u - 2.0) / (4.0 * u));
    };
    QuadOptions opt{tol, tol, 2000};
    const double w = std::max(0.05, 4.0 / std::sqrt(r));
    double total = integrate(f, 0.0, 2.0, opt).value + integrate(f, 2.0, 2.0 + 4.0 * w, opt).value;
    total += integrate_to_infinity(f, 2.0 + 4.0 * w, 4.0 * w + 2.0, opt).value;
    return psi_norm(nu) * std::exp(nu * std::log(r) - r) * total;
}

// Term-by-term integral of u^{-1-alpha}(1 - psi(u)) over (0, u0] from the
// ascending expansion of x^nu K_nu(x); nu must be away from the integers.
double small_u_integral_series(double nu, double alpha, double u0) {
    const double g = std::tgamma(1.0 - nu);
    const double h = 0.5 * u0;
    double total = 0.0;
    for (int k = 0; k < 60; ++k) {
        double term = 0.0;
        if (k >= 1)
            term -= g * std::pow(h, 2 * k) / (std::tgamma(k + 1.0) * std::tgamma(k - nu + 1.0)) * std::pow(u0, -alpha) /
                    (2.0 * k - alpha);
        term += g * std::pow(h, 2.0 * nu + 2 * k) / (std::tgamma(k + 1.0) * std::tgamma(k + nu + 1.0)) *
                std::pow(u0, -alpha) / (2.0 * nu + 2 * k - alpha);
        total += term;
        if (k > 2 && std::abs(term) < 1e-18 * std::abs(total)) break;
    }
    return total;
}

} // namespace

double psi(const PsiProfile& prof, double r) {
    if (!(r >= 0.0)) throw DomainError("psi needs r >= 0");
    if (r == 0.0) return 1.0;
    const double nu = prof.order;
    if (r >= 1.0) return psi_large(nu, r, prof.tolerance);
    const double r2 = r * r;
    return psi_norm(nu) * gamma_weighted(nu, [&](double s) { return std::exp(-r2 / s); }, prof.tolerance);
}

double one_minus_psi(const PsiProfile& prof, double r) {
    if (!(r >= 0.0)) throw DomainError("psi needs r >= 0");
    if (r == 0.0) return 0.0;
    if (r >= 1.0) return 1.0 - psi(prof, r);
    const double r2 = r * r;
    const double tol = prof.tolerance * std::min(1.0, r2);
    return psi_norm(prof.order) * gamma_weighted(prof.order, [&](double s) { return -std::expm1(-r2 / s); }, tol);
}

double levy_constant(int dim, double alpha) {
    return alpha * std::pow(2.0, alpha - 1.0) * std::pow(kPi, -0.5 * dim) * std::tgamma(0.5 * (dim + alpha)) /
           std::tgamma(1.0 - 0.5 * alpha);
}

double levy_density(const ProcessParams& p, double r) {
    if (!(r > 0.0)) throw DomainError("Levy density is singular at r = 0");
    const double base = levy_constant(p.dim(), p.alpha()) * std::pow(r, -p.dim() - p.alpha());
    if (p.mass() == 0.0) return base;
    return base * psi(PsiProfile::for_params(p), p.mass_scale() * r);
}

double sigma_mass(const ProcessParams& p) {
    if (p.mass() == 0.0) return 0.0;
    const double a = p.alpha();
    const auto prof = PsiProfile::for_params(p);
    const double nu = prof.order;
    constexpr double u0 = 0.5;
    double head;
    if (std::abs(nu - std::round(nu)) > 0.05) {
        head = small_u_integral_series(nu, a, u0);
    } else {
        auto f = [&](double u) { return u == 0.0 ? 0.0 : std::pow(u, -1.0 - a) * one_minus_psi(prof, u); };
        head = integrate(f, 0.0, u0, {1e-14, 1e-13, 4000}).value;
    }
    // Beyond u0: u^{-1-a}(1 - psi) = u^{-1-a} - u^{-1-a} psi, the first part in closed form.
    auto g = [&](double u) { return std::pow(u, -1.0 - a) * psi(prof, u); };
    double tail = integrate(g, u0, 1.0, {1e-14, 1e-13, 4000}).value;
    for (double lo = 1.0; lo < 200.0; lo *= 2.0) tail += integrate(g, lo, 2.0 * lo, {1e-15, 1e-13, 4000}).value;
    const double h0 = head + std::pow(u0, -a) / a - tail;
    return p.mass() * sphere_area(p.dim()) * levy_constant(p.dim(), a) * h0;
}

// ---------------------------------------------------------------------------

PsiTable::PsiTable(const PsiProfile& prof, double r_max)
    : prof_(prof), r_min_(1e-4), r_max_(r_max), log_r_min_(std::log(1e-4)) {
    constexpr int per_decade = 400;
    inv_step_ = per_decade / std::log(10.0);
    const int n = static_cast<int>(std::ceil(per_decade * std::log10(r_max_ / r_min_))) + 1;
    log_psi_.resize(n);
    for (int i = 0; i < n; ++i) log_psi_[i] = std::log(psi(prof_, std::exp(log_r_min_ + i / inv_step_)));
}

double PsiTable::operator()(double r) const {
    if (r < r_min_ || r >= r_max_) return psi(prof_, r);
    const double x = (std::log(r) - log_r_min_) * inv_step_;
    const auto i = std::min(static_cast<std::size_t>(x), log_psi_.size() - 2);
    const double w = x - static_cast<double>(i);
    return std::exp((1.0 - w) * log_psi_[i] + w * log_psi_[i + 1]);
}

// ---------------------------------------------------------------------------

struct LevyTail::Table {
    double alpha;
    double y_min = 1e-6, y_max = 80.0, log_y_min, inv_step;
    double h_min;  // int_{y_min}^inf u^{-1-alpha}(1 - psi) du
    std::vector<double> log_phi, slope;  // slope = d log phi / d log y = alpha - psi / phi

    Table(double a, int dim) : alpha(a) {
        log_y_min = std::log(y_min);
        constexpr int per_decade = 200;
        inv_step = per_decade / std::log(10.0);
        const int n = static_cast<int>(std::ceil(per_decade * std::log10(y_max / y_min))) + 1;
        const PsiProfile prof{0.5 * (dim + a)};
        const GaussLegendre gl(8);
        std::vector<double> ys(n), piece_h(n, 0.0), piece_q(n, 0.0);
        for (int i = 0; i < n; ++i) ys[i] = std::exp(log_y_min + i / inv_step);
        for (int i = 0; i + 1 < n; ++i) {
            const double lo = std::log(ys[i]), hi = std::log(ys[i + 1]);
            for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
                const double u = std::exp(0.5 * (lo + hi) + 0.5 * (hi - lo) * gl.nodes[k]);
                const double w = 0.5 * (hi - lo) * gl.weights[k] * std::pow(u, -a);  // du/u absorbed
                piece_h[i] += w * one_minus_psi(prof, u);
                piece_q[i] += w * psi(prof, u);
            }
        }
        log_phi.resize(n);
        slope.resize(n);
        y_max = ys[n - 1];
        double hsum = std::pow(y_max, -a) / a;  // psi(y_max) is below e^{-70}
        double qsum = 0.0;
        for (int i = n - 1; i >= 0; --i) {
            const double ya = std::pow(ys[i], a);
            const double ph = ys[i] <= 1.0 ? 1.0 / a - ya * hsum : ya * qsum;
            log_phi[i] = std::log(std::max(ph, 1e-300));
            slope[i] = a - psi(prof, ys[i]) / std::max(ph, 1e-300);
            if (i > 0) {
                hsum += piece_h[i - 1];
                qsum += piece_q[i - 1];
            }
        }
        h_min = hsum;
    }
};

LevyTail::LevyTail(const ProcessParams& p) : params_(p), a_const_(levy_constant(p.dim(), p.alpha())) {
    if (p.dim() != 2) throw ValidationError("killing rates are implemented for planar domains (d = 2)");
    if (p.mass() == 0.0) return;
    static std::mutex mu;
    static std::map<std::pair<double, int>, std::shared_ptr<const Table>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{p.alpha(), p.dim()}];
    if (!slot) slot = std::make_shared<const Table>(p.alpha(), p.dim());
    table_ = slot;
}

double LevyTail::phi(double y) const {
    const Table& t = *table_;
    const double a = t.alpha;
    if (y <= 0.0) return 1.0 / a;
    if (y < t.y_min) return 1.0 / a - std::pow(y, a) * t.h_min;
    if (y >= t.y_max) return 0.0;
    const double x = (std::log(y) - t.log_y_min) * t.inv_step;
    const auto i = std::min(static_cast<std::size_t>(x), t.log_phi.size() - 2);
    const double w = x - static_cast<double>(i);
    const double h = 1.0 / t.inv_step;
    const double w2 = w * w, w3 = w2 * w;
    const double v = (2 * w3 - 3 * w2 + 1) * t.log_phi[i] + (w3 - 2 * w2 + w) * h * t.slope[i] +
                     (-2 * w3 + 3 * w2) * t.log_phi[i + 1] + (w3 - w2) * h * t.slope[i + 1];
    return std::exp(v);
}

double LevyTail::operator()(double rho) const {
    if (!std::isfinite(rho)) return 0.0;
    if (!(rho > 0.0)) throw DomainError("exterior distance must be positive");
    const double a = params_.alpha();
    const double base = a_const_ * std::pow(rho, -a);
    if (params_.mass() == 0.0) return base / a;
    return base * phi(params_.mass_scale() * rho);
}

// ---------------------------------------------------------------------------

KillingRate::KillingRate(const ProcessParams& p) : tail_(p) {}

double KillingRate::operator()(const Domain& d, const Point& x) const {
    if (d.kind() == DomainKind::Plane) return 0.0;
    if (!d.contains(x)) throw DomainError("killing rate needs x strictly inside the domain");
    auto br = d.angular_breakpoints(x);
    const double two_pi = 2.0 * kPi;
    const double start = br.empty() ? 0.0 : br[0];
    std::vector<double> cuts;
    for (double b : br) cuts.push_back(start + std::fmod(std::fmod(b - start, two_pi) + two_pi, two_pi));
    cuts.push_back(start);
    cuts.push_back(start + two_pi);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    auto f = [&](double th) { return tail_(d.ray_exit(x, Point(std::cos(th), std::sin(th)))); };
    double total = 0.0;
    const QuadOptions opt{1e-300, 1e-11, 2000};
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        if (cuts[i + 1] > cuts[i]) total += integrate(f, cuts[i], cuts[i + 1], opt).value;
    return total;
}

double killing_rate(const ProcessParams& p, const Domain& d, const Point& x) { return KillingRate(p)(d, x); }

} // namespace rstrace
