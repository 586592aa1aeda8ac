#include "rstrace/special.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "rstrace/errors.hpp"

namespace rstrace {

namespace {

constexpr double kPi = std::numbers::pi;

// Ascending series, accumulated in long double; fine while x^2/4 stays small.
double series_j(int n, double x) {
    const long double q = -0.25L * static_cast<long double>(x) * x;
    long double term = n == 0 ? 1.0L : 0.5L * x;
    long double sum = term;
    for (int k = 1; k < 200; ++k) {
        term *= q / (static_cast<long double>(k) * (k + n));
        sum += term;
        if (std::abs(term) < 1e-21L * std::abs(sum)) break;
    }
    return static_cast<double>(sum);
}

// Bessel's integral, trapezoid on the full period (spectrally accurate).
double integral_j(int n, double x) {
    constexpr int m = 96;
    double s = 0.0;
    for (int i = 0; i < m; ++i) {
        const double th = 2.0 * kPi * i / m;
        s += std::cos(n * th - x * std::sin(th));
    }
    return s / m;
}

// Hankel asymptotic expansion.
double asymptotic_j(int n, double x) {
    const double mu = 4.0 * n * n;
    double p = 1.0, q = 0.0;
    double term = 1.0;
    double last = 1.0;
    for (int k = 1; k < 60; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= (mu - odd * odd) / (k * 8.0 * x);
        if (std::abs(term) > last) break;
        last = std::abs(term);
        switch (k % 4) {
        case 1: q += term; break;
        case 2: p -= term; break;
        case 3: q -= term; break;
        default: p += term; break;
        }
        if (last < 1e-17) break;
    }
    const double chi = x - (2.0 * n + 1.0) * kPi / 4.0;
    return std::sqrt(2.0 / (kPi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

double bessel_j(int n, double x) {
    const double ax = std::abs(x);
    double v;
    if (ax < 8.0) v = series_j(n, ax);
    else if (ax < 25.0) v = integral_j(n, ax);
    else v = asymptotic_j(n, ax);
    return (n == 1 && x < 0.0) ? -v : v;
}

double mcmahon_j0(int k) {
    const double b = (k - 0.25) * kPi;
    const double ib = 1.0 / (8.0 * b);
    const double ib2 = ib * ib;
    return b + ib * (1.0 - ib2 * (124.0 / 3.0 - ib2 * 120928.0 / 15.0));
}

double polish_j0_zero(double x) {
    for (int it = 0; it < 8; ++it) {
        const double dx = bessel_j0(x) / bessel_j1(x);
        x += dx;
        if (std::abs(dx) < 1e-15 * x) break;
    }
    return x;
}

const std::vector<double>& j0_zero_table() {
    static const std::vector<double> table = [] {
        std::vector<double> z(4096);
        for (int k = 1; k <= 4096; ++k) z[k - 1] = polish_j0_zero(mcmahon_j0(k));
        return z;
    }();
    return table;
}

} // namespace

double bessel_j0(double x) { return bessel_j(0, x); }
double bessel_j1(double x) { return bessel_j(1, x); }

double bessel_j0_zero(int k) {
    if (k < 1) throw DomainError("Bessel zero index must be >= 1");
    const auto& t = j0_zero_table();
    if (k <= static_cast<int>(t.size())) return t[k - 1];
    return mcmahon_j0(k);
}

double sphere_area(int d) {
    return 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d);
}

double radial_kernel(int d, double x) {
    switch (d) {
    case 1: return std::cos(x);
    case 2: return bessel_j0(x);
    case 3: return std::abs(x) < 1e-4 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
    default: throw ValidationError("dimension must be 1, 2 or 3");
    }
}

double radial_kernel_zero(int d, int k) {
    switch (d) {
    case 1: return (k - 0.5) * kPi;
    case 2: return bessel_j0_zero(k);
    case 3: return k * kPi;
    default: throw ValidationError("dimension must be 1, 2 or 3");
    }
}

} // namespace rstrace
