#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "rstrace/errors.hpp"
#include "rstrace/levy.hpp"
#include "rstrace/quadrature.hpp"
#include "rstrace/special.hpp"

using namespace rstrace;

namespace {
constexpr double kPi = std::numbers::pi;

double psi_closed(double nu, double r) {
    if (r == 0.0) return 1.0;
    return std::pow(2.0, 1.0 - nu) * std::pow(r, nu) * std::cyl_bessel_k(nu, r) / std::tgamma(nu);
}
} // namespace

TEST_CASE("psi against the Bessel-K closed form") {
    for (double nu : {0.75, 1.0, 1.5, 1.7, 2.0, 2.45})
        for (double r : {0.0, 1e-3, 0.05, 0.4, 0.99, 1.0, 2.5, 7.0, 20.0, 60.0}) {
            CAPTURE(nu);
            CAPTURE(r);
            CHECK(psi({nu}, r) == doctest::Approx(psi_closed(nu, r)).epsilon(1e-10));
        }
    CHECK(psi({1.5}, 0.0) == 1.0);
    CHECK_THROWS_AS(psi({1.5}, -1.0), DomainError);
}

TEST_CASE("psi at r = 1 for d = 2, alpha = 1 against a brute integral") {
    auto f = [](double s) { return std::sqrt(s) * std::exp(-s / 4 - 1.0 / s); };
    const double brute = integrate_to_infinity(f, 0.0, 4.0, {1e-15, 1e-14, 4000}).value / (8.0 * std::tgamma(1.5));
    CHECK(psi(PsiProfile::for_params(ProcessParams(1, 1, 2)), 1.0) == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("psi is strictly decreasing and 1 - psi is accurate near 0") {
    const PsiProfile prof{1.5};
    double prev = 1.0;
    for (double r = 1e-3; r < 30.0; r *= 1.3) {
        const double v = psi(prof, r);
        CHECK(v < prev);
        CHECK(v > 0.0);
        prev = v;
    }
    // nu = 1.5: 1 - psi(r) = 1 - (1 + r) e^{-r} exactly.
    for (double r : {1e-6, 1e-4, 0.01, 0.3}) {
        const double exact = -std::expm1(-r) - r * std::exp(-r);
        CHECK(one_minus_psi(prof, r) == doctest::Approx(exact).epsilon(1e-9));
    }
}

TEST_CASE("psi envelope on [1, 10] is stable under refinement") {
    for (int d : {1, 2, 3})
        for (double a : {0.5, 1.0, 1.6}) {
            const auto prof = PsiProfile::for_params(ProcessParams(a, 1, d));
            auto range = [&](int n) {
                double lo = 1e300, hi = 0.0;
                for (int i = 0; i <= n; ++i) {
                    const double r = 1.0 + 9.0 * i / n;
                    const double q = psi(prof, r) / (std::exp(-r) * std::pow(r, 0.5 * (d + a - 1)));
                    lo = std::min(lo, q);
                    hi = std::max(hi, q);
                }
                return hi / lo;
            };
            const double c1 = range(20), c2 = range(80);
            CHECK(std::isfinite(c1));
            CHECK(std::abs(c2 - c1) / c1 < 0.02);
        }
}

TEST_CASE("Levy density") {
    CHECK(levy_constant(2, 1.0) == doctest::Approx(1.0 / (2 * kPi)).epsilon(1e-14));
    const ProcessParams p0(1.3, 0.0, 2), p1(1.3, 2.0, 2);
    CHECK(levy_density(p0, 0.7) == doctest::Approx(levy_constant(2, 1.3) * std::pow(0.7, -3.3)));
    for (double r = 1e-3; r < 100.0; r *= 1.4) CHECK(levy_density(p1, r) <= levy_density(p0, r));
    CHECK_THROWS_AS(levy_density(p0, 0.0), DomainError);
}

TEST_CASE("sigma mass equals m") {
    for (double a : {0.6, 1.0, 1.4})
        for (double m : {0.0, 0.5, 1.0, 2.5}) {
            CAPTURE(a);
            CAPTURE(m);
            CHECK(std::abs(sigma_mass(ProcessParams(a, m, 2)) - m) <= 1e-6);
        }
    CHECK(std::abs(sigma_mass(ProcessParams(0.7, 2.5, 2)) - 2.5) <= 1e-6);
    // Integer orders (nu = 1 and nu = 2) take the quadrature branch.
    CHECK(std::abs(sigma_mass(ProcessParams(1.0, 1.0, 1)) - 1.0) <= 1e-6);
    CHECK(std::abs(sigma_mass(ProcessParams(1.0, 1.0, 3)) - 1.0) <= 1e-6);
    CHECK(std::abs(sigma_mass(ProcessParams(1.5, 0.3, 3)) - 0.3) <= 1e-6);
}

TEST_CASE("ray tail of the Levy density") {
    CHECK(LevyTail(ProcessParams(1.2, 0, 2))(0.5) == doctest::Approx(levy_constant(2, 1.2) * std::pow(0.5, -1.2) / 1.2));
    for (double m : {0.3, 1.0, 4.0}) {
        const ProcessParams p(1.2, m, 2);
        const LevyTail g(p);
        for (double rho : {1e-4, 0.01, 0.2, 1.0, 3.0}) {
            auto f = [&](double s) { return levy_density(p, s) * s; };
            const double want = integrate_to_infinity(f, rho, rho, {1e-300, 1e-11, 4000}).value;
            CAPTURE(m);
            CAPTURE(rho);
            CHECK(g(rho) == doctest::Approx(want).epsilon(1e-6));
        }
    }
}

TEST_CASE("killing rate") {
    const ProcessParams p0(1.0, 0.0, 2);
    CHECK(killing_rate(p0, Domain::plane(), Point(3, 4)) == 0.0);

    SUBCASE("half-space scaling and closed form") {
        for (double a : {0.6, 1.0, 1.5}) {
            const ProcessParams p(a, 0.0, 2);
            const double closed = levy_constant(2, a) / a * std::sqrt(kPi) * std::tgamma(0.5 * (a + 1)) / std::tgamma(0.5 * a + 1);
            for (double d : {0.1, 0.2, 0.4}) CHECK(killing_rate(p, Domain::half_space(), Point(d, 7.0)) * std::pow(d, a) == doctest::Approx(closed).epsilon(1e-8));
        }
    }
    SUBCASE("half-space with mass against a direct double integral") {
        const ProcessParams p(1.2, 1.5, 2);
        const double d = 0.3;
        auto inner = [&](double u) {
            auto f = [&](double v) { return 2.0 * levy_density(p, std::hypot(u, v)); };
            return integrate_to_infinity(f, 0.0, u, {1e-300, 1e-9, 2000}).value;
        };
        const double want = integrate_to_infinity(inner, d, d, {1e-300, 1e-8, 2000}).value;
        CHECK(killing_rate(p, Domain::half_space(), Point(d, 0)) == doctest::Approx(want).epsilon(1e-6));
    }
    SUBCASE("disk center is 2 pi G(R)") {
        const double a = 1.0;
        CHECK(killing_rate(p0, Domain::disk(1.0), Point(0, 0)) == doctest::Approx(2 * kPi * levy_constant(2, a) / a).epsilon(1e-10));
    }
    SUBCASE("disk off-centre against Monte Carlo integration over the complement") {
        const Domain disk = Domain::disk(1.0);
        const Point x(0.3, 0.2);
        const double big = 20.0;
        std::mt19937_64 rng(12345);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const int n = 2'000'000;
        double s = 0.0, s2 = 0.0;
        for (int i = 0; i < n; ++i) {
            Point y(u(rng), u(rng));
            double v = 0.0;
            if (y.squaredNorm() < 1.0) {
                y = x + big * y;
                if (!disk.contains(y)) v = levy_density(p0, (y - x).norm());
            }
            s += v;
            s2 += v * v;
        }
        const double vol = 4.0 * big * big;
        const double mean = vol * s / n;
        const double se = vol * std::sqrt((s2 / n - (s / n) * (s / n)) / n);
        const double tail = 2 * kPi * levy_constant(2, 1.0) / big;
        const double got = killing_rate(p0, disk, x);
        CHECK(std::abs(got - (mean + tail)) < 3.0 * se);
        CHECK(se < 0.01 * got);
    }
    SUBCASE("monotone along a radius and consistent between rectangle and polygon") {
        const ProcessParams p(1.4, 0.7, 2);
        const Domain disk = Domain::disk(1.0);
        double prev = 1e300;
        for (double r = 0.99; r >= 0.0; r -= 0.07) {
            const double k = killing_rate(p, disk, Point(r, 0));
            CHECK(k < prev);
            prev = k;
        }
        const Domain rect = Domain::rectangle(2, 1);
        const Domain poly = Domain::polygon({Point(0, 0), Point(2, 0), Point(2, 1), Point(0, 1)});
        for (const Point& x : {Point(0.3, 0.2), Point(1.0, 0.5), Point(1.99, 0.01)})
            CHECK(killing_rate(p, rect, x) == doctest::Approx(killing_rate(p, poly, x)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(killing_rate(p0, Domain::disk(1.0), Point(1.0, 0.0)), DomainError);
    CHECK_THROWS_AS(killing_rate(ProcessParams(1, 0, 3), Domain::disk(1.0), Point(0, 0)), ValidationError);
}
