#include "doctest.h"

#include <cmath>
#include <numbers>

#include "rstrace/quadrature.hpp"
#include "rstrace/special.hpp"

using namespace rstrace;

TEST_CASE("Bessel J0 and J1 agree with the standard library across all three regimes") {
    for (double x = 0.0; x < 200.0; x += 0.173) {
        CHECK(std::abs(bessel_j0(x) - std::cyl_bessel_j(0.0, x)) < 1e-13);
        CHECK(std::abs(bessel_j1(x) - std::cyl_bessel_j(1.0, x)) < 1e-13);
    }
    CHECK(bessel_j1(-2.0) == doctest::Approx(-std::cyl_bessel_j(1.0, 2.0)));
    CHECK(bessel_j0(-2.0) == doctest::Approx(std::cyl_bessel_j(0.0, 2.0)));
}

TEST_CASE("zeros of J0") {
    CHECK(bessel_j0_zero(1) == doctest::Approx(2.404825557695773).epsilon(1e-14));
    CHECK(bessel_j0_zero(2) == doctest::Approx(5.520078110286311).epsilon(1e-14));
    for (int k : {1, 3, 10, 100, 4000, 5000}) CHECK(std::abs(std::cyl_bessel_j(0.0, bessel_j0_zero(k))) < 1e-12);
    CHECK_THROWS(bessel_j0_zero(0));
}

TEST_CASE("radial kernels and their zeros") {
    CHECK(radial_kernel(1, 0.3) == doctest::Approx(std::cos(0.3)));
    CHECK(radial_kernel(3, 0.3) == doctest::Approx(std::sin(0.3) / 0.3));
    CHECK(radial_kernel(3, 0.0) == 1.0);
    for (int d = 1; d <= 3; ++d)
        for (int k = 1; k < 20; ++k) CHECK(std::abs(radial_kernel(d, radial_kernel_zero(d, k))) < 1e-12);
}

TEST_CASE("unit sphere measure") {
    CHECK(sphere_area(1) == doctest::Approx(2.0));
    CHECK(sphere_area(2) == doctest::Approx(2.0 * std::numbers::pi));
    CHECK(sphere_area(3) == doctest::Approx(4.0 * std::numbers::pi));
}

TEST_CASE("adaptive quadrature") {
    auto r = integrate([](double x) { return std::exp(-x * x); }, -10.0, 10.0);
    CHECK(r.value == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-13));
    CHECK(r.error < 1e-9);
    auto s = integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, {1e-10, 1e-10, 4000});
    CHECK(s.value == doctest::Approx(2.0).epsilon(1e-9));
    auto inf = integrate_to_infinity([](double x) { return 1.0 / (1.0 + x * x); }, 0.0, 1.0);
    CHECK(inf.value == doctest::Approx(std::numbers::pi / 2).epsilon(1e-12));
    CHECK_THROWS_AS(integrate([](double x) { return std::sin(1.0 / x); }, 1e-300, 1.0, {1e-15, 1e-15, 20}),
                    QuadratureError);
}

TEST_CASE("Gauss-Legendre is exact for polynomials of degree 2n-1") {
    GaussLegendre gl(6);
    CHECK(gl([](double x) { return std::pow(x, 11) + x * x; }, 0.0, 2.0) ==
          doctest::Approx(std::pow(2.0, 12) / 12 + 8.0 / 3).epsilon(1e-13));
    GaussLegendre one(1);
    CHECK(one([](double x) { return 3 * x + 1; }, 0.0, 1.0) == doctest::Approx(2.5));
}

TEST_CASE("epsilon acceleration of an alternating series") {
    EpsilonAccelerator acc;
    double s = 0.0;
    for (int k = 1; k <= 20; ++k) {
        s += (k % 2 ? 1.0 : -1.0) / k;
        acc.push(s);
    }
    CHECK(acc.estimate() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}
