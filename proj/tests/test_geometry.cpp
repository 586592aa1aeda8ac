#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "rstrace/errors.hpp"
#include "rstrace/geometry.hpp"

using namespace rstrace;

namespace {
constexpr double kPi = std::numbers::pi;

// Boundary split into smooth pieces, each parametrised by s in [0, 1].
struct Boundary {
    int pieces;
    std::function<Point(int, double)> at;
};

Boundary boundary_of(const Domain& d) {
    if (d.kind() == DomainKind::Disk)
        return {1, [c = d.center(), r = d.radius()](int, double s) { return Point(c + r * Point(std::cos(2 * kPi * s), std::sin(2 * kPi * s))); }};
    const auto v = d.vertices();
    return {static_cast<int>(v.size()), [v](int i, double s) { return Point((1 - s) * v[i] + s * v[(i + 1) % v.size()]); }};
}

// Dense sampling of every piece, then golden-section refinement around each sampled local minimum.
double brute_distance(const Boundary& b, const Point& x, int samples) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double best = 1e300;
    std::vector<double> ds(samples + 1);
    for (int p = 0; p < b.pieces; ++p) {
        auto dist = [&](double s) { return (b.at(p, s) - x).norm(); };
        for (int k = 0; k <= samples; ++k) ds[k] = dist(static_cast<double>(k) / samples);
        for (int k = 0; k <= samples; ++k) {
            if ((k > 0 && ds[k] > ds[k - 1]) || (k < samples && ds[k] > ds[k + 1])) continue;
            double lo = std::max(0.0, (k - 1.0) / samples), hi = std::min(1.0, (k + 1.0) / samples);
            for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
                const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
                if (dist(m1) < dist(m2)) hi = m2; else lo = m1;
            }
            best = std::min({best, ds[k], dist(0.5 * (lo + hi))});
        }
    }
    return best;
}
} // namespace

TEST_CASE("domain invariants") {
    const Domain disk = Domain::disk(1.5);
    CHECK(disk.area() == doctest::Approx(kPi * 2.25));
    CHECK(disk.perimeter() == doctest::Approx(3 * kPi));
    REQUIRE(disk.c11().has_value());
    CHECK(disk.c11()->r0 == 1.5);
    const Domain rect = Domain::rectangle(2, 1);
    CHECK(rect.area() == doctest::Approx(2.0));
    CHECK(rect.perimeter() == doctest::Approx(6.0));
    CHECK_FALSE(rect.c11().has_value());
    const Domain tri = Domain::polygon({Point(0, 0), Point(3, 0), Point(0, 4)});
    CHECK(tri.area() == doctest::Approx(6.0));
    CHECK(tri.perimeter() == doctest::Approx(12.0));
    CHECK(tri.inradius() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK_THROWS_AS(Domain::polygon({Point(0, 0), Point(0, 4), Point(3, 0)}), GeometryError);
    CHECK_THROWS_AS(Domain::polygon({Point(0, 0), Point(2, 0), Point(1, 0.1), Point(2, 2), Point(0, 2)}), GeometryError);
    CHECK_THROWS_AS(Domain::disk(-1.0), GeometryError);
    CHECK_THROWS(Domain::half_space().area());
    CHECK(Domain::parse("disk:2,1,1").spec() == Domain::disk(2, Point(1, 1)).spec());
    CHECK(Domain::parse(rect.spec()).area() == doctest::Approx(2.0));
    CHECK(Domain::parse(tri.spec()).perimeter() == doctest::Approx(12.0));
    CHECK_THROWS_AS(Domain::parse("ellipse:1,2"), ValidationError);
}

TEST_CASE("distance to the complement") {
    CHECK(distance_to_complement(Domain::disk(1.0), Point(0, 0)) == 1.0);
    CHECK(distance_to_complement(Domain::rectangle(2, 1), Point(0.3, 0.2)) == doctest::Approx(0.2));
    CHECK(distance_to_complement(Domain::half_space(), Point(0.37, -12.0)) == 0.37);
    CHECK(distance_to_complement(Domain::disk(1.0), Point(2, 0)) == 0.0);
    CHECK(std::isinf(distance_to_complement(Domain::plane(), Point(1, 1))));

    const std::vector<Domain> kinds = {Domain::disk(1.3, Point(0.2, -0.4)), Domain::rectangle(2, 1),
                                       Domain::polygon({Point(0, 0), Point(2, -0.5), Point(3, 1), Point(1.5, 2.5), Point(-0.5, 1.5)})};
    std::mt19937_64 rng(7);
    for (const Domain& d : kinds) {
        const Boundary b = boundary_of(d);
        const auto [lo, hi] = d.bounding_box();
        std::uniform_real_distribution<double> ux(lo.x(), hi.x()), uy(lo.y(), hi.y());
        int checked = 0;
        double worst = 0.0;
        while (checked < 10000) {
            const Point x(ux(rng), uy(rng));
            if (!d.contains(x)) continue;
            worst = std::max(worst, std::abs(d.distance_to_complement(x) - brute_distance(b, x, d.kind() == DomainKind::Disk ? 400 : 100)));
            ++checked;
        }
        CAPTURE(d.spec());
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("ray exit and angular breakpoints") {
    const Domain disk = Domain::disk(1.0);
    const Point x(0.5, 0.0);
    CHECK(disk.ray_exit(x, Point(1, 0)) == doctest::Approx(0.5));
    CHECK(disk.ray_exit(x, Point(-1, 0)) == doctest::Approx(1.5));
    CHECK(disk.ray_exit(x, Point(0, 1)) == doctest::Approx(std::sqrt(0.75)));
    const Domain rect = Domain::rectangle(2, 1);
    CHECK(rect.ray_exit(Point(0.5, 0.5), Point(1, 0)) == doctest::Approx(1.5));
    CHECK(rect.ray_exit(Point(0.5, 0.5), Point(std::sqrt(0.5), std::sqrt(0.5))) == doctest::Approx(std::sqrt(0.5)));
    CHECK(rect.angular_breakpoints(Point(0.5, 0.5)).size() == 4);
    CHECK(Domain::half_space().ray_exit(Point(0.2, 0), Point(0, 1)) == std::numeric_limits<double>::infinity());
}

TEST_CASE("inner domains") {
    const Domain disk = Domain::disk(1.0);
    CHECK(inner_boundary_measure(disk, 0.0) == doctest::Approx(2 * kPi));
    const double b25 = inner_boundary_measure(disk, 0.25);
    CHECK(b25 == doctest::Approx(1.5 * kPi));
    CHECK(b25 >= 0.75 * 2 * kPi);
    CHECK(b25 <= (4.0 / 3.0) * 2 * kPi);
    const double b50 = inner_boundary_measure(disk, 0.5);
    CHECK(b50 == doctest::Approx(kPi));
    CHECK(std::abs(b50 - 2 * kPi) <= 4.0 * 2.0 * 0.5 * 2 * kPi);
    CHECK(b50 >= 0.5 * 2 * kPi);  // 2^{-d+1} |dD|
    CHECK_THROWS_AS(inner_boundary_measure(Domain::rectangle(2, 1), 0.1), GeometryError);
    CHECK_THROWS_AS(inner_boundary_measure(disk, 1.0), GeometryError);

    const InnerDomain d0(disk, 0.0), dq(disk, 0.3);
    CHECK(d0.area() == doctest::Approx(kPi));
    CHECK(dq.area() == doctest::Approx(kPi * 0.49));
    CHECK(dq.contains(Point(0.69, 0)));
    CHECK_FALSE(dq.contains(Point(0.71, 0)));

    // Convex polygon offsets: P(q) = P - 2q sum cot(theta_i / 2) before any edge collapses.
    const std::vector<Point> tri = {Point(0, 0), Point(3, 0), Point(0, 4)};
    const auto inner = inner_parallel_polygon(tri, 0.4);
    CHECK(polygon_perimeter(inner) == doctest::Approx(12.0 * 0.6).epsilon(1e-12));
    CHECK(polygon_area(inner) == doctest::Approx(6.0 * 0.36).epsilon(1e-12));
    CHECK(inner_parallel_polygon(tri, 1.0).empty());
    const Domain rect = Domain::rectangle(2, 1);
    CHECK(rect.inner_perimeter(0.1) == doctest::Approx(6 - 8 * 0.1));
    CHECK(rect.inner_area(0.1) == doctest::Approx(1.8 * 0.8));
}

TEST_CASE("boundary layer functional: closed-form shells") {
    auto ind = [](double r) { return r < 1.0 ? 1.0 : 0.0; };
    CHECK(boundary_layer_functional(Domain::disk(1.0), ind, 0.1, {1.0}) == doctest::Approx(1.9 * kPi).epsilon(1e-10));
    CHECK(boundary_layer_functional(Domain::rectangle(2, 1), ind, 0.01, {1.0}) == doctest::Approx(6 - 4 * 0.01).epsilon(1e-10));
}

TEST_CASE("boundary layer functional: exponential profile on the disk") {
    // (1/eta) int_0^1 e^{-u/eta} 2 pi (1 - u) du in closed form.
    auto exact = [](double eta) {
        const double e = std::exp(-1.0 / eta);
        return 2 * kPi * ((1 - e) - eta * (1 - e) + e);
    };
    auto f = [](double r) { return std::exp(-r); };
    double prev_err = 1e300;
    for (double eta : {0.1, 0.05, 0.02}) {
        const double v = boundary_layer_functional(Domain::disk(1.0), f, eta);
        CHECK(v == doctest::Approx(exact(eta)).epsilon(1e-9));
        const double err = std::abs(v - 2 * kPi);
        CHECK(err < prev_err);
        prev_err = err;
    }
    // The gap is eta (1 - e^{-1/eta}): 2% at eta = 0.02 up to rounding.
    CHECK(prev_err / (2 * kPi) == doctest::Approx(0.02).epsilon(1e-9));
}

TEST_CASE("boundary layer limit: perimeter times the profile integral") {
    // Offsets of convex domains shrink linearly, |dD_q| = |dD| - c q, so for profiles with
    // int r f(r) dr finite the relative gap is c eta int r f / |dD| to first order.
    struct Kind {
        Domain d;
        double c;
    };
    const std::vector<Point> pent = {Point(0, 0), Point(2, -0.5), Point(3, 1), Point(1.5, 2.5), Point(-0.5, 1.5)};
    double cot_sum = 0.0;
    for (std::size_t i = 0; i < pent.size(); ++i) {
        const Point a = pent[(i + pent.size() - 1) % pent.size()] - pent[i], b = pent[(i + 1) % pent.size()] - pent[i];
        const double theta = std::acos(a.dot(b) / (a.norm() * b.norm()));
        cot_sum += 1.0 / std::tan(0.5 * theta);
    }
    const std::vector<Kind> kinds = {{Domain::disk(1.0), 2 * kPi}, {Domain::rectangle(2, 1), 8.0}, {Domain::polygon(pent), 2 * cot_sum}};
    auto ind = [](double r) { return r < 1.0 ? 1.0 : 0.0; };
    auto ex = [](double r) { return std::exp(-r); };
    auto alg = [](double r) { return 1.0 / ((1 + r) * (1 + r)); };
    for (const auto& [d, c] : kinds) {
        CAPTURE(d.spec());
        const double per = d.perimeter();
        for (double eta : {0.02, 0.005}) {
            const double gi = 1.0 - boundary_layer_functional(d, ind, eta, {1.0}) / per;
            const double ge = 1.0 - boundary_layer_functional(d, ex, eta) / per;
            CHECK(gi == doctest::Approx(0.5 * c * eta / per).epsilon(1e-6));
            CHECK(ge == doctest::Approx(c * eta / per).epsilon(1e-6));
        }
        CHECK(std::abs(boundary_layer_functional(d, ind, 0.005, {1.0}) / per - 1.0) < 0.02);
        CHECK(std::abs(boundary_layer_functional(d, ex, 0.005) / per - 1.0) < 0.02);
        // int r f dr diverges for the algebraic profile; convergence is only like eta log(1/eta).
        double prev = 1e300;
        for (double eta : {0.02, 0.005, 0.001}) {
            const double gap = std::abs(boundary_layer_functional(d, alg, eta) / per - 1.0);
            CHECK(gap < prev);
            prev = gap;
        }
        CHECK(prev < 0.02);

        // eta-indexed family dominated by 2 f and converging uniformly on compacts.
        for (double eta : {0.02, 0.005}) {
            auto fam = [eta](double r) { return std::exp(-r) * (1.0 + eta * std::exp(-r) * std::cos(r)); };
            const double lim = boundary_layer_functional(d, ex, eta);
            CHECK(std::abs(boundary_layer_functional(d, fam, eta) / lim - 1.0) < 0.03);
        }
        const double eta = 0.005;
        auto fam = [eta](double r) { return std::exp(-r) * (1.0 + eta * std::exp(-r) * std::cos(r)); };
        CHECK(std::abs(boundary_layer_functional(d, fam, eta) / per - 1.0) < 0.03);
    }
}

TEST_CASE("boundary layer functional on the rectangle against the exact offset areas") {
    const Domain rect = Domain::rectangle(2, 1);
    auto alg = [](double r) { return 1.0 / ((1 + r) * (1 + r)); };
    const double eta = 0.02;
    // (1/eta) int_0^{1/2} (6 - 8u) (1 + u/eta)^{-2} du in closed form.
    const double big = 0.5 / eta;
    const double i0 = eta * (1 - 1 / (1 + big));
    const double i1 = eta * eta * (std::log(1 + big) + 1 / (1 + big) - 1);
    CHECK(boundary_layer_functional(rect, alg, eta) == doctest::Approx((6 * i0 - 8 * i1) / eta).epsilon(1e-9));
    CHECK_THROWS(boundary_layer_functional(Domain::half_space(), alg, eta));
}
