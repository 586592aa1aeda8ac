#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "rstrace/errors.hpp"

namespace rstrace {

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    int evaluations = 0;
};

struct QuadOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    int max_intervals = 4000;
};

namespace detail {

// 7-point Gauss / 15-point Kronrod, nodes on [0,1] half of [-1,1].
inline constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a, b, value, error, floor;
    bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gk15(F& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double hl = 0.5 * (b - a);
    const double fc = f(c);
    double resk = fc * kWgk[7];
    double resg = fc * kWg[3];
    double resabs = std::abs(resk);
    double fv1[7], fv2[7];
    for (int j = 0; j < 7; ++j) {
        const double dx = hl * kXgk[j];
        const double f1 = f(c - dx);
        const double f2 = f(c + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += kWgk[j] * (f1 + f2);
        resabs += kWgk[j] * (std::abs(f1) + std::abs(f2));
        if (j % 2 == 1) resg += kWg[j / 2] * (f1 + f2);
    }
    const double mean = 0.5 * resk;
    double resasc = kWgk[7] * std::abs(fc - mean);
    for (int j = 0; j < 7; ++j) resasc += kWgk[j] * (std::abs(fv1[j] - mean) + std::abs(fv2[j] - mean));
    const double ahl = std::abs(hl);
    double err = std::abs((resk - resg) * hl);
    resasc *= ahl;
    resabs *= ahl;
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    constexpr double eps = std::numeric_limits<double>::epsilon();
    if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
    return {a, b, resk * hl, err, 50.0 * eps * resabs};
}

} // namespace detail

/// Globally adaptive Gauss-Kronrod on [a, b]. Throws QuadratureError when the
/// interval budget is exhausted before the tolerance is met, unless
/// `throw_on_failure` is false (then the best estimate is returned).
template <class F>
QuadResult integrate(F&& f, double a, double b, const QuadOptions& opt = {}, bool throw_on_failure = true) {
    if (a == b) return {};
    std::priority_queue<detail::Segment> heap;
    auto first = detail::gk15(f, a, b);
    double total = first.value, err = first.error, floor = first.floor;
    int evals = 15;
    heap.push(first);
    int n = 1;
    // Errors at the rounding floor of the Kronrod sums cannot be reduced further.
    while (err > std::max({opt.abs_tol, opt.rel_tol * std::abs(total), 2.0 * floor})) {
        if (n >= opt.max_intervals) {
            if (throw_on_failure) throw QuadratureError("adaptive quadrature did not converge", err);
            break;
        }
        auto s = heap.top();
        heap.pop();
        const double mid = 0.5 * (s.a + s.b);
        if (mid <= s.a || mid >= s.b) {
            // Interval collapsed to machine resolution; nothing left to refine.
            if (throw_on_failure) throw QuadratureError("quadrature interval underflow", err);
            break;
        }
        auto l = detail::gk15(f, s.a, mid);
        auto r = detail::gk15(f, mid, s.b);
        evals += 30;
        total += l.value + r.value - s.value;
        err += l.error + r.error - s.error;
        floor += l.floor + r.floor - s.floor;
        heap.push(l);
        heap.push(r);
        ++n;
    }
    // Re-sum to shed accumulated rounding from the running updates.
    double sum = 0.0, esum = 0.0;
    while (!heap.empty()) {
        sum += heap.top().value;
        esum += heap.top().error;
        heap.pop();
    }
    return {sum, esum, evals};
}

/// Integral over [a, inf) through x = a + L u/(1-u).
template <class F>
QuadResult integrate_to_infinity(F&& f, double a, double length_scale, const QuadOptions& opt = {},
                                 bool throw_on_failure = true) {
    auto g = [&](double u) {
        if (u >= 1.0) return 0.0;
        const double one_minus = 1.0 - u;
        const double x = a + length_scale * u / one_minus;
        const double v = f(x);
        return v == 0.0 ? 0.0 : v * length_scale / (one_minus * one_minus);
    };
    return integrate(g, 0.0, 1.0, opt, throw_on_failure);
}

/// Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;
    explicit GaussLegendre(int n);

    template <class F>
    double operator()(F&& f, double a, double b) const {
        const double c = 0.5 * (a + b), hl = 0.5 * (b - a);
        double s = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(c + hl * nodes[i]);
        return s * hl;
    }
};

/// Wynn's epsilon algorithm over a growing sequence of partial sums.
class EpsilonAccelerator {
public:
    void push(double partial_sum);
    double estimate() const { return estimate_; }
    double error() const { return error_; }
    std::size_t size() const { return sums_.size(); }

private:
    std::vector<double> sums_;
    double estimate_ = 0.0;
    double error_ = std::numeric_limits<double>::infinity();
    double previous_ = std::numeric_limits<double>::quiet_NaN();
};

} // namespace rstrace
