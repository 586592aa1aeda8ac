#pragma once

namespace rstrace {

double bessel_j0(double x);
double bessel_j1(double x);

/// k-th positive zero of J0, k >= 1.
double bessel_j0_zero(int k);

/// Surface measure of the unit sphere in R^d, 2 pi^{d/2} / Gamma(d/2).
double sphere_area(int d);

/// Angular average of exp(i x . e) over the unit sphere in R^d:
/// cos(x) for d = 1, J0(x) for d = 2, sin(x)/x for d = 3.
double radial_kernel(int d, double x);

/// k-th positive zero of radial_kernel(d, .).
double radial_kernel_zero(int d, int k);

} // namespace rstrace
