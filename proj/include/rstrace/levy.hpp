#pragma once

#include <memory>
#include <vector>

#include "rstrace/geometry.hpp"
#include "rstrace/process.hpp"

namespace rstrace {

/// psi(r) = 2^{-2nu} Gamma(nu)^{-1} int_0^inf s^{nu-1} e^{-s/4 - r^2/s} ds, nu = (d+alpha)/2.
struct PsiProfile {
    double order;
    double tolerance = 1e-13;

    static PsiProfile for_params(const ProcessParams& p) { return {0.5 * (p.dim() + p.alpha())}; }
};

double psi(const PsiProfile& prof, double r);
/// 1 - psi(r) without cancellation near r = 0.
double one_minus_psi(const PsiProfile& prof, double r);

/// A(d, -alpha) = alpha 2^{alpha-1} pi^{-d/2} Gamma((d+alpha)/2) / Gamma(1 - alpha/2).
double levy_constant(int dim, double alpha);

/// J^m(r) = A(d,-alpha) r^{-d-alpha} psi(m^{1/alpha} r).
double levy_density(const ProcessParams& p, double r);

/// l = int (J^0 - J^m) dx.
double sigma_mass(const ProcessParams& p);

/// psi on a fine logarithmic grid; for bulk kernel sums.
class PsiTable {
public:
    explicit PsiTable(const PsiProfile& prof, double r_max = 80.0);
    double operator()(double r) const;

private:
    PsiProfile prof_;
    double r_min_, r_max_, log_r_min_, inv_step_;
    std::vector<double> log_psi_;
};

/// G(rho) = int_{|y| > rho} J^m(y) dy restricted to a ray: int_rho^inf j(s) s^{d-1} ds, d = 2.
/// Mass enters only through the scaled argument, so one table serves every m.
class LevyTail {
public:
    explicit LevyTail(const ProcessParams& p);
    double operator()(double rho) const;
    const ProcessParams& params() const { return params_; }

    struct Table;

private:
    double phi(double y) const;

    ProcessParams params_;
    double a_const_;
    std::shared_ptr<const Table> table_;  // shared across masses with the same (alpha, d)
};

/// kappa_D^m(x) = int_{D^c} J^m(x - y) dy by exterior rays (convex domains, d = 2).
class KillingRate {
public:
    explicit KillingRate(const ProcessParams& p);
    double operator()(const Domain& d, const Point& x) const;
    const LevyTail& tail() const { return tail_; }

private:
    LevyTail tail_;
};

double killing_rate(const ProcessParams& p, const Domain& d, const Point& x);

} // namespace rstrace
