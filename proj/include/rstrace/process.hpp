#pragma once

#include <string>

namespace rstrace {

/// Stability index, mass and ambient dimension of the relativistic
/// alpha-stable process. Construction validates the ranges.
class ProcessParams {
public:
    static constexpr double kMaxAlpha = 1.95;

    ProcessParams(double alpha, double mass, int dim);

    double alpha() const { return alpha_; }
    double mass() const { return mass_; }
    int dim() const { return dim_; }

    /// m^{1/alpha}, the inverse length scale of the exponential tempering.
    double mass_scale() const;
    /// m^{2/alpha}, the shift inside the characteristic exponent.
    double mass_shift() const;

    ProcessParams with_mass(double m) const { return {alpha_, m, dim_}; }
    std::string describe() const;

    friend bool operator==(const ProcessParams&, const ProcessParams&) = default;

private:
    double alpha_;
    double mass_;
    int dim_;
};

/// Phi(xi) = (|xi|^2 + m^{2/alpha})^{alpha/2} - m.
double char_exponent(const ProcessParams& p, double xi_norm);

/// Phi^0(s) - Phi^m(s) in [0, m], free of cancellation.
double char_exponent_deficit(const ProcessParams& p, double xi_norm);

/// omega_d Gamma(d/alpha) / ((2 pi)^d alpha) = p^0(1, 0).
double volume_constant(double alpha, int dim);

} // namespace rstrace
