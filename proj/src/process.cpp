#include "rstrace/process.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "rstrace/errors.hpp"
#include "rstrace/special.hpp"

namespace rstrace {

ProcessParams::ProcessParams(double alpha, double mass, int dim) : alpha_(alpha), mass_(mass), dim_(dim) {
    if (!(alpha > 0.0 && alpha <= kMaxAlpha))
        throw ValidationError("alpha must lie in (0, " + std::to_string(kMaxAlpha) + "], got " + std::to_string(alpha));
    if (!(mass >= 0.0) || !std::isfinite(mass))
        throw ValidationError("mass must be a finite nonnegative number");
    if (dim < 1 || dim > 3) throw ValidationError("dimension must be 1, 2 or 3");
}

double ProcessParams::mass_scale() const { return mass_ == 0.0 ? 0.0 : std::pow(mass_, 1.0 / alpha_); }
double ProcessParams::mass_shift() const { return mass_ == 0.0 ? 0.0 : std::pow(mass_, 2.0 / alpha_); }

std::string ProcessParams::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "alpha=" << alpha_ << " mass=" << mass_ << " dim=" << dim_;
    return os.str();
}

double char_exponent(const ProcessParams& p, double s) {
    if (p.mass() == 0.0) return std::pow(s, p.alpha());
    const double shift = p.mass_shift();
    if (s * s < shift) return p.mass() * std::expm1(0.5 * p.alpha() * std::log1p(s * s / shift));
    return std::pow(s * s + shift, 0.5 * p.alpha()) - p.mass();
}

double char_exponent_deficit(const ProcessParams& p, double s) {
    if (p.mass() == 0.0) return 0.0;
    const double a = p.alpha();
    const double shift = p.mass_shift();
    if (s == 0.0) return p.mass();
    // (s^2 + M)^{a/2} - s^a = s^a expm1((a/2) log1p(M/s^2))
    const double lift = std::pow(s, a) * std::expm1(0.5 * a * std::log1p(shift / (s * s)));
    return p.mass() - lift;
}

double volume_constant(double alpha, int dim) {
    return sphere_area(dim) * std::tgamma(dim / alpha) / (std::pow(2.0 * std::numbers::pi, dim) * alpha);
}

} // namespace rstrace
