#include "rstrace/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rstrace/errors.hpp"

namespace rstrace {

namespace {

constexpr double kSameExponent = 1e-9;

// floor(x), or x itself when x is an integer up to rounding.
int snapped_floor(double x) {
    const double r = std::round(x);
    if (std::abs(x - r) < 1e-12 * std::max(1.0, std::abs(x))) return static_cast<int>(r);
    return static_cast<int>(std::floor(x));
}

bool is_integer(double x) { return std::abs(x - std::round(x)) < 1e-12 * std::max(1.0, std::abs(x)); }

} // namespace

IntermediateCounts intermediate_counts(double alpha) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw DomainError("alpha must lie in (0, 2)");
    const double two = 2.0 / alpha, one = 1.0 / alpha;
    IntermediateCounts c;
    c.k = is_integer(two) ? static_cast<int>(std::round(two)) - 1 : snapped_floor(two);
    c.j = snapped_floor(one);
    return c;
}

double ExpansionPrediction::evaluate(double t) const {
    double s = 0.0;
    for (const auto& term : terms) s += term.coefficient * std::pow(t, term.t_exponent);
    return s;
}

double ExpansionPrediction::scaled(double t) const {
    double s = 0.0;
    for (const auto& term : terms) s += term.coefficient * std::pow(t, term.t_exponent + dim / alpha);
    return s;
}

const ExpansionTerm& ExpansionPrediction::term(const std::string& label) const {
    for (const auto& t : terms)
        if (t.label == label) return t;
    throw ValidationError("no expansion term labelled '" + label + "'");
}

ExpansionPrediction predict_expansion(const ProcessParams& p, const Domain& d, double c2) {
    return predict_expansion(p, d, c2, d.bounded() && d.c11() ? DomainClass::C11 : DomainClass::Lipschitz);
}

ExpansionPrediction predict_expansion(const ProcessParams& p, const Domain& d, double c2, DomainClass cls) {
    if (p.dim() != 2) throw ValidationError("expansions are built for planar domains (d = 2)");
    if (!d.bounded()) throw GeometryError("the expansion needs a bounded domain with area and perimeter");
    if (!(c2 > 0.0) || !std::isfinite(c2)) throw ValidationError("C2 must be positive");
    if (cls == DomainClass::C11 && !d.c11()) throw GeometryError("domain has no C^{1,1} characteristics");
    const double a = p.alpha();
    const int dim = p.dim();
    const double c1 = volume_constant(a, dim) * d.area();
    ExpansionPrediction out;
    out.alpha = a;
    out.dim = dim;
    out.domain_class = cls;
    out.terms.push_back({-dim / a, c1, "volume"});
    out.terms.push_back({(1.0 - dim) / a, -c2 * d.perimeter(), "surface"});
    const IntermediateCounts counts = intermediate_counts(a);
    const int n_max = cls == DomainClass::C11 ? counts.k : counts.j;
    if (p.mass() > 0.0) {
        double coef = c1;
        for (int n = 1; n <= n_max; ++n) {
            coef *= p.mass() / n;
            out.terms.push_back({n - dim / a, coef, "intermediate-" + std::to_string(n)});
        }
    }
    out.error_exponent = (cls == DomainClass::C11 ? 2.0 : 1.0) / a - dim / a;
    return out;
}

void TraceCurve::validate() const {
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (!(s.t > 0.0) || !std::isfinite(s.t)) throw ValidationError("trace samples need t > 0");
        if (!(s.value > 0.0) || !std::isfinite(s.value)) throw ValidationError("trace values must be positive");
        if (!(s.error >= 0.0)) throw ValidationError("standard errors must be nonnegative");
        if (i > 0) {
            if (!(s.t > samples[i - 1].t)) throw ValidationError("trace samples must be strictly increasing in t");
            if (!(s.value < samples[i - 1].value)) throw ValidationError("trace values must decrease in t");
        }
    }
}

double FittedTerm::relative_discrepancy() const {
    if (nuisance || predicted == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (fitted - predicted) / std::abs(predicted);
}

const FittedTerm& FitReport::term(const std::string& label) const {
    for (const auto& t : terms)
        if (std::find(t.labels.begin(), t.labels.end(), label) != t.labels.end()) return t;
    throw ValidationError("no fitted term carries the label '" + label + "'");
}

FitReport fit_coefficients(const TraceCurve& curve, const ExpansionPrediction& pred, const FitOptions& opt) {
    curve.validate();
    const auto& smp = curve.samples;
    const std::size_t n = smp.size();
    if (n < 4) throw ValidationError("a fit needs at least four samples");
    if (smp.back().t < 4.0 * smp.front().t) throw ValidationError("samples must span at least a factor 4 in t");
    const TraceSource source = smp.front().source;
    for (const auto& s : smp)
        if (s.source != source) throw ValidationError("cannot mix spectral and Monte Carlo samples in one fit");
    const bool mc = source == TraceSource::MonteCarlo;
    if (mc)
        for (const auto& s : smp)
            if (!(s.error > 0.0)) throw ValidationError("Monte Carlo samples need a positive standard error");
    for (const auto& f : opt.fixed) (void)pred.term(f);

    const double shift = pred.dim / pred.alpha;
    FitReport rep;
    rep.samples = n;
    for (const auto& term : pred.terms) {
        if (std::find(opt.fixed.begin(), opt.fixed.end(), term.label) != opt.fixed.end()) continue;
        const double e = term.t_exponent + shift;
        auto it = std::find_if(rep.terms.begin(), rep.terms.end(),
                               [&](const FittedTerm& f) { return std::abs(f.shifted_exponent - e) < kSameExponent; });
        if (it == rep.terms.end()) {
            FittedTerm f;
            f.shifted_exponent = e;
            rep.terms.push_back(f);
            it = rep.terms.end() - 1;
        }
        it->labels.push_back(term.label);
        it->predicted += term.coefficient;
        it->merged = it->labels.size() > 1;
    }
    if (opt.nuisance) {
        const double e = 2.0 / pred.alpha;
        const bool taken = std::any_of(rep.terms.begin(), rep.terms.end(),
                                       [&](const FittedTerm& f) { return std::abs(f.shifted_exponent - e) < kSameExponent; });
        if (!taken) {
            FittedTerm f;
            f.shifted_exponent = e;
            f.nuisance = true;
            f.labels.push_back("remainder");
            rep.terms.push_back(f);
        }
    }
    const std::size_t p = rep.terms.size();
    if (p == 0) throw ValidationError("nothing left to fit");
    if (p > n) throw RankDeficiencyError("more fitted exponents than samples");

    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = smp[i].t, ts = std::pow(t, shift);
        double v = ts * smp[i].value;
        for (const auto& term : pred.terms)
            if (std::find(opt.fixed.begin(), opt.fixed.end(), term.label) != opt.fixed.end())
                v -= term.coefficient * std::pow(t, term.t_exponent + shift);
        y(i) = v;
        w(i) = mc ? 1.0 / std::pow(ts * smp[i].error, 2) : 1.0;
        for (std::size_t j = 0; j < p; ++j) x(i, j) = std::pow(t, rep.terms[j].shifted_exponent);
    }
    const Eigen::VectorXd sw = w.cwiseSqrt();
    Eigen::MatrixXd xw = sw.asDiagonal() * x;
    const Eigen::VectorXd yw = sw.cwiseProduct(y);
    // Column scaling only for the conditioning test and the solve.
    Eigen::VectorXd scale(p);
    for (std::size_t j = 0; j < p; ++j) scale(j) = xw.col(j).norm();
    const Eigen::MatrixXd xs = xw * scale.cwiseInverse().asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(xs, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (!(sv(p - 1) > 1e-10 * sv(0)))
        throw RankDeficiencyError("the t-range cannot separate the requested exponents (condition " +
                                  std::to_string(sv(0) / sv(p - 1)) + ")");
    const Eigen::VectorXd beta = scale.cwiseInverse().asDiagonal() * svd.solve(yw);
    const Eigen::VectorXd resid = yw - xw * beta;
    const double rss = resid.squaredNorm();
    // (X^T W X)^{-1} from the SVD of the scaled design.
    const Eigen::MatrixXd vs = svd.matrixV() * sv.cwiseInverse().asDiagonal();
    Eigen::MatrixXd cov = scale.cwiseInverse().asDiagonal() * (vs * vs.transpose()) * scale.cwiseInverse().asDiagonal();
    if (!mc) cov *= n > p ? rss / static_cast<double>(n - p) : 0.0;
    rep.covariance = cov;
    rep.residual_rms = std::sqrt(rss / static_cast<double>(n));
    for (std::size_t j = 0; j < p; ++j) {
        rep.terms[j].fitted = beta(j);
        rep.terms[j].sigma = std::sqrt(std::max(0.0, cov(j, j)));
    }
    return rep;
}

ResidualOrder residual_order(const TraceCurve& curve, const ExpansionPrediction& pred) {
    curve.validate();
    const auto& smp = curve.samples;
    if (smp.size() < 4) throw ValidationError("residual order needs at least four samples");
    if (smp.back().t < 4.0 * smp.front().t) throw ValidationError("samples must span at least a factor 4 in t");
    const double shift = pred.dim / pred.alpha;
    ResidualOrder out;
    std::vector<double> lx, ly, ratio;
    for (const auto& s : smp) {
        const double ts = std::pow(s.t, shift);
        const double y = ts * s.value;
        const double r = y - pred.scaled(s.t);
        const double floor = std::max(2.0 * ts * s.error, 1e-12 * std::abs(y));
        if (std::abs(r) <= floor) out.inconclusive = true;
        lx.push_back(std::log(s.t));
        ly.push_back(std::log(std::max(std::abs(r), std::numeric_limits<double>::min())));
        ratio.push_back(std::abs(r) / std::pow(s.t, 1.0 / pred.alpha));
    }
    const double nn = static_cast<double>(lx.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) sx += lx[i], sy += ly[i], sxx += lx[i] * lx[i], sxy += lx[i] * ly[i];
    out.slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    out.ratio_decreasing = true;
    for (std::size_t i = 1; i < ratio.size(); ++i)
        if (!(ratio[i] > ratio[i - 1])) out.ratio_decreasing = false;
    if (out.inconclusive) out.note = "residual at the noise or rounding floor on part of the window";
    return out;
}

} // namespace rstrace
