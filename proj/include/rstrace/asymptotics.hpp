#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rstrace/geometry.hpp"
#include "rstrace/process.hpp"

namespace rstrace {

/// k = largest integer below 2/alpha; j = largest nonnegative integer not above 1/alpha.
struct IntermediateCounts {
    int k = 0;
    int j = 0;
};

IntermediateCounts intermediate_counts(double alpha);

enum class DomainClass { C11, Lipschitz };

struct ExpansionTerm {
    double t_exponent = 0.0;
    double coefficient = 0.0;
    std::string label;  // "volume", "surface" or "intermediate-n"
};

/// Small-time trace expansion sum_i c_i t^{e_i} with a labelled term per contribution.
struct ExpansionPrediction {
    std::vector<ExpansionTerm> terms;
    double error_exponent = 0.0;  // of the remainder (a little-o marker for Lipschitz)
    DomainClass domain_class = DomainClass::C11;
    double alpha = 1.0;
    int dim = 2;

    double evaluate(double t) const;
    /// t^{d/alpha} times evaluate(t).
    double scaled(double t) const;
    const ExpansionTerm& term(const std::string& label) const;
};

/// Terms of the C^{1,1} expansion if the domain has C^{1,1} characteristics, else the Lipschitz one.
ExpansionPrediction predict_expansion(const ProcessParams& p, const Domain& d, double c2);
/// Same inputs, explicit class.
ExpansionPrediction predict_expansion(const ProcessParams& p, const Domain& d, double c2, DomainClass cls);

enum class TraceSource { Spectral, MonteCarlo };

struct TraceSample {
    double t = 0.0;
    double value = 0.0;
    double error = 0.0;  // one standard error of value
    TraceSource source = TraceSource::Spectral;
};

struct TraceCurve {
    std::vector<TraceSample> samples;

    /// t strictly increasing; values positive and decreasing.
    void validate() const;
};

struct FitOptions {
    bool nuisance = true;                  // extra column at the remainder exponent
    std::vector<std::string> fixed;        // labels held at their predicted values
};

struct FittedTerm {
    double shifted_exponent = 0.0;         // power of t in t^{d/alpha} Z
    std::vector<std::string> labels;       // predicted terms sharing this exponent
    bool merged = false;                   // more than one label
    bool nuisance = false;
    double fitted = 0.0;
    double sigma = 0.0;
    double predicted = 0.0;                // summed prediction (0 for the nuisance column)
    double relative_discrepancy() const;
};

struct FitReport {
    std::vector<FittedTerm> terms;
    Eigen::MatrixXd covariance;
    double residual_rms = 0.0;             // of t^{d/alpha} Z, weighted
    std::size_t samples = 0;

    const FittedTerm& term(const std::string& label) const;
};

/// Weighted least squares of t^{d/alpha} Z(t) on the powers implied by the prediction.
/// Weights are 1/stderr^2 for Monte Carlo curves and uniform for spectral curves.
FitReport fit_coefficients(const TraceCurve& curve, const ExpansionPrediction& pred, const FitOptions& opt = {});

struct ResidualOrder {
    double slope = 0.0;                    // d log|t^{d/alpha} Z - prediction| / d log t
    bool inconclusive = false;             // residual at the noise or rounding floor
    bool ratio_decreasing = false;         // residual / t^{1/alpha} decreasing as t decreases
    std::string note;
};

ResidualOrder residual_order(const TraceCurve& curve, const ExpansionPrediction& pred);

} // namespace rstrace
