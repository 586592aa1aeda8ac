#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace rstrace {

// Two families: bad input (ValidationError, CLI exit 2) and numerics that
// did not reach the requested accuracy (NumericalError, CLI exit 3).

class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class GeometryError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class CacheVersionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class QuadratureError : public NumericalError {
public:
    QuadratureError(const std::string& what, double achieved)
        : NumericalError(what + " (achieved error " + format(achieved) + ")"),
          achieved_error(achieved) {}
    double achieved_error;

private:
    static std::string format(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3e", v);
        return buf;
    }
};

class RejectionError : public NumericalError {
public:
    RejectionError(const std::string& what, double acceptance)
        : NumericalError(what), acceptance_rate(acceptance) {}
    double acceptance_rate;
};

class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class TailTooHeavyError : public NumericalError {
public:
    TailTooHeavyError(const std::string& what, double tail, double partial)
        : NumericalError(what), tail_bound(tail), partial_sum(partial) {}
    double tail_bound;
    double partial_sum;
};

class RankDeficiencyError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class TailFitError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace rstrace
