#pragma once

#include <stdexcept>
#include <string>

namespace noarb {

// Invalid parameters or configuration. The message starts with the offending
// field name so callers can anchor diagnostics.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Evaluation outside the domain a result was computed on.
class DomainError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

// Iterative solver failed to meet its tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, int iterations, double residual)
        : std::runtime_error(what), iterations_(iterations), residual_(residual) {}

    int iterations() const { return iterations_; }
    double residual() const { return residual_; }

private:
    int iterations_;
    double residual_;
};

} // namespace noarb
