#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rot {

/// Bad parameter or inconsistent dimensions.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Scalar row solve failed; carries the last bracket.
class RootFindError : public std::runtime_error {
public:
    RootFindError(const std::string& what, double lo, double hi)
        : std::runtime_error(what), lo_(lo), hi_(hi) {}
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }

private:
    double lo_;
    double hi_;
};

/// Outer dual iteration did not reach the residual tolerance.
class NonConvergence : public std::runtime_error {
public:
    NonConvergence(const std::string& what, std::vector<double> trace)
        : std::runtime_error(what), trace_(std::move(trace)) {}
    const std::vector<double>& residual_trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

/// Empty section or vanishing normalization (unconverged or under-resolved instance).
class DegenerateSection : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedMethod : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Torus closed form requested outside R_eps < 1/2.
class OutOfRegime : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rot
