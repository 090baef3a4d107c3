#pragma once

#include <stdexcept>
#include <string>

namespace rrl {

/// Input violates a documented precondition (dimension mismatch, bad range,
/// malformed descriptor, unknown knob, ...).
class invalid_input : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A fixed-point or optimization loop ran out of iterations.  Carries the
/// last residual so callers can report how close the run got.
class no_convergence : public std::runtime_error {
public:
    no_convergence(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_ = 0.0;
};

/// A linear solve failed or produced non-finite values.
class solver_failure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A feature matrix does not have full column rank.
class rank_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A Markov chain has no usable stationary distribution (reducible chain or
/// a state with vanishing visitation mass).
class non_ergodic : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An operation was asked to run on an uncertainty-set variant it does not
/// support (e.g. a vertex-enumeration check on a continuous set).
class unsupported_variant : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace rrl
