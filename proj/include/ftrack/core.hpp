#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace ftrack {

/// Conserved-state vector u in R^N.
using State = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when a state leaves the model's box domain.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Eigenvalue gap of the Jacobian fell below the configured tolerance.
class DegeneracyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Elementary-curve evaluation failed (Newton or ODE).
class CurveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A Riemann solver could not produce a fan.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Declared field kind disagrees with the measured one.
class ModelAuditError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid run configuration. `key()` names the offending entry.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Tracker aborted (safety caps, bad preconditions).
class RunError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace ftrack
