#pragma once

#include <stdexcept>
#include <string>

namespace whf {

/// Non-finite or out-of-range input to a numerical routine.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Invalid configuration or violated type invariant. `key()` names the
/// offending configuration key when one is known.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& message, std::string key = {})
        : std::invalid_argument(message), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// The adaptive integrator could not advance the solution.
class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& message, double t)
        : std::runtime_error(message + " at t=" + std::to_string(t)), t_(t) {}

    double time() const noexcept { return t_; }

private:
    double t_;
};

} // namespace whf
