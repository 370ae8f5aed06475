#pragma once

#include <stdexcept>
#include <string>

namespace leosim {

// Invalid user input: scenario files, specs, CLI arguments. Maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

// A broken internal invariant (event in the past, non-adjacent next hop, ...).
// Maps to exit code 3.
class SimulationFault : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Malformed model, table or data file.
class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Transmission requested over a link whose data rate is zero.
class DeadLinkError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

} // namespace leosim
