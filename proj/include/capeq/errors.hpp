// SPDX-License-Identifier: MIT
#pragma once

#include <stdexcept>
#include <string>

namespace capeq {

/// Argument outside the domain of an operation (bad parameter ranges, r <= mu, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to meet its tolerance or could not bracket a root.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Scenario file or command-line input could not be parsed into valid types.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace capeq
